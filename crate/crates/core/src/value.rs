//! Fixed-width two's-complement storage values.

use std::collections::BTreeMap;
use std::fmt;

/// Largest supported storage width.
pub const MAX_WIDTH: u32 = 64;

/// Truncates `value` to `width` bits and sign-extends the result.
pub fn wrap(value: i64, width: u32) -> i64 {
    debug_assert!((1..=MAX_WIDTH).contains(&width));
    if width >= 64 {
        return value;
    }
    let shift = 64 - width;
    (value << shift) >> shift
}

/// Smallest and largest value representable in `width` bits.
pub fn range(width: u32) -> (i64, i64) {
    if width >= 64 {
        (i64::MIN, i64::MAX)
    } else {
        (-(1i64 << (width - 1)), (1i64 << (width - 1)) - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Slot {
    pub width: u32,
    pub value: i64,
}

/// An assignment of values to named storage elements (`tau(E)`).
///
/// Every write is truncated to the slot's declared width, so values always
/// stay within range.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Valuation {
    slots: BTreeMap<String, Slot>,
}

impl Valuation {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares `name` with the given width, initialised to zero.
    pub fn declare(&mut self, name: impl Into<String>, width: u32) {
        self.slots.insert(name.into(), Slot { width, value: 0 });
    }

    pub fn with(mut self, name: &str, value: i64) -> Self {
        self.set(name, value);
        self
    }

    pub fn get(&self, name: &str) -> Option<i64> {
        self.slots.get(name).map(|s| s.value)
    }

    pub fn width(&self, name: &str) -> Option<u32> {
        self.slots.get(name).map(|s| s.width)
    }

    /// Writes `value` (wrapped to the slot width). Returns `false` if `name`
    /// is not declared.
    pub fn set(&mut self, name: &str, value: i64) -> bool {
        match self.slots.get_mut(name) {
            Some(slot) => {
                slot.value = wrap(value, slot.width);
                true
            }
            None => false,
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.slots.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Slot)> {
        self.slots.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Names whose value differs between `self` and `other`, including names
    /// present in only one of the two.
    pub fn changed_names(&self, other: &Valuation) -> Vec<String> {
        let mut out = Vec::new();
        for (name, slot) in &self.slots {
            if other.slots.get(name) != Some(slot) {
                out.push(name.clone());
            }
        }
        for name in other.slots.keys() {
            if !self.slots.contains_key(name) {
                out.push(name.clone());
            }
        }
        out
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (name, slot) in &self.slots {
            if !first {
                f.write_str(", ")?;
            }
            first = false;
            write!(f, "{}={}", name, slot.value)?;
        }
        Ok(())
    }
}
