use super::{ActivityProfile, PowerError};
use crate::design::DesignSpec;

/// What the allocation search aims for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitTarget {
    /// Gamma numerator `sum_j [n_j on_j + (L - n_j) off_j]`.
    Numerator(f64),
    /// Gamma itself; converted to a numerator through `L_div`.
    Gamma(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub activity: ActivityProfile,
    pub numerator: f64,
    pub gamma: f64,
    /// `|numerator - target numerator|`.
    pub error: f64,
    pub evaluated: u64,
    /// One line per improvement of the incumbent.
    pub log: Vec<String>,
}

/// Exhaustive search over integer allocations `1 <= n_j <= min(states_j, L)`
/// with `sum n_j <= L`, in lexicographic order. The first allocation with
/// the smallest error (rounded to 1e-9 W) wins.
pub fn fit_activity(
    design: &DesignSpec,
    period_states: u32,
    l_div: Option<u32>,
    target: FitTarget,
) -> Result<FitResult, PowerError> {
    let divisor = l_div.unwrap_or(period_states);
    if period_states == 0 || divisor == 0 {
        return Err(PowerError::NoAllocation);
    }
    let l = f64::from(period_states);
    let target_num = match target {
        FitTarget::Numerator(v) => v,
        FitTarget::Gamma(g) => g * f64::from(divisor),
    };

    let mut slopes = Vec::new();
    let mut bounds = Vec::new();
    let mut base = 0.0;
    for id in &design.instances {
        let f = design
            .function(&id.function)
            .ok_or_else(|| PowerError::UnknownFunction(id.function.clone()))?;
        base += l * f.dyn_off_watts;
        slopes.push(f.dyn_on_watts - f.dyn_off_watts);
        bounds.push(f.state_count.min(period_states));
    }

    let mut search = Search {
        slopes: &slopes,
        bounds: &bounds,
        target: target_num,
        budget: period_states,
        current: vec![0; slopes.len()],
        best: None,
        evaluated: 0,
        log: Vec::new(),
        base,
    };
    search.go(0, 0, 0.0);
    let Some((alloc, numerator, _)) = search.best.clone() else {
        return Err(PowerError::NoAllocation);
    };
    let activity = ActivityProfile {
        period_states,
        l_div,
        active: design.instances.iter().cloned().zip(alloc).collect(),
    };
    Ok(FitResult {
        activity,
        numerator,
        gamma: numerator / f64::from(divisor),
        error: (numerator - target_num).abs(),
        evaluated: search.evaluated,
        log: search.log,
    })
}

struct Search<'a> {
    slopes: &'a [f64],
    bounds: &'a [u32],
    target: f64,
    budget: u32,
    current: Vec<u32>,
    best: Option<(Vec<u32>, f64, i64)>,
    evaluated: u64,
    log: Vec<String>,
    base: f64,
}

impl Search<'_> {
    fn go(&mut self, k: usize, used: u32, acc: f64) {
        if k == self.slopes.len() {
            self.evaluated += 1;
            let numerator = self.base + acc;
            let score = ((numerator - self.target).abs() * 1e9).round() as i64;
            if self.best.as_ref().is_none_or(|(_, _, s)| score < *s) {
                self.log.push(format!(
                    "candidate {} {:?} numerator={numerator:.6} error={:.9}",
                    self.evaluated,
                    self.current,
                    score as f64 * 1e-9
                ));
                self.best = Some((self.current.clone(), numerator, score));
            }
            return;
        }
        // every later instance needs at least one state
        let remaining = (self.slopes.len() - k - 1) as u32;
        let Some(room) = self.budget.checked_sub(used + remaining) else {
            return;
        };
        for n in 1..=self.bounds[k].min(room) {
            self.current[k] = n;
            self.go(k + 1, used + n, acc + f64::from(n) * self.slopes[k]);
        }
    }
}
