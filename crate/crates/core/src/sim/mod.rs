//! Instruction-level interpreter for `<E, P, F>` designs.
//!
//! Each step dispatches one instruction of the stored program to the
//! implementation of its function instance. Only one function is active at
//! a time.

mod impls;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use sha2::{Digest as _, Sha256};
use thiserror::Error;

pub use impls::{BodyImpl, FunctionImpl, ImplRegistry, Invocation, NativeImpl, StubImpl};

use crate::design::{DesignSpec, InstanceId};
use crate::power::ActivityProfile;
use crate::value::{Valuation, MAX_WIDTH};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("pc {pc} is outside the program")]
    BadPc { pc: usize },
    #[error("program has halted")]
    Halted,
    #[error("no implementation for instance `{0}`")]
    MissingImpl(InstanceId),
    #[error("`{instance}` wrote `{element}`, which is not one of its parameters")]
    UndeclaredWrite {
        instance: InstanceId,
        element: String,
    },
    #[error("`{instance}` reported a state cost of zero")]
    ZeroCost { instance: InstanceId },
    #[error("`{instance}` failed: {message}")]
    Function {
        instance: InstanceId,
        message: String,
    },
    #[error("trace of {records} records does not cover whole periods of {len}")]
    PartialPeriod { records: usize, len: usize },
    #[error("{active} active states exceed the period of {period}")]
    ActivityOverflow { active: u64, period: u32 },
    #[error("trace is empty")]
    EmptyTrace,
}

/// `tau(E)` plus the program counter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineState {
    pub values: Valuation,
    pub pc: usize,
    pub period_count: u64,
}

impl EngineState {
    /// All elements zero, at the start of the first period. Widths above
    /// 64 bits are represented with 64.
    pub fn initial(design: &DesignSpec) -> Self {
        let mut values = Valuation::new();
        for e in &design.storage {
            values.declare(e.name.clone(), e.width_bits.clamp(1, MAX_WIDTH));
        }
        EngineState {
            values,
            pc: 0,
            period_count: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub period: u64,
    pub pc: usize,
    pub instance: InstanceId,
    pub states: u32,
    /// Hashes of the instruction's parameters before and after dispatch.
    pub pre_hash: u64,
    pub post_hash: u64,
    /// Concurrency slot; always 0 with one active function.
    pub slot: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Trace {
    pub program_len: usize,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("period,pc,instance,states,pre_hash,post_hash\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{:016x},{:016x}",
                r.period, r.pc, r.instance, r.states, r.pre_hash, r.post_hash
            );
        }
        out
    }
}

fn touched_hash(values: &Valuation, params: &[String]) -> u64 {
    let mut h = Sha256::new();
    for p in params {
        h.update(p.as_bytes());
        h.update([0]);
        h.update(values.get(p).unwrap_or(0).to_le_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// Dispatches the instruction at `state.pc`.
pub fn step(
    state: &EngineState,
    design: &DesignSpec,
    impls: &ImplRegistry,
) -> Result<(EngineState, TraceRecord), SimError> {
    let len = design.program.len();
    if state.pc >= len {
        return Err(if !design.program.cyclic && state.pc == len {
            SimError::Halted
        } else {
            SimError::BadPc { pc: state.pc }
        });
    }
    let ins = &design.program.instructions[state.pc];
    let instance = design
        .instance_at(state.pc)
        .ok_or(SimError::BadPc { pc: state.pc })?;
    let imp = impls
        .resolve(&instance)
        .ok_or_else(|| SimError::MissingImpl(instance.clone()))?;
    let out = imp
        .invoke(&state.values, &ins.params)
        .map_err(|message| SimError::Function {
            instance: instance.clone(),
            message,
        })?;
    if let Some(element) = state
        .values
        .changed_names(&out.env)
        .into_iter()
        .find(|n| !ins.params.contains(n))
    {
        return Err(SimError::UndeclaredWrite { instance, element });
    }
    if out.states == 0 {
        return Err(SimError::ZeroCost { instance });
    }
    let record = TraceRecord {
        period: state.period_count,
        pc: state.pc,
        instance,
        states: out.states,
        pre_hash: touched_hash(&state.values, &ins.params),
        post_hash: touched_hash(&out.env, &ins.params),
        slot: 0,
    };
    let mut next = EngineState {
        values: out.env,
        pc: state.pc + 1,
        period_count: state.period_count,
    };
    if next.pc == len {
        next.period_count += 1;
        if design.program.cyclic {
            next.pc = 0;
        }
    }
    Ok((next, record))
}

/// Runs `periods` full passes over the program.
pub fn run_periods(
    state: &EngineState,
    design: &DesignSpec,
    impls: &ImplRegistry,
    periods: u64,
) -> Result<(EngineState, Trace), SimError> {
    let mut trace = Trace {
        program_len: design.program.len(),
        records: Vec::new(),
    };
    let mut cur = state.clone();
    let steps = periods as usize * design.program.len();
    for _ in 0..steps {
        let (next, rec) = step(&cur, design, impls)?;
        trace.records.push(rec);
        cur = next;
        if cur.pc == design.program.len() && cur.period_count < state.period_count + periods {
            return Err(SimError::Halted);
        }
    }
    Ok((cur, trace))
}

/// Average active states per instance per period, rounded half-to-even.
pub fn extract_activity(trace: &Trace, period_states: u32) -> Result<ActivityProfile, SimError> {
    if trace.is_empty() {
        return Err(SimError::EmptyTrace);
    }
    if trace.program_len == 0 || !trace.len().is_multiple_of(trace.program_len) {
        return Err(SimError::PartialPeriod {
            records: trace.len(),
            len: trace.program_len,
        });
    }
    let periods = (trace.len() / trace.program_len) as u64;
    let mut order = Vec::new();
    let mut sums: BTreeMap<&InstanceId, u64> = BTreeMap::new();
    for r in &trace.records {
        let e = sums.entry(&r.instance).or_insert_with(|| {
            order.push(r.instance.clone());
            0
        });
        *e += u64::from(r.states);
    }
    let active: Vec<(InstanceId, u32)> = order
        .into_iter()
        .map(|id| {
            let n = round_half_even(sums[&id], periods);
            (id, u32::try_from(n).unwrap_or(u32::MAX))
        })
        .collect();
    let total: u64 = active.iter().map(|(_, n)| u64::from(*n)).sum();
    if total > u64::from(period_states) {
        return Err(SimError::ActivityOverflow {
            active: total,
            period: period_states,
        });
    }
    Ok(ActivityProfile {
        period_states,
        l_div: None,
        active,
    })
}

fn round_half_even(num: u64, den: u64) -> u64 {
    let (q, r) = (num / den, num % den);
    match (2 * r).cmp(&den) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => q + (q & 1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::*;

    fn f(name: &str, inputs: u32, outputs: u32, states: u32) -> FunctionSpec {
        FunctionSpec {
            name: name.into(),
            inputs,
            outputs,
            input_bits: 8 * inputs,
            output_bits: 8 * outputs,
            dyn_on_watts: 1.0,
            dyn_off_watts: 0.5,
            static_watts: None,
            state_count: states,
            variant_of: None,
        }
    }

    fn design(fs: Vec<FunctionSpec>, ins: Vec<Instruction>, storage: &[&str]) -> DesignSpec {
        let storage: Vec<_> = storage.iter().map(|n| StorageElement::new(*n, 8)).collect();
        let program = ProgramSpec::cyclic(ins);
        let instances = program.instances();
        let functions: BTreeMap<_, _> = fs.into_iter().map(|f| (f.name.clone(), f)).collect();
        let (routing, costs) = derive_routing(&program, &functions, &storage, &instances).unwrap();
        DesignSpec {
            name: "t".into(),
            storage,
            program,
            functions,
            instances,
            routing,
            costs,
        }
    }

    fn adder() -> (DesignSpec, ImplRegistry) {
        let d = design(
            vec![f("add", 2, 1, 3), f("id", 1, 1, 1)],
            vec![
                Instruction::new("add", &["a", "b", "c"]),
                Instruction::new("id", &["c", "c"]),
            ],
            &["a", "b", "c"],
        );
        let mut r = ImplRegistry::new();
        r.insert_function(NativeImpl::new("add", 2, 1, 3, |x| vec![x[0] + x[1]]));
        r.insert_function(NativeImpl::new("id", 1, 1, 1, |x| vec![x[0]]));
        (d, r)
    }

    #[test]
    fn add_and_identity() {
        let (d, r) = adder();
        let s = EngineState::initial(&d);
        let s = EngineState {
            values: s.values.with("a", 2).with("b", 3),
            ..s
        };
        let (s1, rec) = step(&s, &d, &r).unwrap();
        assert_eq!(s1.values.get("c"), Some(5));
        assert_eq!((s1.pc, rec.states, rec.slot), (1, 3, 0));
        let (s2, rec) = step(&s1, &d, &r).unwrap();
        assert_eq!(s2.values, s1.values);
        assert_eq!(rec.pre_hash, rec.post_hash);
        assert_eq!((s2.pc, s2.period_count), (0, 1));
    }

    #[test]
    fn three_periods() {
        let (d, r) = adder();
        let (s, t) = run_periods(&EngineState::initial(&d), &d, &r, 3).unwrap();
        assert_eq!(t.len(), 6);
        assert_eq!(s.period_count, 3);
        assert_eq!(t.records[5].period, 2);
        assert!(t
            .to_csv()
            .starts_with("period,pc,instance,states,pre_hash,post_hash\n0,0,add#0,3,"));
    }

    #[test]
    fn undeclared_write_is_rejected() {
        let (d, mut r) = adder();
        r.insert_function(NativeImpl::raw(
            "id",
            2,
            |env: &Valuation, _p: &[String]| {
                Ok(Invocation {
                    env: env.clone().with("a", 9),
                    states: 1,
                })
            },
        ));
        let s = EngineState::initial(&d);
        let (s1, _) = step(&s, &d, &r).unwrap();
        assert!(
            matches!(step(&s1, &d, &r), Err(SimError::UndeclaredWrite { element, .. }) if element == "a")
        );
    }

    #[test]
    fn activity_from_costs() {
        let d = design(
            (0..4).map(|k| f(&format!("f{k}"), 1, 1, 4)).collect(),
            (0..4)
                .map(|k| Instruction::new(format!("f{k}"), &["x", "x"]))
                .collect(),
            &["x"],
        );
        let r = ImplRegistry::stubs(&d);
        let (_, t1) = run_periods(&EngineState::initial(&d), &d, &r, 1).unwrap();
        let a1 = extract_activity(&t1, 20).unwrap();
        assert_eq!(
            a1.active.iter().map(|p| p.1).collect::<Vec<_>>(),
            [4, 4, 4, 4]
        );
        assert_eq!(u64::from(a1.period_states) - a1.total_active(), 4);
        let (_, t3) = run_periods(&EngineState::initial(&d), &d, &r, 3).unwrap();
        assert_eq!(extract_activity(&t3, 20).unwrap(), a1);
        assert!(matches!(
            extract_activity(&t1, 15),
            Err(SimError::ActivityOverflow { .. })
        ));
    }

    #[test]
    fn bankers_rounding() {
        assert_eq!(round_half_even(5, 2), 2);
        assert_eq!(round_half_even(7, 2), 4);
        assert_eq!(round_half_even(7, 3), 2);
        assert_eq!(round_half_even(8, 3), 3);
    }

    #[test]
    fn partial_period_rejected() {
        let (d, r) = adder();
        let (s, rec) = step(&EngineState::initial(&d), &d, &r).unwrap();
        let _ = s;
        let t = Trace {
            program_len: 2,
            records: vec![rec],
        };
        assert!(matches!(
            extract_activity(&t, 10),
            Err(SimError::PartialPeriod { .. })
        ));
    }
}
