//! Static and dynamic power estimation, routing calibration and
//! cross-design prediction.
//!
//! Dynamic power of a design is `P_d(c) + Gamma + P_r(1) * 1^T(R D)` where
//!
//! ```text
//! Gamma = sum_j [ n_j * on_j + (L - n_j) * off_j ] / L_div
//! ```
//!
//! over the function instances `j`, with `n_j` the active states of
//! instance `j` per period of `L` states.

mod fit;
mod substitute;

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

pub use fit::{fit_activity, FitResult, FitTarget};
pub use substitute::{remap_activity, substitute_optimized, Substitution};

use crate::design::{routing_bits, DesignError, DesignSpec, InstanceId, MeasuredPower};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PowerError {
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error("activity profile does not match the design: {0}")]
    InstanceMismatch(String),
    #[error("function `{0}` is not in the library")]
    UnknownFunction(String),
    #[error("function `{0}` has no static power")]
    MissingStatic(String),
    #[error("no routing power coefficient: calibrate first")]
    Uncalibrated,
    #[error("routing cost is zero bits; nothing to calibrate")]
    ZeroRoutingBits,
    #[error("negative routing residual {0} W: measurement below modelled function power")]
    NegativeResidual(f64),
    #[error("`{0}` must be finite and non-negative")]
    BadParameter(&'static str),
    #[error("variant `{variant}` does not preserve the interface of `{base}`")]
    VariantInterface { variant: String, base: String },
    #[error("several variants replace `{0}`")]
    AmbiguousVariant(String),
    #[error("no allocation satisfies the constraints")]
    NoAllocation,
}

impl PowerError {
    /// Failures caused by numbers rather than by malformed inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            PowerError::NegativeResidual(_)
                | PowerError::ZeroRoutingBits
                | PowerError::NoAllocation
                | PowerError::Uncalibrated
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerParams {
    /// `P_s(c)`: static power of the interpreter itself.
    pub ps_c: f64,
    /// `P_d(c)`: dynamic power of the interpreter itself.
    pub pd_c: f64,
    /// `P_r(1)`: dynamic routing power per bit.
    pub pr1: Option<f64>,
    /// Static routing power per bit; falls back to `pr1` when unset.
    pub pr1_static: Option<f64>,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for PowerParams {
    fn default() -> Self {
        PowerParams {
            ps_c: 0.0,
            pd_c: 0.0,
            pr1: None,
            pr1_static: None,
            sigma: 0.0,
            seed: 0,
        }
    }
}

impl PowerParams {
    pub fn check(&self) -> Result<(), PowerError> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.ps_c) {
            return Err(PowerError::BadParameter("ps_c"));
        }
        if !ok(self.pd_c) {
            return Err(PowerError::BadParameter("pd_c"));
        }
        if !self.pr1.is_none_or(ok) {
            return Err(PowerError::BadParameter("pr1"));
        }
        if !self.pr1_static.is_none_or(ok) {
            return Err(PowerError::BadParameter("pr1_static"));
        }
        if !ok(self.sigma) {
            return Err(PowerError::BadParameter("sigma"));
        }
        Ok(())
    }
}

/// Active states per period for every function instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivityProfile {
    /// `L`: states in one period.
    pub period_states: u32,
    /// Divisor of Gamma; `L` when unset.
    pub l_div: Option<u32>,
    pub active: Vec<(InstanceId, u32)>,
}

impl ActivityProfile {
    pub fn get(&self, id: &InstanceId) -> Option<u32> {
        self.active.iter().find(|(i, _)| i == id).map(|(_, n)| *n)
    }

    pub fn total_active(&self) -> u64 {
        self.active.iter().map(|(_, n)| u64::from(*n)).sum()
    }

    pub fn divisor(&self) -> u32 {
        self.l_div.unwrap_or(self.period_states)
    }

    /// Checks the profile covers exactly the design's instances and fits in
    /// one period.
    pub fn check(&self, design: &DesignSpec) -> Result<(), PowerError> {
        let mismatch = |m: String| Err(PowerError::InstanceMismatch(m));
        if self.period_states == 0 {
            return mismatch("period_states must be positive".into());
        }
        if self.divisor() == 0 {
            return mismatch("l_div must be positive".into());
        }
        for (k, (id, _)) in self.active.iter().enumerate() {
            if !design.instances.contains(id) {
                return mismatch(format!("`{id}` is not an instance of `{}`", design.name));
            }
            if self.active[..k].iter().any(|(o, _)| o == id) {
                return mismatch(format!("`{id}` listed twice"));
            }
        }
        if let Some(missing) = design.instances.iter().find(|i| self.get(i).is_none()) {
            return mismatch(format!("no activity for `{missing}`"));
        }
        if self.total_active() > u64::from(self.period_states) {
            return mismatch(format!(
                "{} active states exceed the period of {}",
                self.total_active(),
                self.period_states
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Term {
    /// `P_s(c)` or `P_d(c)`.
    Interpreter,
    /// Sum of per-function static powers.
    Functions,
    Gamma,
    Routing,
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Term::Interpreter => "interpreter",
            Term::Functions => "functions",
            Term::Gamma => "gamma",
            Term::Routing => "routing",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerEstimate {
    pub mean: f64,
    /// Standard deviation of the additive Gaussian noise term.
    pub std: f64,
    pub breakdown: Vec<(Term, f64)>,
}

impl PowerEstimate {
    fn from_terms(breakdown: Vec<(Term, f64)>, std: f64) -> Self {
        let mean = breakdown.iter().map(|(_, v)| v).sum();
        PowerEstimate {
            mean,
            std,
            breakdown,
        }
    }

    pub fn term(&self, t: Term) -> Option<f64> {
        self.breakdown
            .iter()
            .find(|(k, _)| *k == t)
            .map(|(_, v)| *v)
    }

    /// `n` noisy realizations, reproducible for a given seed. Without noise
    /// every sample equals the mean.
    pub fn samples(&self, n: usize, seed: u64) -> Vec<f64> {
        if self.std == 0.0 {
            return vec![self.mean; n];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(self.mean, self.std).expect("finite std");
        (0..n).map(|_| normal.sample(&mut rng)).collect()
    }
}

/// `Gamma` together with the parts it is computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gamma {
    pub numerator: f64,
    pub divisor: u32,
    pub value: f64,
}

pub fn gamma(design: &DesignSpec, activity: &ActivityProfile) -> Result<Gamma, PowerError> {
    activity.check(design)?;
    let l = f64::from(activity.period_states);
    let mut numerator = 0.0;
    for id in &design.instances {
        let f = design
            .function(&id.function)
            .ok_or_else(|| PowerError::UnknownFunction(id.function.clone()))?;
        let n = f64::from(activity.get(id).unwrap_or(0));
        numerator += n * f.dyn_on_watts + (l - n) * f.dyn_off_watts;
    }
    let divisor = activity.divisor();
    Ok(Gamma {
        numerator,
        divisor,
        value: numerator / f64::from(divisor),
    })
}

/// `P_s(c) + sum_j P_s(f_j) + P_r(1) * 1^T(R D)`.
pub fn static_power(
    design: &DesignSpec,
    params: &PowerParams,
) -> Result<PowerEstimate, PowerError> {
    params.check()?;
    let mut functions = 0.0;
    for id in &design.instances {
        let f = design
            .function(&id.function)
            .ok_or_else(|| PowerError::UnknownFunction(id.function.clone()))?;
        functions += f
            .static_watts
            .ok_or_else(|| PowerError::MissingStatic(f.name.clone()))?;
    }
    let bits = routing_bits(&design.routing, &design.costs)?;
    let per_bit = params
        .pr1_static
        .or(params.pr1)
        .ok_or(PowerError::Uncalibrated)?;
    Ok(PowerEstimate::from_terms(
        vec![
            (Term::Interpreter, params.ps_c),
            (Term::Functions, functions),
            (Term::Routing, per_bit * bits as f64),
        ],
        params.sigma,
    ))
}

/// `P_d(c) + Gamma + P_r(1) * 1^T(R D)`.
pub fn dynamic_power(
    design: &DesignSpec,
    activity: &ActivityProfile,
    params: &PowerParams,
) -> Result<PowerEstimate, PowerError> {
    params.check()?;
    let pr1 = params.pr1.ok_or(PowerError::Uncalibrated)?;
    let g = gamma(design, activity)?;
    let bits = routing_bits(&design.routing, &design.costs)?;
    Ok(PowerEstimate::from_terms(
        vec![
            (Term::Interpreter, params.pd_c),
            (Term::Gamma, g.value),
            (Term::Routing, pr1 * bits as f64),
        ],
        params.sigma,
    ))
}

/// Per-bit routing power fitted to one measured design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub pr1: f64,
    /// Watts attributed to routing: `measured - P_d(c) - Gamma`.
    pub residual: f64,
    pub routing_bits: u64,
    /// Noise of `pr1`: the measurement sigma scaled by `1 / bits`.
    pub noise_std: f64,
}

impl Calibration {
    /// Parameters carrying this calibration's coefficient and noise.
    pub fn apply(&self, params: &PowerParams) -> PowerParams {
        PowerParams {
            pr1: Some(self.pr1),
            sigma: self.noise_std,
            ..params.clone()
        }
    }
}

pub fn calibrate_routing(
    measured_dynamic: f64,
    gamma_value: f64,
    routing_bits: u64,
    params: &PowerParams,
) -> Result<Calibration, PowerError> {
    params.check()?;
    if !measured_dynamic.is_finite() {
        return Err(PowerError::BadParameter("measured_dynamic"));
    }
    if !gamma_value.is_finite() {
        return Err(PowerError::BadParameter("gamma"));
    }
    if routing_bits == 0 {
        return Err(PowerError::ZeroRoutingBits);
    }
    let residual = measured_dynamic - (params.pd_c + gamma_value);
    if residual < 0.0 {
        return Err(PowerError::NegativeResidual(residual));
    }
    let bits = routing_bits as f64;
    Ok(Calibration {
        pr1: residual / bits,
        residual,
        routing_bits,
        noise_std: params.sigma / bits,
    })
}

/// Calibrates against a whole design and its measurement.
pub fn calibrate_design(
    design: &DesignSpec,
    activity: &ActivityProfile,
    measured: &MeasuredPower,
    params: &PowerParams,
) -> Result<Calibration, PowerError> {
    let g = gamma(design, activity)?;
    let bits = routing_bits(&design.routing, &design.costs)?;
    calibrate_routing(measured.dynamic_watts, g.value, bits, params)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub design: String,
    pub dynamic: PowerEstimate,
    /// Present when every function has a static power and a static routing
    /// coefficient is known.
    pub static_power: Option<PowerEstimate>,
    pub measured: Option<MeasuredPower>,
}

impl Prediction {
    pub fn abs_error(&self) -> Option<f64> {
        self.measured
            .map(|m| (self.dynamic.mean - m.dynamic_watts).abs())
    }

    /// `|predicted - measured| / measured` of the dynamic power.
    pub fn rel_error(&self) -> Option<f64> {
        self.measured
            .map(|m| (self.dynamic.mean - m.dynamic_watts).abs() / m.dynamic_watts)
    }
}

pub fn predict(
    design: &DesignSpec,
    activity: &ActivityProfile,
    params: &PowerParams,
    measured: Option<MeasuredPower>,
) -> Result<Prediction, PowerError> {
    let dynamic = dynamic_power(design, activity, params)?;
    let static_power = match static_power(design, params) {
        Ok(p) => Some(p),
        Err(PowerError::MissingStatic(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(Prediction {
        design: design.name.clone(),
        dynamic,
        static_power,
        measured,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::*;
    use std::collections::BTreeMap;

    pub(crate) fn spec(name: &str, on: f64, off: f64, states: u32) -> FunctionSpec {
        FunctionSpec {
            name: name.into(),
            inputs: 1,
            outputs: 1,
            input_bits: 8,
            output_bits: 8,
            dyn_on_watts: on,
            dyn_off_watts: off,
            static_watts: None,
            state_count: states,
            variant_of: None,
        }
    }

    /// Linear pipeline `f0 -> f1 -> ...` over 8-bit buses.
    pub(crate) fn pipeline(name: &str, fs: Vec<FunctionSpec>) -> DesignSpec {
        let storage: Vec<_> = (0..=fs.len())
            .map(|k| StorageElement::new(format!("e{k}"), 8))
            .collect();
        let instructions: Vec<_> = fs
            .iter()
            .enumerate()
            .map(|(k, f)| Instruction {
                function: f.name.clone(),
                params: vec![format!("e{k}"), format!("e{}", k + 1)],
            })
            .collect();
        let program = ProgramSpec::cyclic(instructions);
        let instances = program.instances();
        let functions: BTreeMap<_, _> = fs.into_iter().map(|f| (f.name.clone(), f)).collect();
        let (routing, costs) = derive_routing(&program, &functions, &storage, &instances).unwrap();
        DesignSpec {
            name: name.into(),
            storage,
            program,
            functions,
            instances,
            routing,
            costs,
        }
    }

    fn chaser() -> (DesignSpec, ActivityProfile) {
        let d = pipeline(
            "chaser",
            vec![
                spec("density", 6.486, 2.162, 10),
                spec("direction", 1.124, 0.924, 40),
                spec("pid", 0.712, 0.698, 48),
                spec("motors", 2.295, 1.133, 40),
            ],
        );
        let active = d.instances.iter().cloned().zip([1, 2, 42, 28]).collect();
        let a = ActivityProfile {
            period_states: 139,
            l_div: Some(138),
            active,
        };
        (d, a)
    }

    #[test]
    fn chaser_gamma() {
        let (d, a) = chaser();
        let g = gamma(&d, &a).unwrap();
        assert!((g.numerator - 721.311).abs() < 1e-9);
        assert!((g.value - 5.227).abs() < 0.001);
    }

    #[test]
    fn constant_power_gamma() {
        let d = pipeline("one", vec![spec("f", 2.0, 2.0, 5)]);
        let a = ActivityProfile {
            period_states: 5,
            l_div: None,
            active: vec![(InstanceId::new("f", 0), 5)],
        };
        assert_eq!(gamma(&d, &a).unwrap().value, 2.0);
    }

    #[test]
    fn activity_must_cover_instances() {
        let (d, mut a) = chaser();
        a.active.pop();
        assert!(matches!(
            gamma(&d, &a),
            Err(PowerError::InstanceMismatch(_))
        ));
        let (d, mut a) = chaser();
        a.active[0].1 = 100;
        assert!(gamma(&d, &a).is_err());
    }

    #[test]
    fn static_power_sums_terms() {
        assert_eq!(
            PowerEstimate::from_terms(vec![(Term::Interpreter, 0.0)], 0.0).mean,
            0.0
        );
        let mut d = pipeline("s", vec![spec("a", 1.0, 0.0, 1), spec("b", 1.0, 0.0, 1)]);
        d.functions.get_mut("a").unwrap().static_watts = Some(0.02);
        d.functions.get_mut("b").unwrap().static_watts = Some(0.03);
        d.routing = RoutingMatrix::new(vec![vec![1, 0], vec![0, 0]]);
        d.costs = CostVector::new(vec![100, 0]);
        let params = PowerParams {
            ps_c: 0.01,
            pr1: Some(0.0001),
            ..Default::default()
        };
        let p = static_power(&d, &params).unwrap();
        assert!((p.mean - 0.07).abs() < 1e-12);
        d.functions.get_mut("b").unwrap().static_watts = None;
        assert_eq!(
            static_power(&d, &params),
            Err(PowerError::MissingStatic("b".into()))
        );
    }

    #[test]
    fn calibration_examples() {
        let p = PowerParams::default();
        let c = calibrate_routing(5.895, 5.227, 288, &p).unwrap();
        assert!((c.pr1 - 0.668 / 288.0).abs() < 1e-12);
        assert_eq!(calibrate_routing(5.227, 5.227, 77, &p).unwrap().pr1, 0.0);
        assert!(matches!(
            calibrate_routing(5.895, 6.0, 288, &p),
            Err(PowerError::NegativeResidual(_))
        ));
        assert_eq!(
            calibrate_routing(5.895, 5.0, 0, &p),
            Err(PowerError::ZeroRoutingBits)
        );
    }

    #[test]
    fn noise_scales_with_bits() {
        let p = PowerParams {
            sigma: 0.1,
            ..Default::default()
        };
        let c = calibrate_routing(5.895, 5.227, 288, &p).unwrap();
        assert_eq!(c.noise_std, 0.1 / 288.0);
        assert_eq!(c.apply(&p).sigma, 0.1 / 288.0);
    }

    #[test]
    fn round_trip_on_chaser() {
        let (d, a) = chaser();
        let params = PowerParams::default();
        let m = MeasuredPower {
            dynamic_watts: 5.895,
            static_watts: 0.095,
        };
        let cal = calibrate_design(&d, &a, &m, &params).unwrap();
        let pred = predict(&d, &a, &cal.apply(&params), Some(m)).unwrap();
        assert!(pred.rel_error().unwrap() < 1e-15);
        assert!(pred.static_power.is_none());
    }

    #[test]
    fn samples_are_reproducible() {
        let e = PowerEstimate::from_terms(vec![(Term::Gamma, 5.0)], 0.1);
        assert_eq!(e.samples(5, 7), e.samples(5, 7));
        assert_ne!(e.samples(5, 7), e.samples(5, 8));
        let quiet = PowerEstimate::from_terms(vec![(Term::Gamma, 5.0)], 0.0);
        assert_eq!(quiet.samples(3, 1), vec![5.0; 3]);
    }

    #[test]
    fn uncalibrated_prediction_fails() {
        let (d, a) = chaser();
        assert_eq!(
            predict(&d, &a, &PowerParams::default(), None),
            Err(PowerError::Uncalibrated)
        );
    }
}
