use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::design::{DesignSpec, InstanceId};
use crate::frontend::TaskGraph;
use crate::fsm::{run_function, translate_function, StateMachine};
use crate::value::Valuation;

/// New storage values and the states the invocation took.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invocation {
    pub env: Valuation,
    pub states: u32,
}

/// `f : <tau(E), p> -> tau'(E)`.
pub trait FunctionImpl: Send + Sync {
    fn name(&self) -> &str;
    fn arity(&self) -> usize;
    fn invoke(&self, env: &Valuation, params: &[String]) -> Result<Invocation, String>;
}

/// Leaves storage untouched and charges a fixed number of states.
#[derive(Debug, Clone)]
pub struct StubImpl {
    pub name: String,
    pub arity: usize,
    pub states: u32,
}

impl FunctionImpl for StubImpl {
    fn name(&self) -> &str {
        &self.name
    }

    fn arity(&self) -> usize {
        self.arity
    }

    fn invoke(&self, env: &Valuation, _params: &[String]) -> Result<Invocation, String> {
        Ok(Invocation {
            env: env.clone(),
            states: self.states,
        })
    }
}

type RawFn = dyn Fn(&Valuation, &[String]) -> Result<Invocation, String> + Send + Sync;

/// A function implemented in Rust.
#[derive(Clone)]
pub struct NativeImpl {
    name: String,
    arity: usize,
    f: Arc<RawFn>,
}

impl NativeImpl {
    /// Pure function of the input values: the first `inputs` parameters are
    /// read, the next `outputs` written.
    pub fn new(
        name: &str,
        inputs: usize,
        outputs: usize,
        states: u32,
        f: impl Fn(&[i64]) -> Vec<i64> + Send + Sync + 'static,
    ) -> Self {
        let raw = move |env: &Valuation, params: &[String]| {
            let args: Vec<i64> = params[..inputs]
                .iter()
                .map(|p| env.get(p).ok_or_else(|| format!("unknown element `{p}`")))
                .collect::<Result<_, _>>()?;
            let results = f(&args);
            if results.len() != outputs {
                return Err(format!(
                    "produced {} outputs, expected {outputs}",
                    results.len()
                ));
            }
            let mut env = env.clone();
            for (p, v) in params[inputs..].iter().zip(results) {
                env.set(p, v);
            }
            Ok(Invocation { env, states })
        };
        NativeImpl::raw(name, inputs + outputs, raw)
    }

    /// Full access to the valuation; the engine still rejects writes
    /// outside the parameters.
    pub fn raw(
        name: &str,
        arity: usize,
        f: impl Fn(&Valuation, &[String]) -> Result<Invocation, String> + Send + Sync + 'static,
    ) -> Self {
        NativeImpl {
            name: name.to_string(),
            arity,
            f: Arc::new(f),
        }
    }
}

impl fmt::Debug for NativeImpl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NativeImpl({})", self.name)
    }
}

impl FunctionImpl for NativeImpl {
    fn name(&self) -> &str {
        &self.name
    }

    fn arity(&self) -> usize {
        self.arity
    }

    fn invoke(&self, env: &Valuation, params: &[String]) -> Result<Invocation, String> {
        if params.len() != self.arity {
            return Err(format!(
                "expected {} parameters, got {}",
                self.arity,
                params.len()
            ));
        }
        (self.f)(env, params)
    }
}

/// A function written in the source language, executed through its state
/// machine. The state cost is the number of atomic states visited.
#[derive(Debug, Clone)]
pub struct BodyImpl {
    name: String,
    params: Vec<String>,
    machine: StateMachine,
    pub fuel: u64,
}

impl BodyImpl {
    pub const DEFAULT_FUEL: u64 = 1_000_000;

    pub fn from_graph(g: &TaskGraph, name: &str) -> Option<Self> {
        let machine = translate_function(g, name)?;
        let params = g
            .function(name)?
            .params
            .iter()
            .map(|p| p.name.clone())
            .collect();
        Some(BodyImpl {
            name: name.to_string(),
            params,
            machine,
            fuel: Self::DEFAULT_FUEL,
        })
    }
}

impl FunctionImpl for BodyImpl {
    fn name(&self) -> &str {
        &self.name
    }

    fn arity(&self) -> usize {
        self.params.len()
    }

    fn invoke(&self, env: &Valuation, params: &[String]) -> Result<Invocation, String> {
        if params.len() != self.params.len() {
            return Err(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            ));
        }
        let run = run_function(&self.machine, &self.params, params, env, self.fuel)
            .map_err(|e| e.to_string())?;
        Ok(Invocation {
            env: run.env,
            states: u32::try_from(run.trace.len().max(1)).unwrap_or(u32::MAX),
        })
    }
}

/// Implementations looked up by instance first, then by function name.
#[derive(Clone, Default)]
pub struct ImplRegistry {
    by_instance: BTreeMap<InstanceId, Arc<dyn FunctionImpl>>,
    by_name: BTreeMap<String, Arc<dyn FunctionImpl>>,
}

impl fmt::Debug for ImplRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImplRegistry")
            .field("instances", &self.by_instance.keys().collect::<Vec<_>>())
            .field("functions", &self.by_name.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl ImplRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stubs charging each function's declared state count.
    pub fn stubs(design: &DesignSpec) -> Self {
        let mut r = Self::new();
        for f in design.functions.values() {
            r.insert_function(StubImpl {
                name: f.name.clone(),
                arity: f.arity(),
                states: f.state_count,
            });
        }
        r
    }

    /// Bodies from `g` where defined, stubs for everything else.
    pub fn from_graph(design: &DesignSpec, g: &TaskGraph) -> Self {
        let mut r = Self::stubs(design);
        for f in &g.functions {
            if let Some(b) = BodyImpl::from_graph(g, &f.name) {
                r.insert_function(b);
            }
        }
        r
    }

    pub fn insert_function(&mut self, imp: impl FunctionImpl + 'static) {
        self.by_name.insert(imp.name().to_string(), Arc::new(imp));
    }

    pub fn insert_instance(&mut self, id: InstanceId, imp: impl FunctionImpl + 'static) {
        self.by_instance.insert(id, Arc::new(imp));
    }

    pub fn resolve(&self, id: &InstanceId) -> Option<&dyn FunctionImpl> {
        self.by_instance
            .get(id)
            .or_else(|| self.by_name.get(&id.function))
            .map(|a| a.as_ref())
    }
}
