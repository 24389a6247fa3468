//! Direct (source-level) evaluation of a task graph.
//!
//! This is the reference semantics the state-machine lowering is checked
//! against. One step is charged per atomic action: each assignment,
//! expression statement and condition test.

use std::collections::HashMap;

use thiserror::Error;

use super::ast::*;
use crate::value::Valuation;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("step budget of {0} exhausted")]
    FuelExhausted(u64),
    #[error("function `{0}` has no body to evaluate")]
    Opaque(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("storage element `{0}` is not in the valuation")]
    UnknownStorage(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation {
    pub env: Valuation,
    pub steps: u64,
}

/// Runs `g` from `env` until it completes or `fuel` steps are used.
pub fn evaluate(g: &TaskGraph, env: &Valuation, fuel: u64) -> Result<Evaluation, EvalError> {
    let mut ev = Evaluator {
        graph: g,
        env: env.clone(),
        steps: 0,
        fuel,
    };
    ev.run(&g.root, &HashMap::new())?;
    Ok(Evaluation {
        env: ev.env,
        steps: ev.steps,
    })
}

/// Runs the body of function `name` with its parameters bound to `args`.
pub fn evaluate_call(
    g: &TaskGraph,
    name: &str,
    args: &[String],
    env: &Valuation,
    fuel: u64,
) -> Result<Evaluation, EvalError> {
    let mut ev = Evaluator {
        graph: g,
        env: env.clone(),
        steps: 0,
        fuel,
    };
    ev.call(name, args, &HashMap::new())?;
    Ok(Evaluation {
        env: ev.env,
        steps: ev.steps,
    })
}

struct Evaluator<'g> {
    graph: &'g TaskGraph,
    env: Valuation,
    steps: u64,
    fuel: u64,
}

type Binding = HashMap<String, String>;

fn resolve<'a>(binding: &'a Binding, name: &'a str) -> &'a str {
    binding.get(name).map(String::as_str).unwrap_or(name)
}

impl Evaluator<'_> {
    fn tick(&mut self) -> Result<(), EvalError> {
        if self.steps >= self.fuel {
            return Err(EvalError::FuelExhausted(self.fuel));
        }
        self.steps += 1;
        Ok(())
    }

    fn value(&self, e: &Expr, binding: &Binding) -> Result<i64, EvalError> {
        let mut missing = None;
        let v = e.eval(&mut |n| {
            let name = resolve(binding, n);
            self.env.get(name).unwrap_or_else(|| {
                missing = Some(name.to_string());
                0
            })
        });
        match missing {
            Some(n) => Err(EvalError::UnknownStorage(n)),
            None => Ok(v),
        }
    }

    fn run(&mut self, t: &Task, binding: &Binding) -> Result<(), EvalError> {
        match t {
            Task::Seq(items) => {
                for i in items {
                    self.run(i, binding)?;
                }
            }
            Task::While { cond, body } => loop {
                self.tick()?;
                if self.value(cond, binding)? == 0 {
                    break;
                }
                self.run(body, binding)?;
            },
            Task::If {
                cond,
                then,
                otherwise,
            } => {
                self.tick()?;
                if self.value(cond, binding)? != 0 {
                    self.run(then, binding)?;
                } else if let Some(o) = otherwise {
                    self.run(o, binding)?;
                }
            }
            Task::Assign { target, value } => {
                self.tick()?;
                let v = self.value(value, binding)?;
                let name = resolve(binding, target);
                if !self.env.set(name, v) {
                    return Err(EvalError::UnknownStorage(name.to_string()));
                }
            }
            Task::Expr(e) => {
                self.tick()?;
                self.value(e, binding)?;
            }
            Task::Call { function, args } => self.call(function, args, binding)?,
        }
        Ok(())
    }

    fn call(
        &mut self,
        function: &str,
        args: &[String],
        binding: &Binding,
    ) -> Result<(), EvalError> {
        let decl = self
            .graph
            .function(function)
            .ok_or_else(|| EvalError::UnknownFunction(function.to_string()))?;
        let FunctionBody::Defined(body) = &decl.body else {
            return Err(EvalError::Opaque(function.to_string()));
        };
        let inner: Binding = decl
            .params
            .iter()
            .zip(args)
            .map(|(p, a)| (p.name.clone(), resolve(binding, a).to_string()))
            .collect();
        self.run(body, &inner)
    }
}

/// Zero-initialised valuation with every declared storage element.
pub fn initial_valuation(g: &TaskGraph) -> Valuation {
    let mut v = Valuation::new();
    for s in &g.storage {
        v.declare(s.name.clone(), s.width);
    }
    v
}
