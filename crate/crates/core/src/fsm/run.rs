use std::collections::HashMap;

use thiserror::Error;

use super::{Construct, Input, State, StateMachine};
use crate::frontend::Expr;
use crate::value::Valuation;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FsmError {
    #[error("step budget of {0} exhausted")]
    FuelExhausted(u64),
    #[error("library function `{0}` has no executable body")]
    Opaque(String),
    #[error("storage element `{0}` is not in the valuation")]
    UnknownStorage(String),
    #[error("no transition from state {state} on `{input}`")]
    MissingTransition { state: usize, input: &'static str },
}

/// Result of executing a machine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FsmRun {
    pub env: Valuation,
    /// Path (state indices from the outermost machine down) of every atomic
    /// state visited, in order.
    pub trace: Vec<Vec<usize>>,
    /// Fuel consumed: atomic visits plus one per main-loop restart.
    pub steps: u64,
}

/// Runs `m` from its idle state until it returns there.
pub fn run_fsm(m: &StateMachine, env: &Valuation, fuel: u64) -> Result<FsmRun, FsmError> {
    let mut r = Runner::new(env, fuel);
    r.machine(m, &HashMap::new(), &mut Vec::new(), None)?;
    Ok(r.finish())
}

/// Runs a `loop` machine for exactly `periods` passes over its body.
pub fn run_fsm_periods(
    m: &StateMachine,
    env: &Valuation,
    periods: u64,
    fuel: u64,
) -> Result<FsmRun, FsmError> {
    let mut r = Runner::new(env, fuel);
    r.machine(m, &HashMap::new(), &mut Vec::new(), Some(periods))?;
    Ok(r.finish())
}

/// Runs a function machine with its parameters bound to storage `args`.
pub fn run_function(
    callee: &StateMachine,
    params: &[String],
    args: &[String],
    env: &Valuation,
    fuel: u64,
) -> Result<FsmRun, FsmError> {
    let binding = params.iter().cloned().zip(args.iter().cloned()).collect();
    let mut r = Runner::new(env, fuel);
    r.machine(callee, &binding, &mut Vec::new(), None)?;
    Ok(r.finish())
}

type Binding = HashMap<String, String>;

struct Runner {
    env: Valuation,
    trace: Vec<Vec<usize>>,
    steps: u64,
    fuel: u64,
}

fn resolve<'a>(b: &'a Binding, n: &'a str) -> &'a str {
    b.get(n).map(String::as_str).unwrap_or(n)
}

impl Runner {
    fn new(env: &Valuation, fuel: u64) -> Self {
        Runner {
            env: env.clone(),
            trace: Vec::new(),
            steps: 0,
            fuel,
        }
    }

    fn finish(self) -> FsmRun {
        FsmRun {
            env: self.env,
            trace: self.trace,
            steps: self.steps,
        }
    }

    fn tick(&mut self) -> Result<(), FsmError> {
        if self.steps >= self.fuel {
            return Err(FsmError::FuelExhausted(self.fuel));
        }
        self.steps += 1;
        Ok(())
    }

    fn value(&self, e: &Expr, b: &Binding) -> Result<i64, FsmError> {
        let mut missing = None;
        let v = e.eval(&mut |n| {
            let name = resolve(b, n);
            self.env.get(name).unwrap_or_else(|| {
                missing = Some(name.to_string());
                0
            })
        });
        missing.map_or(Ok(v), |n| Err(FsmError::UnknownStorage(n)))
    }

    fn machine(
        &mut self,
        m: &StateMachine,
        b: &Binding,
        path: &mut Vec<usize>,
        periods: Option<u64>,
    ) -> Result<(), FsmError> {
        if m.construct == Construct::Atomic {
            self.state(&m.states[0], b, path, 0)?;
            return Ok(());
        }
        let forever = m.construct == Construct::Loop;
        let mut done_periods = 0u64;
        loop {
            if forever {
                if periods == Some(done_periods) {
                    return Ok(());
                }
                self.tick()?;
            }
            let mut cur = self.step(m, 0, Input::Start)?;
            let mut last = Input::Start;
            while cur != 0 {
                last = self.state(&m.states[cur], b, path, cur)?;
                cur = self.step(m, cur, last)?;
            }
            // a while body finishing with `done` hands control back to the
            // idle state, which re-issues `start` for the next test
            if m.construct == Construct::While && last == Input::Done {
                continue;
            }
            if !forever {
                return Ok(());
            }
            done_periods += 1;
        }
    }

    fn step(&self, m: &StateMachine, state: usize, input: Input) -> Result<usize, FsmError> {
        m.next(state, input).ok_or(FsmError::MissingTransition {
            state,
            input: input.name(),
        })
    }

    /// Executes one state of the current machine and returns the input it
    /// produces for its parent.
    fn state(
        &mut self,
        s: &State,
        b: &Binding,
        path: &mut Vec<usize>,
        idx: usize,
    ) -> Result<Input, FsmError> {
        path.push(idx);
        let out = self.state_inner(s, b, path);
        path.pop();
        out
    }

    fn state_inner(
        &mut self,
        s: &State,
        b: &Binding,
        path: &mut Vec<usize>,
    ) -> Result<Input, FsmError> {
        match s {
            State::Idle => Ok(Input::Done),
            State::Test(e) => {
                self.tick()?;
                self.trace.push(path.clone());
                Ok(if self.value(e, b)? != 0 {
                    Input::True
                } else {
                    Input::False
                })
            }
            State::Assign { target, value } => {
                self.tick()?;
                self.trace.push(path.clone());
                let v = self.value(value, b)?;
                let name = resolve(b, target);
                if !self.env.set(name, v) {
                    return Err(FsmError::UnknownStorage(name.to_string()));
                }
                Ok(Input::Done)
            }
            State::Eval(e) => {
                self.tick()?;
                self.trace.push(path.clone());
                self.value(e, b)?;
                Ok(Input::Done)
            }
            State::Stub { function, .. } => Err(FsmError::Opaque(function.clone())),
            State::Sub(m) => {
                self.machine(m, b, path, None)?;
                Ok(Input::Done)
            }
            State::Call {
                args,
                params,
                callee,
                ..
            } => {
                let inner: Binding = params
                    .iter()
                    .zip(args)
                    .map(|(p, a)| (p.clone(), resolve(b, a).to_string()))
                    .collect();
                self.machine(callee, &inner, path, None)?;
                Ok(Input::Done)
            }
        }
    }
}
