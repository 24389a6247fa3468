//! Hierarchical state machines lowered from the task IR.
//!
//! Every machine has an idle state `s0`. Inputs are `start`, `true`,
//! `false` and `done`:
//!
//! * `while (c) b`: `s0 -start-> s1`, `s1 -true-> s2`, `s1 -false-> s0`,
//!   `s2 -done-> s0`, with `s1` testing `c` and `s2` the lowered body;
//!   reaching `s0` through `done` starts the next test.
//! * `loop b`: the statements of `b` are chained after `s0` and the last one
//!   returns to `s0`, which immediately restarts.
//! * `if (c) t else e`: `s1` tests, `true` goes to `t`, `false` to `e` (or
//!   back to `s0`), both finish with `done -> s0`.
//! * blocks chain their statements with `done`.
//!
//! Simple statements are single atomic states. Compound children become
//! sub-machines.

mod hash;
mod run;

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

pub use hash::{canonical_form, canonical_hash, Digest};
pub use run::{run_fsm, run_fsm_periods, run_function, FsmError, FsmRun};

use crate::frontend::{Expr, FunctionBody, Task, TaskGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Input {
    Start,
    True,
    False,
    Done,
}

impl Input {
    pub fn name(self) -> &'static str {
        match self {
            Input::Start => "start",
            Input::True => "true",
            Input::False => "false",
            Input::Done => "done",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Construct {
    /// A lone simple statement; the machine is its single state.
    Atomic,
    Seq,
    While,
    Loop,
    If,
    Function(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum State {
    Idle,
    Test(Expr),
    Assign {
        target: String,
        value: Expr,
    },
    Eval(Expr),
    /// Library function known only by its state count.
    Stub {
        function: String,
        args: Vec<String>,
        states: u32,
    },
    Sub(Box<StateMachine>),
    /// Toolkit-authored function; `params` are bound to `args` by reference.
    Call {
        function: String,
        args: Vec<String>,
        params: Vec<String>,
        callee: Box<StateMachine>,
    },
}

impl State {
    fn count(&self) -> u64 {
        match self {
            State::Idle | State::Test(_) | State::Assign { .. } | State::Eval(_) => 1,
            State::Stub { states, .. } => u64::from(*states),
            State::Sub(m) => m.state_count(),
            State::Call { callee, .. } => callee.state_count(),
        }
    }

    fn label(&self) -> String {
        match self {
            State::Idle => "idle".into(),
            State::Test(e) => format!("test {e}"),
            State::Assign { target, value } => format!("assign {target} = {value}"),
            State::Eval(e) => format!("eval {e}"),
            State::Stub {
                function,
                args,
                states,
            } => format!("stub {function}({}) [{states} states]", args.join(", ")),
            State::Sub(m) => format!("machine {}", m.construct),
            State::Call { function, args, .. } => format!("call {function}({})", args.join(", ")),
        }
    }
}

impl fmt::Display for Construct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Construct::Atomic => f.write_str("atomic"),
            Construct::Seq => f.write_str("seq"),
            Construct::While => f.write_str("while"),
            Construct::Loop => f.write_str("loop"),
            Construct::If => f.write_str("if"),
            Construct::Function(n) => write!(f, "fn {n}"),
        }
    }
}

/// `(S, Sigma, delta, s0)` with `s0` at index 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateMachine {
    pub construct: Construct,
    pub states: Vec<State>,
    pub delta: BTreeMap<(usize, Input), usize>,
}

impl StateMachine {
    pub fn next(&self, state: usize, input: Input) -> Option<usize> {
        self.delta.get(&(state, input)).copied()
    }

    /// Flattened number of states, with stubs contributing their declared
    /// counts and every machine contributing its idle state.
    pub fn state_count(&self) -> u64 {
        self.states.iter().map(State::count).sum()
    }

    /// Sorted `state -> input -> state` listing with state labels.
    pub fn dump(&self) -> String {
        let mut states = Vec::new();
        let mut edges = Vec::new();
        self.collect_dump("", &mut states, &mut edges);
        states.sort();
        edges.sort();
        let mut out = String::new();
        let _ = writeln!(out, "# {} states: {}", self.construct, self.state_count());
        for l in states.iter().chain(&edges) {
            out.push_str(l);
            out.push('\n');
        }
        out
    }

    fn collect_dump(&self, prefix: &str, states: &mut Vec<String>, edges: &mut Vec<String>) {
        for (i, s) in self.states.iter().enumerate() {
            let name = format!("{prefix}s{i}");
            states.push(format!("{name}: {}", s.label()));
            match s {
                State::Sub(m) => m.collect_dump(&format!("{name}."), states, edges),
                State::Call { callee, .. } => {
                    callee.collect_dump(&format!("{name}."), states, edges)
                }
                _ => {}
            }
        }
        for ((from, input), to) in &self.delta {
            edges.push(format!(
                "{prefix}s{from} -> {} -> {prefix}s{to}",
                input.name()
            ));
        }
    }
}

/// Lowers the main task of `g`.
pub fn translate(g: &TaskGraph) -> StateMachine {
    Translator { graph: g }.task(&g.root)
}

/// Lowers the body of function `name`, if it has one.
pub fn translate_function(g: &TaskGraph, name: &str) -> Option<StateMachine> {
    Translator { graph: g }.function(name)
}

struct Translator<'g> {
    graph: &'g TaskGraph,
}

fn chain(construct: Construct, states: Vec<State>) -> StateMachine {
    let mut delta = BTreeMap::new();
    let n = states.len();
    let mut all = vec![State::Idle];
    all.extend(states);
    delta.insert((0, Input::Start), if n == 0 { 0 } else { 1 });
    for k in 1..=n {
        delta.insert((k, Input::Done), if k == n { 0 } else { k + 1 });
    }
    StateMachine {
        construct,
        states: all,
        delta,
    }
}

impl Translator<'_> {
    fn task(&self, t: &Task) -> StateMachine {
        match t {
            Task::Seq(items) => chain(
                Construct::Seq,
                items.iter().map(|i| self.state(i)).collect(),
            ),
            Task::While { body, .. } if t.is_forever() => {
                let states = match &**body {
                    Task::Seq(items) => items.iter().map(|i| self.state(i)).collect(),
                    other => vec![self.state(other)],
                };
                chain(Construct::Loop, states)
            }
            Task::While { cond, body } => {
                let delta = BTreeMap::from([
                    ((0, Input::Start), 1),
                    ((1, Input::True), 2),
                    ((1, Input::False), 0),
                    ((2, Input::Done), 0),
                ]);
                StateMachine {
                    construct: Construct::While,
                    states: vec![State::Idle, State::Test(cond.clone()), self.state(body)],
                    delta,
                }
            }
            Task::If {
                cond,
                then,
                otherwise,
            } => {
                let mut states = vec![State::Idle, State::Test(cond.clone()), self.state(then)];
                let mut delta = BTreeMap::from([
                    ((0, Input::Start), 1),
                    ((1, Input::True), 2),
                    ((2, Input::Done), 0),
                ]);
                match otherwise {
                    Some(o) => {
                        states.push(self.state(o));
                        delta.insert((1, Input::False), 3);
                        delta.insert((3, Input::Done), 0);
                    }
                    None => {
                        delta.insert((1, Input::False), 0);
                    }
                }
                StateMachine {
                    construct: Construct::If,
                    states,
                    delta,
                }
            }
            Task::Assign { .. } | Task::Expr(_) | Task::Call { .. } => StateMachine {
                construct: Construct::Atomic,
                states: vec![self.state(t)],
                delta: BTreeMap::new(),
            },
        }
    }

    /// The state a statement occupies inside its parent machine.
    fn state(&self, t: &Task) -> State {
        match t {
            Task::Assign { target, value } => State::Assign {
                target: target.clone(),
                value: value.clone(),
            },
            Task::Expr(e) => State::Eval(e.clone()),
            Task::Call { function, args } => {
                let decl = self.graph.function(function);
                match self.function(function) {
                    Some(callee) => State::Call {
                        function: function.clone(),
                        args: args.clone(),
                        params: decl
                            .map(|d| d.params.iter().map(|p| p.name.clone()).collect())
                            .unwrap_or_default(),
                        callee: Box::new(callee),
                    },
                    None => State::Stub {
                        function: function.clone(),
                        args: args.clone(),
                        states: decl.map_or(1, |d| d.stub_states()),
                    },
                }
            }
            _ => State::Sub(Box::new(self.task(t))),
        }
    }

    fn function(&self, name: &str) -> Option<StateMachine> {
        let FunctionBody::Defined(body) = &self.graph.function(name)?.body else {
            return None;
        };
        let states = match body {
            Task::Seq(items) => items.iter().map(|i| self.state(i)).collect(),
            other => vec![self.state(other)],
        };
        Some(chain(Construct::Function(name.to_string()), states))
    }
}
