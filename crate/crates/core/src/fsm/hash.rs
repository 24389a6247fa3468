use std::collections::HashMap;
use std::fmt;

use sha2::{Digest as _, Sha256};

use super::{Construct, State, StateMachine};
use crate::frontend::Expr;

/// SHA-256 of a machine's canonical serialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest(pub [u8; 32]);

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// Structural hash. Storage names are replaced by their order of first
/// appearance, so alpha-renamed programs hash equal.
pub fn canonical_hash(m: &StateMachine) -> Digest {
    let mut w = Writer::default();
    w.machine(m);
    Digest(Sha256::digest(&w.out).into())
}

/// The canonical serialization the digest is taken over.
pub fn canonical_form(m: &StateMachine) -> String {
    let mut w = Writer::default();
    w.machine(m);
    String::from_utf8(w.out).expect("ascii serialization")
}

#[derive(Default)]
struct Writer {
    out: Vec<u8>,
    names: HashMap<String, usize>,
}

impl Writer {
    fn put(&mut self, s: &str) {
        self.out.extend_from_slice(s.as_bytes());
    }

    fn name(&mut self, n: &str) {
        let next = self.names.len();
        let k = *self.names.entry(n.to_string()).or_insert(next);
        self.put(&format!("v{k} "));
    }

    fn machine(&mut self, m: &StateMachine) {
        match &m.construct {
            Construct::Function(f) => self.put(&format!("(fn {} {f} ", f.len())),
            c => self.put(&format!("({c} ")),
        }
        self.put(&format!("[{}] ", m.states.len()));
        for s in &m.states {
            self.state(s);
        }
        for ((from, input), to) in &m.delta {
            self.put(&format!("{from}{}{to} ", input.name()));
        }
        self.put(") ");
    }

    fn state(&mut self, s: &State) {
        match s {
            State::Idle => self.put("I "),
            State::Test(e) => {
                self.put("T ");
                self.expr(e);
            }
            State::Assign { target, value } => {
                self.put("A ");
                self.name(target);
                self.expr(value);
            }
            State::Eval(e) => {
                self.put("E ");
                self.expr(e);
            }
            State::Stub {
                function,
                args,
                states,
            } => {
                self.put(&format!(
                    "S {} {function} {states} {} ",
                    function.len(),
                    args.len()
                ));
                for a in args {
                    self.name(a);
                }
            }
            State::Sub(m) => {
                self.put("M ");
                self.machine(m);
            }
            State::Call {
                function,
                args,
                params,
                callee,
            } => {
                self.put(&format!("C {} {function} {} ", function.len(), args.len()));
                for a in args {
                    self.name(a);
                }
                // parameters live in their own scope
                let outer = std::mem::take(&mut self.names);
                for p in params {
                    self.name(p);
                }
                self.machine(callee);
                self.names = outer;
            }
        }
    }

    fn expr(&mut self, e: &Expr) {
        match e {
            Expr::Lit(v) => self.put(&format!("#{v} ")),
            Expr::Var(n) => self.name(n),
            Expr::Unary(op, a) => {
                self.put(&format!("u{} ", op.symbol()));
                self.expr(a);
            }
            Expr::Binary(op, a, b) => {
                self.put(&format!("b{} ", op.symbol()));
                self.expr(a);
                self.expr(b);
            }
        }
    }
}
