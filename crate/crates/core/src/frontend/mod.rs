//! Source language, task IR and source-level optimization passes.
//!
//! Grammar summary (full EBNF in `docs/grammar.md`):
//!
//! ```text
//! var x: i8;
//! extern density(in img, out d) states 10;
//! fn inc(in a, out b) { b = a + 1; }
//! loop { call density(img, d); }
//! while (x < 10) { x = x + 1; }
//! for i in 0..8 step 2 { y = y + i; }
//! ```

pub mod ast;
pub mod eval;
pub mod parser;
pub mod passes;

use std::collections::HashSet;

use thiserror::Error;

pub use ast::{
    BinOp, Expr, FunctionBody, FunctionDecl, Param, ParamDir, StorageDecl, Task, TaskGraph, UnOp,
};
pub use eval::{evaluate, initial_valuation, EvalError, Evaluation};
pub use parser::{parse, DEFAULT_WIDTH};
pub use passes::{arithmetic_reduce, loop_perforate, reduce_expr, trip_count, LoopId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("{line}:{col}: syntax error: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("{line}:{col}: unresolved identifier `{name}`")]
    Unresolved {
        line: usize,
        col: usize,
        name: String,
    },
    #[error("invalid task graph: {0}")]
    Invalid(String),
    #[error("{0}")]
    Pass(String),
}

impl FrontendError {
    /// Parse-time failures, as opposed to semantic ones.
    pub fn is_syntax(&self) -> bool {
        matches!(self, FrontendError::Syntax { .. })
    }
}

/// Checks that every identifier resolves, calls match arity and callees
/// precede their callers.
pub fn validate(g: &TaskGraph) -> Result<(), FrontendError> {
    let mut storage = HashSet::new();
    for s in &g.storage {
        if !storage.insert(s.name.as_str()) {
            return Err(FrontendError::Invalid(format!(
                "storage `{}` declared twice",
                s.name
            )));
        }
        if !(1..=crate::value::MAX_WIDTH).contains(&s.width) {
            return Err(FrontendError::Invalid(format!(
                "storage `{}` has unsupported width {}",
                s.name, s.width
            )));
        }
    }
    for (k, f) in g.functions.iter().enumerate() {
        if g.functions[..k].iter().any(|o| o.name == f.name) {
            return Err(FrontendError::Invalid(format!(
                "function `{}` declared twice",
                f.name
            )));
        }
        if let FunctionBody::Defined(body) = &f.body {
            let scope: HashSet<&str> = f.params.iter().map(|p| p.name.as_str()).collect();
            let inputs: HashSet<&str> = f
                .params
                .iter()
                .filter(|p| p.dir == ParamDir::In)
                .map(|p| p.name.as_str())
                .collect();
            check_task(g, body, &scope, &inputs, k)?;
        }
    }
    check_task(g, &g.root, &storage, &HashSet::new(), g.functions.len())
}

fn check_task(
    g: &TaskGraph,
    t: &Task,
    scope: &HashSet<&str>,
    read_only: &HashSet<&str>,
    visible_fns: usize,
) -> Result<(), FrontendError> {
    let unresolved = |n: &str| FrontendError::Invalid(format!("unresolved identifier `{n}`"));
    let expr_ok = |e: &Expr| {
        let mut bad = None;
        e.for_each_var(&mut |v| {
            if bad.is_none() && !scope.contains(v) {
                bad = Some(v.to_string());
            }
        });
        bad.map_or(Ok(()), |v| Err(unresolved(&v)))
    };
    match t {
        Task::Seq(items) => {
            for i in items {
                check_task(g, i, scope, read_only, visible_fns)?;
            }
            Ok(())
        }
        Task::While { cond, body } => {
            expr_ok(cond)?;
            check_task(g, body, scope, read_only, visible_fns)
        }
        Task::If {
            cond,
            then,
            otherwise,
        } => {
            expr_ok(cond)?;
            check_task(g, then, scope, read_only, visible_fns)?;
            match otherwise {
                Some(o) => check_task(g, o, scope, read_only, visible_fns),
                None => Ok(()),
            }
        }
        Task::Assign { target, value } => {
            if !scope.contains(target.as_str()) {
                return Err(unresolved(target));
            }
            if read_only.contains(target.as_str()) {
                return Err(FrontendError::Invalid(format!(
                    "cannot assign to input `{target}`"
                )));
            }
            expr_ok(value)
        }
        Task::Expr(e) => expr_ok(e),
        Task::Call { function, args } => {
            let Some(pos) = g.functions[..visible_fns]
                .iter()
                .position(|f| &f.name == function)
            else {
                return Err(FrontendError::Invalid(format!(
                    "unresolved function `{function}`"
                )));
            };
            let decl = &g.functions[pos];
            if decl.params.len() != args.len() {
                return Err(FrontendError::Invalid(format!(
                    "`{function}` takes {} arguments, {} given",
                    decl.params.len(),
                    args.len()
                )));
            }
            for (p, a) in decl.params.iter().zip(args) {
                if !scope.contains(a.as_str()) {
                    return Err(unresolved(a));
                }
                if p.dir == ParamDir::Out && read_only.contains(a.as_str()) {
                    return Err(FrontendError::Invalid(format!(
                        "input `{a}` passed as output of `{function}`"
                    )));
                }
            }
            Ok(())
        }
    }
}
