//! Source-level power optimizations: loop perforation and arithmetic
//! reduction.

use std::collections::HashMap;
use std::sync::Arc;

use super::ast::*;
use super::FrontendError;
use crate::value;

/// Preorder index of a `while` loop: the main program first, then the
/// bodies of defined functions in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LoopId(pub usize);

/// Multiplies the step of a canonical counted loop by `factor`.
///
/// The loop must be preceded, in the same block, by `i = <init>;`, test
/// `i < <bound>` and end its body with `i = i + <step>;` where init, bound
/// and step are literals and step is positive.
pub fn loop_perforate(
    g: &TaskGraph,
    loop_id: LoopId,
    factor: u32,
) -> Result<TaskGraph, FrontendError> {
    if factor < 2 {
        return Err(FrontendError::Pass(format!(
            "perforation factor must be at least 2, got {factor}"
        )));
    }
    let mut out = g.clone();
    let mut counter = 0usize;
    let mut outcome: Option<Result<(), String>> = None;
    let widths: HashMap<String, u32> = g
        .storage
        .iter()
        .map(|s| (s.name.clone(), s.width))
        .collect();

    perforate_in(
        &mut out.root,
        loop_id.0,
        factor,
        &mut counter,
        &mut outcome,
        &|n| widths.get(n).copied(),
    );
    for f in &mut out.functions {
        if outcome.is_some() {
            break;
        }
        let params: Vec<String> = f.params.iter().map(|p| p.name.clone()).collect();
        if let FunctionBody::Defined(body) = &mut f.body {
            // parameters take the width of whatever they are bound to, so
            // only 64-bit overflow is checked inside function bodies
            perforate_in(body, loop_id.0, factor, &mut counter, &mut outcome, &|n| {
                params.iter().any(|p| p == n).then_some(value::MAX_WIDTH)
            });
        }
    }
    match outcome {
        None => Err(FrontendError::Pass(format!("loop {} not found", loop_id.0))),
        Some(Err(msg)) => Err(FrontendError::Pass(msg)),
        Some(Ok(())) => {
            super::validate(&out)?;
            Ok(out)
        }
    }
}

struct Induction {
    var: String,
    init: i64,
    bound: i64,
    step: i64,
}

fn perforate_in(
    t: &mut Task,
    target: usize,
    factor: u32,
    counter: &mut usize,
    outcome: &mut Option<Result<(), String>>,
    width: &dyn Fn(&str) -> Option<u32>,
) {
    if outcome.is_some() {
        return;
    }
    match t {
        Task::Seq(items) => {
            for k in 0..items.len() {
                if outcome.is_some() {
                    return;
                }
                if let Task::While { .. } = items[k] {
                    if *counter == target {
                        *counter += 1;
                        let (before, rest) = items.split_at_mut(k);
                        *outcome = Some(rewrite_loop(before.last(), &mut rest[0], factor, width));
                        return;
                    }
                    *counter += 1;
                    if let Task::While { body, .. } = &mut items[k] {
                        perforate_in(body, target, factor, counter, outcome, width);
                    }
                } else {
                    perforate_in(&mut items[k], target, factor, counter, outcome, width);
                }
            }
        }
        Task::While { body, .. } => {
            if *counter == target {
                *counter += 1;
                *outcome = Some(Err(format!(
                    "loop {target} has no initialisation statement before it"
                )));
                return;
            }
            *counter += 1;
            perforate_in(body, target, factor, counter, outcome, width);
        }
        Task::If {
            then, otherwise, ..
        } => {
            perforate_in(then, target, factor, counter, outcome, width);
            if let Some(o) = otherwise {
                perforate_in(o, target, factor, counter, outcome, width);
            }
        }
        Task::Assign { .. } | Task::Call { .. } | Task::Expr(_) => {}
    }
}

/// A literal, possibly negated.
fn literal(e: &Expr) -> Option<i64> {
    match e {
        Expr::Lit(v) => Some(*v),
        Expr::Unary(UnOp::Neg, inner) => match &**inner {
            Expr::Lit(v) => Some(v.wrapping_neg()),
            _ => None,
        },
        _ => None,
    }
}

fn recognise(prev: Option<&Task>, w: &Task) -> Result<Induction, String> {
    let Task::While { cond, body } = w else {
        unreachable!()
    };
    let Expr::Binary(BinOp::Lt, lhs, rhs) = cond else {
        return Err(format!(
            "loop condition `{cond}` is not of the form `i < N`"
        ));
    };
    let (Expr::Var(var), Some(bound)) = (&**lhs, literal(rhs)) else {
        return Err(format!(
            "loop condition `{cond}` is not of the form `i < N`"
        ));
    };
    let init = match prev {
        Some(Task::Assign { target, value }) if target == var && literal(value).is_some() => {
            literal(value).unwrap_or_default()
        }
        _ => {
            return Err(format!(
                "no `{var} = <literal>;` initialisation immediately before the loop"
            ))
        }
    };
    let Task::Seq(items) = &**body else {
        return Err("loop body is not a block".into());
    };
    let step = match items.last() {
        Some(Task::Assign {
            target,
            value: Expr::Binary(BinOp::Add, a, b),
        }) if target == var => match (&**a, &**b) {
            (Expr::Var(v), Expr::Lit(s)) if v == var && *s > 0 => *s,
            _ => {
                return Err(format!(
                    "last statement does not increment `{var}` by a positive literal"
                ))
            }
        },
        _ => {
            return Err(format!(
                "last statement of the loop body is not `{var} = {var} + <step>;`"
            ))
        }
    };
    let writes_elsewhere = items[..items.len() - 1].iter().any(|t| writes(t, var));
    if writes_elsewhere {
        return Err(format!("`{var}` is modified inside the loop body"));
    }
    Ok(Induction {
        var: var.clone(),
        init,
        bound,
        step,
    })
}

fn writes(t: &Task, var: &str) -> bool {
    match t {
        Task::Seq(items) => items.iter().any(|i| writes(i, var)),
        Task::While { body, .. } => writes(body, var),
        Task::If {
            then, otherwise, ..
        } => writes(then, var) || otherwise.as_ref().is_some_and(|o| writes(o, var)),
        Task::Assign { target, .. } => target == var,
        // conservatively treat any call as a potential write of its arguments
        Task::Call { args, .. } => args.iter().any(|a| a == var),
        Task::Expr(_) => false,
    }
}

fn rewrite_loop(
    prev: Option<&Task>,
    w: &mut Task,
    factor: u32,
    width: &dyn Fn(&str) -> Option<u32>,
) -> Result<(), String> {
    let ind = recognise(prev, w)?;
    let step = ind
        .step
        .checked_mul(i64::from(factor))
        .ok_or("perforated step overflows")?;
    let bits =
        width(&ind.var).ok_or_else(|| format!("unknown induction variable `{}`", ind.var))?;
    let (lo, hi) = value::range(bits);
    // the last value tested must stay representable, otherwise the counter
    // wraps and the loop no longer terminates
    if ind.init < lo || ind.init > hi {
        return Err(format!(
            "initial value {} does not fit in {bits} bits",
            ind.init
        ));
    }
    if ind.init < ind.bound {
        let last = ind.init + (ind.bound - ind.init - 1) / step * step;
        if last.checked_add(step).is_none_or(|v| v > hi) {
            return Err(format!(
                "perforated counter `{}` would overflow its {bits}-bit width",
                ind.var
            ));
        }
    }
    let Task::While { body, .. } = w else {
        unreachable!()
    };
    let Task::Seq(items) = &mut **body else {
        unreachable!()
    };
    let last = items.last_mut().unwrap();
    *last = Task::Assign {
        target: ind.var.clone(),
        value: Expr::bin(BinOp::Add, Expr::Var(ind.var), Expr::Lit(step)),
    };
    Ok(())
}

/// Number of body iterations of a canonical counted loop.
pub fn trip_count(init: i64, bound: i64, step: i64) -> u64 {
    if init >= bound {
        0
    } else {
        ((bound - init) as u64).div_ceil(step as u64)
    }
}

/// Constant folding, algebraic identities, strength reduction and
/// common-subexpression elimination on every expression.
pub fn arithmetic_reduce(g: &TaskGraph) -> TaskGraph {
    let mut out = g.clone();
    out.root = g.root.map_exprs(&mut reduce_expr);
    for f in &mut out.functions {
        if let FunctionBody::Defined(body) = &mut f.body {
            *body = body.map_exprs(&mut reduce_expr);
        }
    }
    out
}

/// Reduces a single expression tree; equal subtrees end up shared.
pub fn reduce_expr(e: &Expr) -> Expr {
    let mut interner = HashMap::new();
    let r = simplify(e, &mut interner);
    Arc::unwrap_or_clone(r)
}

type Interner = HashMap<Expr, Arc<Expr>>;

fn intern(e: Expr, interner: &mut Interner) -> Arc<Expr> {
    if let Some(a) = interner.get(&e) {
        return a.clone();
    }
    let a = Arc::new(e.clone());
    interner.insert(e, a.clone());
    a
}

fn simplify(e: &Expr, interner: &mut Interner) -> Arc<Expr> {
    use BinOp::*;
    let out = match e {
        Expr::Lit(_) | Expr::Var(_) => e.clone(),
        Expr::Unary(op, a) => {
            let a = simplify(a, interner);
            match &*a {
                Expr::Lit(v) => Expr::Lit(op.apply(*v)),
                _ => Expr::Unary(*op, a),
            }
        }
        Expr::Binary(op, a, b) => {
            let a = simplify(a, interner);
            let b = simplify(b, interner);
            match (op, &*a, &*b) {
                (_, Expr::Lit(x), Expr::Lit(y)) => Expr::Lit(op.apply(*x, *y)),
                (Add | Or | Xor, _, Expr::Lit(0)) | (Sub | Shl | Shr, _, Expr::Lit(0)) => {
                    return a;
                }
                (Add | Or | Xor, Expr::Lit(0), _) => return b,
                (Mul, _, Expr::Lit(1)) => return a,
                (Mul, Expr::Lit(1), _) => return b,
                (Mul | And, _, Expr::Lit(0)) | (Mul | And, Expr::Lit(0), _) => Expr::Lit(0),
                (Mul, _, Expr::Lit(2)) => {
                    Expr::Binary(Shl, a.clone(), intern(Expr::Lit(1), interner))
                }
                (Mul, Expr::Lit(2), _) => {
                    Expr::Binary(Shl, b.clone(), intern(Expr::Lit(1), interner))
                }
                _ => Expr::Binary(*op, a, b),
            }
        }
    };
    intern(out, interner)
}
