//! Task IR: the evolving-algebra view of a source program.
//!
//! Statements are [`Task`] nodes. A `While` holds its test expression and
//! its true-task; sequencing (`NextTask`) is the order inside a `Seq`.
//! Expressions are trees that may share subtrees after common-subexpression
//! elimination.

use std::collections::HashSet;
use std::fmt::{self, Write as _};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
    LogNot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    And,
    Or,
    Xor,
    Shl,
    Shr,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    LogAnd,
    LogOr,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        use BinOp::*;
        match self {
            Add => "+",
            Sub => "-",
            Mul => "*",
            And => "&",
            Or => "|",
            Xor => "^",
            Shl => "<<",
            Shr => ">>",
            Lt => "<",
            Le => "<=",
            Gt => ">",
            Ge => ">=",
            Eq => "==",
            Ne => "!=",
            LogAnd => "&&",
            LogOr => "||",
        }
    }

    /// Binding strength; higher binds tighter. All binary operators are
    /// left-associative.
    pub fn precedence(self) -> u8 {
        use BinOp::*;
        match self {
            LogOr => 1,
            LogAnd => 2,
            Or => 3,
            Xor => 4,
            And => 5,
            Eq | Ne => 6,
            Lt | Le | Gt | Ge => 7,
            Shl | Shr => 8,
            Add | Sub => 9,
            Mul => 10,
        }
    }

    pub fn apply(self, a: i64, b: i64) -> i64 {
        use BinOp::*;
        match self {
            Add => a.wrapping_add(b),
            Sub => a.wrapping_sub(b),
            Mul => a.wrapping_mul(b),
            And => a & b,
            Or => a | b,
            Xor => a ^ b,
            Shl => {
                if (0..64).contains(&b) {
                    a.wrapping_shl(b as u32)
                } else {
                    0
                }
            }
            Shr => {
                if (0..64).contains(&b) {
                    a >> b
                } else if a < 0 {
                    -1
                } else {
                    0
                }
            }
            Lt => (a < b) as i64,
            Le => (a <= b) as i64,
            Gt => (a > b) as i64,
            Ge => (a >= b) as i64,
            Eq => (a == b) as i64,
            Ne => (a != b) as i64,
            LogAnd => (a != 0 && b != 0) as i64,
            LogOr => (a != 0 || b != 0) as i64,
        }
    }
}

impl UnOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnOp::Neg => "-",
            UnOp::Not => "~",
            UnOp::LogNot => "!",
        }
    }

    pub fn apply(self, a: i64) -> i64 {
        match self {
            UnOp::Neg => a.wrapping_neg(),
            UnOp::Not => !a,
            UnOp::LogNot => (a == 0) as i64,
        }
    }
}

/// Stateless computation over storage reads and literals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Lit(i64),
    Var(String),
    Unary(UnOp, Arc<Expr>),
    Binary(BinOp, Arc<Expr>, Arc<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Arc::new(a), Arc::new(b))
    }

    pub fn un(op: UnOp, a: Expr) -> Expr {
        Expr::Unary(op, Arc::new(a))
    }

    /// Evaluates with wrapping 64-bit arithmetic. Results are truncated to a
    /// storage width only when assigned.
    pub fn eval(&self, read: &mut impl FnMut(&str) -> i64) -> i64 {
        match self {
            Expr::Lit(v) => *v,
            Expr::Var(n) => read(n),
            Expr::Unary(op, a) => op.apply(a.eval(read)),
            Expr::Binary(op, a, b) => {
                let x = a.eval(read);
                let y = b.eval(read);
                op.apply(x, y)
            }
        }
    }

    /// Number of distinct operator nodes. Shared subtrees count once.
    pub fn op_count(&self) -> usize {
        fn walk(e: &Expr, seen: &mut HashSet<*const Expr>) -> usize {
            match e {
                Expr::Lit(_) | Expr::Var(_) => 0,
                Expr::Unary(_, a) => {
                    1 + if seen.insert(Arc::as_ptr(a)) {
                        walk(a, seen)
                    } else {
                        0
                    }
                }
                Expr::Binary(_, a, b) => {
                    let mut n = 1;
                    for c in [a, b] {
                        if seen.insert(Arc::as_ptr(c)) {
                            n += walk(c, seen);
                        }
                    }
                    n
                }
            }
        }
        walk(self, &mut HashSet::new())
    }

    /// Number of operator nodes with every shared subtree expanded.
    pub fn tree_op_count(&self) -> usize {
        match self {
            Expr::Lit(_) | Expr::Var(_) => 0,
            Expr::Unary(_, a) => 1 + a.tree_op_count(),
            Expr::Binary(_, a, b) => 1 + a.tree_op_count() + b.tree_op_count(),
        }
    }

    pub fn for_each_var<'a>(&'a self, f: &mut impl FnMut(&'a str)) {
        match self {
            Expr::Lit(_) => {}
            Expr::Var(n) => f(n),
            Expr::Unary(_, a) => a.for_each_var(f),
            Expr::Binary(_, a, b) => {
                a.for_each_var(f);
                b.for_each_var(f);
            }
        }
    }

    fn write(&self, out: &mut String) {
        match self {
            Expr::Lit(v) if *v < 0 => {
                let _ = write!(out, "(-{})", v.unsigned_abs());
            }
            Expr::Lit(v) => {
                let _ = write!(out, "{v}");
            }
            Expr::Var(n) => out.push_str(n),
            Expr::Unary(op, a) => {
                out.push_str(op.symbol());
                if matches!(**a, Expr::Binary(..)) {
                    out.push('(');
                    a.write(out);
                    out.push(')');
                } else {
                    a.write(out);
                }
            }
            Expr::Binary(op, a, b) => {
                let p = op.precedence();
                let paren_l = matches!(&**a, Expr::Binary(o, ..) if o.precedence() < p);
                let paren_r = matches!(&**b, Expr::Binary(o, ..) if o.precedence() <= p);
                wrap_if(out, paren_l, |o| a.write(o));
                let _ = write!(out, " {} ", op.symbol());
                wrap_if(out, paren_r, |o| b.write(o));
            }
        }
    }
}

fn wrap_if(out: &mut String, paren: bool, f: impl FnOnce(&mut String)) {
    if paren {
        out.push('(');
    }
    f(out);
    if paren {
        out.push(')');
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.write(&mut s);
        f.write_str(&s)
    }
}

/// A statement node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Task {
    Seq(Vec<Task>),
    While {
        cond: Expr,
        body: Box<Task>,
    },
    If {
        cond: Expr,
        then: Box<Task>,
        otherwise: Option<Box<Task>>,
    },
    Assign {
        target: String,
        value: Expr,
    },
    Call {
        function: String,
        args: Vec<String>,
    },
    Expr(Expr),
}

impl Task {
    /// `while (1)`: the interpreter's non-terminating main loop.
    pub fn is_forever(&self) -> bool {
        matches!(
            self,
            Task::While {
                cond: Expr::Lit(1),
                ..
            }
        )
    }

    /// Statement nesting depth: simple statements are 1, compound ones add 1
    /// to their deepest child. A block holding a single statement is as
    /// deep as that statement.
    pub fn depth(&self) -> usize {
        match self {
            Task::Seq(items) if items.len() == 1 => items[0].depth(),
            Task::Seq(items) => 1 + items.iter().map(Task::depth).max().unwrap_or(0),
            Task::While { body, .. } => 1 + body.depth(),
            Task::If {
                then, otherwise, ..
            } => {
                1 + then
                    .depth()
                    .max(otherwise.as_ref().map_or(0, |o| o.depth()))
            }
            Task::Assign { .. } | Task::Call { .. } | Task::Expr(_) => 1,
        }
    }

    /// Visits every expression in the subtree, in preorder.
    pub fn for_each_expr<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        match self {
            Task::Seq(items) => items.iter().for_each(|t| t.for_each_expr(f)),
            Task::While { cond, body } => {
                f(cond);
                body.for_each_expr(f);
            }
            Task::If {
                cond,
                then,
                otherwise,
            } => {
                f(cond);
                then.for_each_expr(f);
                if let Some(o) = otherwise {
                    o.for_each_expr(f);
                }
            }
            Task::Assign { value, .. } => f(value),
            Task::Call { .. } => {}
            Task::Expr(e) => f(e),
        }
    }

    /// Rewrites every expression in the subtree.
    pub fn map_exprs(&self, f: &mut impl FnMut(&Expr) -> Expr) -> Task {
        match self {
            Task::Seq(items) => Task::Seq(items.iter().map(|t| t.map_exprs(f)).collect()),
            Task::While { cond, body } => Task::While {
                cond: f(cond),
                body: Box::new(body.map_exprs(f)),
            },
            Task::If {
                cond,
                then,
                otherwise,
            } => Task::If {
                cond: f(cond),
                then: Box::new(then.map_exprs(f)),
                otherwise: otherwise.as_ref().map(|o| Box::new(o.map_exprs(f))),
            },
            Task::Assign { target, value } => Task::Assign {
                target: target.clone(),
                value: f(value),
            },
            Task::Call { .. } => self.clone(),
            Task::Expr(e) => Task::Expr(f(e)),
        }
    }

    fn write(&self, out: &mut String, indent: usize) {
        let pad = "    ".repeat(indent);
        match self {
            Task::Seq(items) => {
                out.push_str(&pad);
                out.push_str("{\n");
                for t in items {
                    t.write(out, indent + 1);
                }
                out.push_str(&pad);
                out.push_str("}\n");
            }
            Task::While { cond, body } => {
                out.push_str(&pad);
                if self.is_forever() {
                    out.push_str("loop ");
                } else {
                    let _ = write!(out, "while ({cond}) ");
                }
                write_block(body, out, indent);
            }
            Task::If {
                cond,
                then,
                otherwise,
            } => {
                out.push_str(&pad);
                write_if(cond, then, otherwise.as_deref(), out, indent);
            }
            Task::Assign { target, value } => {
                let _ = writeln!(out, "{pad}{target} = {value};");
            }
            Task::Call { function, args } => {
                let _ = writeln!(out, "{pad}call {function}({});", args.join(", "));
            }
            Task::Expr(e) => {
                let _ = writeln!(out, "{pad}{e};");
            }
        }
    }
}

fn write_if(cond: &Expr, then: &Task, otherwise: Option<&Task>, out: &mut String, indent: usize) {
    let _ = write!(out, "if ({cond}) ");
    match otherwise {
        None => write_block(then, out, indent),
        Some(other) => {
            write_block_open(then, out, indent);
            match other {
                Task::If {
                    cond,
                    then,
                    otherwise,
                } => {
                    out.push_str(" else ");
                    write_if(cond, then, otherwise.as_deref(), out, indent);
                }
                _ => {
                    out.push_str(" else ");
                    write_block(other, out, indent);
                }
            }
        }
    }
}

/// Writes `{ ... }` for a block body, followed by a newline.
fn write_block(body: &Task, out: &mut String, indent: usize) {
    write_block_open(body, out, indent);
    out.push('\n');
}

fn write_block_open(body: &Task, out: &mut String, indent: usize) {
    out.push_str("{\n");
    match body {
        Task::Seq(items) => items.iter().for_each(|t| t.write(out, indent + 1)),
        other => other.write(out, indent + 1),
    }
    out.push_str(&"    ".repeat(indent));
    out.push('}');
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamDir {
    In,
    Out,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Param {
    pub name: String,
    pub dir: ParamDir,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FunctionBody {
    /// Library function known only by its declared state count.
    Extern { states: Option<u32> },
    /// Toolkit-authored function with a body in the source language.
    Defined(Task),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FunctionDecl {
    pub name: String,
    pub params: Vec<Param>,
    pub body: FunctionBody,
}

impl FunctionDecl {
    pub fn inputs(&self) -> usize {
        self.params.iter().filter(|p| p.dir == ParamDir::In).count()
    }

    /// State count used when this function is a library stub.
    pub fn stub_states(&self) -> u32 {
        match self.body {
            FunctionBody::Extern { states } => states.unwrap_or(1),
            FunctionBody::Defined(_) => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StorageDecl {
    pub name: String,
    pub width: u32,
}

/// A parsed program: storage, functions and the top-level task.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TaskGraph {
    pub storage: Vec<StorageDecl>,
    pub functions: Vec<FunctionDecl>,
    pub root: Task,
}

impl TaskGraph {
    pub fn function(&self, name: &str) -> Option<&FunctionDecl> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn storage_width(&self, name: &str) -> Option<u32> {
        self.storage
            .iter()
            .find(|s| s.name == name)
            .map(|s| s.width)
    }

    /// Replaces the declared state count of an extern function.
    pub fn set_stub_states(&mut self, name: &str, states: u32) -> bool {
        match self.functions.iter_mut().find(|f| f.name == name) {
            Some(FunctionDecl {
                body: FunctionBody::Extern { states: s },
                ..
            }) => {
                *s = Some(states);
                true
            }
            _ => false,
        }
    }

    /// Source text that parses back to this graph.
    pub fn unparse(&self) -> String {
        let mut out = String::new();
        for s in &self.storage {
            let _ = writeln!(out, "var {}: i{};", s.name, s.width);
        }
        for f in &self.functions {
            let params = f
                .params
                .iter()
                .map(|p| {
                    let d = match p.dir {
                        ParamDir::In => "in",
                        ParamDir::Out => "out",
                    };
                    format!("{d} {}", p.name)
                })
                .collect::<Vec<_>>()
                .join(", ");
            match &f.body {
                FunctionBody::Extern { states } => {
                    let _ = write!(out, "extern {}({params})", f.name);
                    if let Some(n) = states {
                        let _ = write!(out, " states {n}");
                    }
                    out.push_str(";\n");
                }
                FunctionBody::Defined(body) => {
                    let _ = write!(out, "fn {}({params}) ", f.name);
                    write_block(body, &mut out, 0);
                }
            }
        }
        match &self.root {
            Task::Seq(items) if items.len() != 1 => {
                items.iter().for_each(|t| t.write(&mut out, 0));
            }
            other => other.write(&mut out, 0),
        }
        out
    }
}

impl fmt::Display for TaskGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.unparse())
    }
}
