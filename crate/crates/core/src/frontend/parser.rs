//! Recursive-descent parser for `.hlsw` sources. See `docs/grammar.md`.

use std::collections::HashMap;

use super::ast::*;
use super::FrontendError;

/// Width given to storage elements that are used without a `var` declaration.
pub const DEFAULT_WIDTH: u32 = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u64),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOLS: &[&str] = &[
    "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "..", "(", ")", "{", "}", ";", ",", ":", "=",
    "+", "-", "*", "&", "|", "^", "<", ">", "!", "~",
];

const KEYWORDS: &[&str] = &[
    "var", "extern", "fn", "in", "out", "states", "while", "loop", "if", "else", "for", "step",
    "call", "true", "false",
];

fn lex(src: &str) -> Result<Vec<Token>, FrontendError> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if src[i..].starts_with("//") {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start_col = col;
        if c.is_ascii_alphabetic() || c == b'_' {
            let s = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            col += i - s;
            out.push(Token {
                tok: Tok::Ident(src[s..i].to_string()),
                line,
                col: start_col,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let s = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            col += i - s;
            let v = src[s..i]
                .parse::<u64>()
                .map_err(|_| FrontendError::Syntax {
                    line,
                    col: start_col,
                    message: format!("integer literal `{}` out of range", &src[s..i]),
                })?;
            out.push(Token {
                tok: Tok::Int(v),
                line,
                col: start_col,
            });
            continue;
        }
        match SYMBOLS.iter().find(|s| src[i..].starts_with(**s)) {
            Some(sym) => {
                i += sym.len();
                col += sym.len();
                out.push(Token {
                    tok: Tok::Sym(sym),
                    line,
                    col: start_col,
                });
            }
            None => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(FrontendError::Syntax {
                    line,
                    col,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

/// Names visible inside a function body.
struct Scope {
    params: HashMap<String, ParamDir>,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    storage: Vec<StorageDecl>,
    functions: Vec<FunctionDecl>,
    scope: Option<Scope>,
}

pub fn parse(src: &str) -> Result<TaskGraph, FrontendError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
        storage: Vec::new(),
        functions: Vec::new(),
        scope: None,
    };
    let mut stmts = Vec::new();
    while p.peek() != &Tok::Eof {
        if p.at_kw("var") {
            p.var_decl()?;
        } else if p.at_kw("extern") {
            p.extern_decl()?;
        } else if p.at_kw("fn") {
            p.fn_def()?;
        } else {
            p.stmt(&mut stmts)?;
        }
    }
    if stmts.is_empty() && p.functions.is_empty() {
        return p.error("program has no statements or functions");
    }
    let root = if stmts.len() == 1 {
        stmts.pop().unwrap()
    } else {
        Task::Seq(stmts)
    };
    Ok(TaskGraph {
        storage: p.storage,
        functions: p.functions,
        root,
    })
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, FrontendError> {
        let (line, col) = self.here();
        Err(FrontendError::Syntax {
            line,
            col,
            message: message.into(),
        })
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }

    fn at_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == kw)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.at_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), FrontendError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.error(format!("expected `{s}`, found {}", self.describe()))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), FrontendError> {
        if self.at_kw(kw) {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected `{kw}`, found {}", self.describe()))
        }
    }

    fn ident(&mut self) -> Result<(String, usize, usize), FrontendError> {
        let (line, col) = self.here();
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok((s, line, col))
            }
            _ => self.error(format!("expected identifier, found {}", self.describe())),
        }
    }

    fn int(&mut self) -> Result<u64, FrontendError> {
        match *self.peek() {
            Tok::Int(v) => {
                self.bump();
                Ok(v)
            }
            _ => self.error(format!("expected integer, found {}", self.describe())),
        }
    }

    fn small_int(&mut self, what: &str) -> Result<u32, FrontendError> {
        let (line, col) = self.here();
        let v = self.int()?;
        u32::try_from(v).map_err(|_| FrontendError::Syntax {
            line,
            col,
            message: format!("{what} {v} is too large"),
        })
    }

    fn var_decl(&mut self) -> Result<(), FrontendError> {
        self.expect_kw("var")?;
        let (name, line, col) = self.ident()?;
        self.expect_sym(":")?;
        let width = match self.peek().clone() {
            Tok::Ident(t) if t.starts_with('i') && t[1..].parse::<u32>().is_ok() => {
                self.bump();
                t[1..].parse::<u32>().unwrap()
            }
            _ => {
                return self.error(format!(
                    "expected width such as `i8`, found {}",
                    self.describe()
                ))
            }
        };
        if !(1..=crate::value::MAX_WIDTH).contains(&width) {
            return Err(FrontendError::Syntax {
                line,
                col,
                message: format!("width of `{name}` must be between 1 and 64"),
            });
        }
        self.expect_sym(";")?;
        if self.storage.iter().any(|s| s.name == name) {
            return Err(FrontendError::Syntax {
                line,
                col,
                message: format!("storage element `{name}` declared twice"),
            });
        }
        if self.functions.iter().any(|f| f.name == name) {
            return Err(FrontendError::Syntax {
                line,
                col,
                message: format!("`{name}` is already a function"),
            });
        }
        self.storage.push(StorageDecl { name, width });
        Ok(())
    }

    fn params(&mut self) -> Result<Vec<Param>, FrontendError> {
        self.expect_sym("(")?;
        let mut params: Vec<Param> = Vec::new();
        if !self.at_sym(")") {
            loop {
                let dir = if self.at_kw("in") {
                    ParamDir::In
                } else if self.at_kw("out") {
                    ParamDir::Out
                } else {
                    return self
                        .error(format!("expected `in` or `out`, found {}", self.describe()));
                };
                self.bump();
                let (name, line, col) = self.ident()?;
                if params.iter().any(|p| p.name == name) {
                    return Err(FrontendError::Syntax {
                        line,
                        col,
                        message: format!("duplicate parameter `{name}`"),
                    });
                }
                params.push(Param { name, dir });
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        Ok(params)
    }

    fn declare_function(
        &mut self,
        decl: FunctionDecl,
        line: usize,
        col: usize,
    ) -> Result<(), FrontendError> {
        if self.functions.iter().any(|f| f.name == decl.name)
            || self.storage.iter().any(|s| s.name == decl.name)
        {
            return Err(FrontendError::Syntax {
                line,
                col,
                message: format!("`{}` declared twice", decl.name),
            });
        }
        self.functions.push(decl);
        Ok(())
    }

    fn extern_decl(&mut self) -> Result<(), FrontendError> {
        self.expect_kw("extern")?;
        let (name, line, col) = self.ident()?;
        let params = self.params()?;
        let states = if self.at_kw("states") {
            self.bump();
            let (l, c) = self.here();
            let n = self.small_int("state count")?;
            if n == 0 {
                return Err(FrontendError::Syntax {
                    line: l,
                    col: c,
                    message: "state count must be at least 1".into(),
                });
            }
            Some(n)
        } else {
            None
        };
        self.expect_sym(";")?;
        self.declare_function(
            FunctionDecl {
                name,
                params,
                body: FunctionBody::Extern { states },
            },
            line,
            col,
        )
    }

    fn fn_def(&mut self) -> Result<(), FrontendError> {
        self.expect_kw("fn")?;
        let (name, line, col) = self.ident()?;
        let params = self.params()?;
        self.scope = Some(Scope {
            params: params.iter().map(|p| (p.name.clone(), p.dir)).collect(),
        });
        let body = self.block();
        self.scope = None;
        self.declare_function(
            FunctionDecl {
                name,
                params,
                body: FunctionBody::Defined(body?),
            },
            line,
            col,
        )
    }

    /// Resolves a storage read or write at the current scope.
    fn use_name(
        &mut self,
        name: &str,
        write: bool,
        line: usize,
        col: usize,
    ) -> Result<(), FrontendError> {
        match &self.scope {
            Some(scope) => match scope.params.get(name) {
                None => Err(FrontendError::Unresolved {
                    line,
                    col,
                    name: name.to_string(),
                }),
                Some(ParamDir::In) if write => Err(FrontendError::Invalid(format!(
                    "{line}:{col}: cannot write input parameter `{name}`"
                ))),
                Some(_) => Ok(()),
            },
            None => {
                if self.functions.iter().any(|f| f.name == name) {
                    return Err(FrontendError::Syntax {
                        line,
                        col,
                        message: format!("`{name}` is a function, not a storage element"),
                    });
                }
                if !self.storage.iter().any(|s| s.name == name) {
                    self.storage.push(StorageDecl {
                        name: name.to_string(),
                        width: DEFAULT_WIDTH,
                    });
                }
                Ok(())
            }
        }
    }

    fn block(&mut self) -> Result<Task, FrontendError> {
        self.expect_sym("{")?;
        let mut items = Vec::new();
        while !self.at_sym("}") {
            if self.peek() == &Tok::Eof {
                return self.error("expected `}`, found end of input");
            }
            self.stmt(&mut items)?;
        }
        self.bump();
        Ok(Task::Seq(items))
    }

    fn stmt(&mut self, out: &mut Vec<Task>) -> Result<(), FrontendError> {
        if self.at_sym("{") {
            let b = self.block()?;
            out.push(b);
        } else if self.at_kw("while") {
            self.bump();
            self.expect_sym("(")?;
            let cond = self.expr()?;
            self.expect_sym(")")?;
            let body = self.block()?;
            out.push(Task::While {
                cond,
                body: Box::new(body),
            });
        } else if self.at_kw("loop") {
            self.bump();
            let body = self.block()?;
            out.push(Task::While {
                cond: Expr::Lit(1),
                body: Box::new(body),
            });
        } else if self.at_kw("if") {
            let t = self.if_stmt()?;
            out.push(t);
        } else if self.at_kw("for") {
            self.for_stmt(out)?;
        } else if self.at_kw("call") {
            self.bump();
            let (function, line, col) = self.ident()?;
            self.expect_sym("(")?;
            let mut args = Vec::new();
            if !self.at_sym(")") {
                loop {
                    args.push(self.ident()?);
                    if !self.eat_sym(",") {
                        break;
                    }
                }
            }
            self.expect_sym(")")?;
            self.expect_sym(";")?;
            let Some(decl) = self.functions.iter().find(|f| f.name == function).cloned() else {
                return Err(FrontendError::Unresolved {
                    line,
                    col,
                    name: function,
                });
            };
            if decl.params.len() != args.len() {
                return Err(FrontendError::Invalid(format!(
                    "{line}:{col}: `{function}` takes {} arguments, {} given",
                    decl.params.len(),
                    args.len()
                )));
            }
            for (p, (a, l, c)) in decl.params.iter().zip(&args) {
                self.use_name(a, p.dir == ParamDir::Out, *l, *c)?;
            }
            out.push(Task::Call {
                function,
                args: args.into_iter().map(|a| a.0).collect(),
            });
        } else if matches!(self.peek(), Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()))
            && matches!(
                self.toks.get(self.pos + 1).map(|t| &t.tok),
                Some(Tok::Sym("="))
            )
        {
            let (target, line, col) = self.ident()?;
            self.use_name(&target, true, line, col)?;
            self.expect_sym("=")?;
            let value = self.expr()?;
            self.expect_sym(";")?;
            out.push(Task::Assign { target, value });
        } else {
            let e = self.expr()?;
            self.expect_sym(";")?;
            out.push(Task::Expr(e));
        }
        Ok(())
    }

    fn if_stmt(&mut self) -> Result<Task, FrontendError> {
        self.expect_kw("if")?;
        self.expect_sym("(")?;
        let cond = self.expr()?;
        self.expect_sym(")")?;
        let then = self.block()?;
        let otherwise = if self.at_kw("else") {
            self.bump();
            if self.at_kw("if") {
                Some(Box::new(self.if_stmt()?))
            } else {
                Some(Box::new(self.block()?))
            }
        } else {
            None
        };
        Ok(Task::If {
            cond,
            then: Box::new(then),
            otherwise,
        })
    }

    /// `for i in a..b [step s] { body }` desugars to
    /// `i = a; while (i < b) { body; i = i + s; }`.
    fn for_stmt(&mut self, out: &mut Vec<Task>) -> Result<(), FrontendError> {
        self.expect_kw("for")?;
        let (var, line, col) = self.ident()?;
        self.use_name(&var, true, line, col)?;
        self.expect_kw("in")?;
        let lo = self.int()? as i64;
        self.expect_sym("..")?;
        let hi = self.int()? as i64;
        let step = if self.at_kw("step") {
            self.bump();
            let (l, c) = self.here();
            let s = self.int()?;
            if s == 0 {
                return Err(FrontendError::Syntax {
                    line: l,
                    col: c,
                    message: "step must be at least 1".into(),
                });
            }
            s as i64
        } else {
            1
        };
        let Task::Seq(mut body) = self.block()? else {
            unreachable!("block always yields a sequence")
        };
        body.push(Task::Assign {
            target: var.clone(),
            value: Expr::bin(BinOp::Add, Expr::Var(var.clone()), Expr::Lit(step)),
        });
        out.push(Task::Assign {
            target: var.clone(),
            value: Expr::Lit(lo),
        });
        out.push(Task::While {
            cond: Expr::bin(BinOp::Lt, Expr::Var(var), Expr::Lit(hi)),
            body: Box::new(Task::Seq(body)),
        });
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, FrontendError> {
        self.binary(1)
    }

    fn peek_binop(&self) -> Option<BinOp> {
        use BinOp::*;
        let Tok::Sym(s) = self.peek() else {
            return None;
        };
        Some(match *s {
            "||" => LogOr,
            "&&" => LogAnd,
            "|" => Or,
            "^" => Xor,
            "&" => And,
            "==" => Eq,
            "!=" => Ne,
            "<" => Lt,
            "<=" => Le,
            ">" => Gt,
            ">=" => Ge,
            "<<" => Shl,
            ">>" => Shr,
            "+" => Add,
            "-" => Sub,
            "*" => Mul,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, FrontendError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek_binop() {
            let p = op.precedence();
            if p < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(p + 1)?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, FrontendError> {
        for (sym, op) in [("-", UnOp::Neg), ("~", UnOp::Not), ("!", UnOp::LogNot)] {
            if self.eat_sym(sym) {
                return Ok(Expr::un(op, self.unary()?));
            }
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, FrontendError> {
        let (line, col) = self.here();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Lit(v as i64))
            }
            Tok::Ident(s) if s == "true" => {
                self.bump();
                Ok(Expr::Lit(1))
            }
            Tok::Ident(s) if s == "false" => {
                self.bump();
                Ok(Expr::Lit(0))
            }
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                self.use_name(&s, false, line, col)?;
                Ok(Expr::Var(s))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            _ => self.error(format!("expected expression, found {}", self.describe())),
        }
    }
}
