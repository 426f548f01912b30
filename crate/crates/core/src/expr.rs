//! Utility expressions: a small arithmetic language over price variables.
//!
//! Grammar (whitespace insensitive):
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := "-" unary | power
//! power   := atom ("^" unary)?
//! atom    := number | "p[" name "]" | ident | func "(" expr ("," expr)* ")"
//!          | "(" expr ")" | "piecewise" "{" (guard ":" expr ";")* "else" ":" expr ";"? "}"
//! guard   := expr ("<=" | "<" | ">=" | ">") expr      (both sides affine)
//! func    := exp | sqrt | min | max
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown price symbol `{0}`")]
    UnknownSymbol(String),
    #[error("piecewise guard is not affine in prices")]
    NonAffineGuard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cmp {
    Le,
    Lt,
    Ge,
    Gt,
}

impl Cmp {
    fn holds(self, a: f64, b: f64) -> bool {
        match self {
            Cmp::Le => a <= b,
            Cmp::Lt => a < b,
            Cmp::Ge => a >= b,
            Cmp::Gt => a > b,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Cmp::Le => "<=",
            Cmp::Lt => "<",
            Cmp::Ge => ">=",
            Cmp::Gt => ">",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Guard {
    pub lhs: Expr,
    pub op: Cmp,
    pub rhs: Expr,
}

/// Expression tree. `Var(i)` reads entry `i` of the slice passed to [`Expr::eval`].
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    /// `constant + Σ coef·var`, used for quasi-linear utilities.
    Affine { constant: f64, terms: Vec<(usize, f64)> },
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Exp(Box<Expr>),
    Sqrt(Box<Expr>),
    Min(Vec<Expr>),
    Max(Vec<Expr>),
    Piecewise { arms: Vec<(Guard, Expr)>, otherwise: Box<Expr> },
}

impl Expr {
    pub fn eval(&self, vars: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => vars[*i],
            Expr::Affine { constant, terms } => terms.iter().fold(*constant, |acc, (i, c)| acc + c * vars[*i]),
            Expr::Neg(a) => -a.eval(vars),
            Expr::Add(a, b) => a.eval(vars) + b.eval(vars),
            Expr::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Expr::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Expr::Div(a, b) => a.eval(vars) / b.eval(vars),
            Expr::Pow(a, b) => {
                let base = a.eval(vars);
                let e = b.eval(vars);
                if e.fract() == 0.0 && e.abs() < 64.0 {
                    base.powi(e as i32)
                } else {
                    base.powf(e)
                }
            }
            Expr::Exp(a) => a.eval(vars).exp(),
            Expr::Sqrt(a) => a.eval(vars).sqrt(),
            Expr::Min(xs) => xs.iter().map(|x| x.eval(vars)).fold(f64::INFINITY, f64::min),
            Expr::Max(xs) => xs.iter().map(|x| x.eval(vars)).fold(f64::NEG_INFINITY, f64::max),
            Expr::Piecewise { arms, otherwise } => {
                for (g, e) in arms {
                    if g.op.holds(g.lhs.eval(vars), g.rhs.eval(vars)) {
                        return e.eval(vars);
                    }
                }
                otherwise.eval(vars)
            }
        }
    }

    /// Indices of all variables referenced, as a bitmask.
    pub fn vars_mask(&self) -> u64 {
        let mut mask = 0u64;
        self.visit(&mut |e| match e {
            Expr::Var(i) => mask |= 1 << i,
            Expr::Affine { terms, .. } => terms.iter().for_each(|(i, _)| mask |= 1 << i),
            _ => {}
        });
        mask
    }

    fn visit(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::Affine { .. } => {}
            Expr::Neg(a) | Expr::Exp(a) | Expr::Sqrt(a) => a.visit(f),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::Min(xs) | Expr::Max(xs) => xs.iter().for_each(|x| x.visit(f)),
            Expr::Piecewise { arms, otherwise } => {
                for (g, e) in arms {
                    g.lhs.visit(f);
                    g.rhs.visit(f);
                    e.visit(f);
                }
                otherwise.visit(f);
            }
        }
    }

    /// Replaces every occurrence of `Var(var)` by `with`.
    pub fn replace_var(&self, var: usize, with: &Expr) -> Expr {
        let r = |e: &Expr| Box::new(e.replace_var(var, with));
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(i) if *i == var => with.clone(),
            Expr::Var(i) => Expr::Var(*i),
            Expr::Affine { constant, terms } => {
                if terms.iter().all(|(i, _)| *i != var) {
                    return self.clone();
                }
                let rest: Vec<(usize, f64)> = terms.iter().copied().filter(|(i, _)| *i != var).collect();
                let coef: f64 = terms.iter().filter(|(i, _)| *i == var).map(|(_, c)| c).sum();
                if let Expr::Const(v) = with {
                    return Expr::Affine { constant: constant + coef * v, terms: rest };
                }
                Expr::Add(
                    Box::new(Expr::Affine { constant: *constant, terms: rest }),
                    Box::new(Expr::Mul(Box::new(Expr::Const(coef)), Box::new(with.clone()))),
                )
            }
            Expr::Neg(a) => Expr::Neg(r(a)),
            Expr::Add(a, b) => Expr::Add(r(a), r(b)),
            Expr::Sub(a, b) => Expr::Sub(r(a), r(b)),
            Expr::Mul(a, b) => Expr::Mul(r(a), r(b)),
            Expr::Div(a, b) => Expr::Div(r(a), r(b)),
            Expr::Pow(a, b) => Expr::Pow(r(a), r(b)),
            Expr::Exp(a) => Expr::Exp(r(a)),
            Expr::Sqrt(a) => Expr::Sqrt(r(a)),
            Expr::Min(xs) => Expr::Min(xs.iter().map(|x| x.replace_var(var, with)).collect()),
            Expr::Max(xs) => Expr::Max(xs.iter().map(|x| x.replace_var(var, with)).collect()),
            Expr::Piecewise { arms, otherwise } => Expr::Piecewise {
                arms: arms
                    .iter()
                    .map(|(g, e)| {
                        (
                            Guard { lhs: g.lhs.replace_var(var, with), op: g.op, rhs: g.rhs.replace_var(var, with) },
                            e.replace_var(var, with),
                        )
                    })
                    .collect(),
                otherwise: r(otherwise),
            },
        }
    }

    /// Renames variables through `map`.
    pub fn remap_vars(&self, map: &dyn Fn(usize) -> usize) -> Expr {
        let mut out = self.clone();
        out.remap_in_place(map);
        out
    }

    fn remap_in_place(&mut self, map: &dyn Fn(usize) -> usize) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(i) => *i = map(*i),
            Expr::Affine { terms, .. } => terms.iter_mut().for_each(|(i, _)| *i = map(*i)),
            Expr::Neg(a) | Expr::Exp(a) | Expr::Sqrt(a) => a.remap_in_place(map),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.remap_in_place(map);
                b.remap_in_place(map);
            }
            Expr::Min(xs) | Expr::Max(xs) => xs.iter_mut().for_each(|x| x.remap_in_place(map)),
            Expr::Piecewise { arms, otherwise } => {
                for (g, e) in arms {
                    g.lhs.remap_in_place(map);
                    g.rhs.remap_in_place(map);
                    e.remap_in_place(map);
                }
                otherwise.remap_in_place(map);
            }
        }
    }

    pub fn add(self, other: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(other))
    }

    pub fn sub(self, other: Expr) -> Expr {
        Expr::Sub(Box::new(self), Box::new(other))
    }

    /// Polynomial degree in the variables, `None` when not polynomial of low degree.
    fn degree(&self) -> Option<u32> {
        match self {
            Expr::Const(_) => Some(0),
            Expr::Var(_) => Some(1),
            Expr::Affine { terms, .. } => Some(if terms.is_empty() { 0 } else { 1 }),
            Expr::Neg(a) => a.degree(),
            Expr::Add(a, b) | Expr::Sub(a, b) => Some(a.degree()?.max(b.degree()?)),
            Expr::Mul(a, b) => Some(a.degree()? + b.degree()?),
            Expr::Div(a, b) => (b.degree()? == 0).then_some(a.degree()?),
            Expr::Pow(a, b) => (a.degree()? == 0 && b.degree()? == 0).then_some(0),
            Expr::Exp(a) | Expr::Sqrt(a) => (a.degree()? == 0).then_some(0),
            Expr::Min(xs) | Expr::Max(xs) => {
                for x in xs {
                    if x.degree()? != 0 {
                        return None;
                    }
                }
                Some(0)
            }
            Expr::Piecewise { .. } => (self.vars_mask() == 0).then_some(0),
        }
    }

    /// Renders the expression in the input grammar, naming variables through `name`.
    pub fn render(&self, name: &dyn Fn(usize) -> String) -> String {
        let mut s = String::new();
        self.write(&mut s, name);
        s
    }

    fn write(&self, s: &mut String, name: &dyn Fn(usize) -> String) {
        let bin = |s: &mut String, a: &Expr, op: &str, b: &Expr| {
            s.push('(');
            a.write(s, name);
            s.push_str(op);
            b.write(s, name);
            s.push(')');
        };
        match self {
            Expr::Const(c) => write_number(s, *c),
            Expr::Var(i) => s.push_str(&name(*i)),
            Expr::Affine { constant, terms } => {
                s.push('(');
                write_number(s, *constant);
                for (i, c) in terms {
                    if *c == 1.0 {
                        s.push_str(" + ");
                    } else if *c == -1.0 {
                        s.push_str(" - ");
                    } else {
                        s.push_str(" + ");
                        write_number(s, *c);
                        s.push('*');
                    }
                    s.push_str(&name(*i));
                }
                s.push(')');
            }
            Expr::Neg(a) => {
                s.push_str("(-");
                a.write(s, name);
                s.push(')');
            }
            Expr::Add(a, b) => bin(s, a, " + ", b),
            Expr::Sub(a, b) => bin(s, a, " - ", b),
            Expr::Mul(a, b) => bin(s, a, " * ", b),
            Expr::Div(a, b) => bin(s, a, " / ", b),
            Expr::Pow(a, b) => bin(s, a, "^", b),
            Expr::Exp(a) | Expr::Sqrt(a) => {
                s.push_str(if matches!(self, Expr::Exp(_)) { "exp(" } else { "sqrt(" });
                a.write(s, name);
                s.push(')');
            }
            Expr::Min(xs) | Expr::Max(xs) => {
                s.push_str(if matches!(self, Expr::Min(_)) { "min(" } else { "max(" });
                for (k, x) in xs.iter().enumerate() {
                    if k > 0 {
                        s.push_str(", ");
                    }
                    x.write(s, name);
                }
                s.push(')');
            }
            Expr::Piecewise { arms, otherwise } => {
                s.push_str("piecewise{ ");
                for (g, e) in arms {
                    g.lhs.write(s, name);
                    s.push(' ');
                    s.push_str(g.op.symbol());
                    s.push(' ');
                    g.rhs.write(s, name);
                    s.push_str(" : ");
                    e.write(s, name);
                    s.push_str("; ");
                }
                s.push_str("else : ");
                otherwise.write(s, name);
                s.push_str(" }");
            }
        }
    }
}

fn write_number(s: &mut String, c: f64) {
    if c < 0.0 {
        s.push_str(&format!("(-{:?})", -c));
    } else {
        s.push_str(&format!("{c:?}"));
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(&|i| format!("x{i}")))
    }
}

/// Parses `text`, resolving every `p[name]` or bare identifier through `resolve`.
pub fn parse(text: &str, resolve: &dyn Fn(&str) -> Option<usize>) -> Result<Expr, ExprError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, resolve };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    resolve: &'a dyn Fn(&str) -> Option<usize>,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> ExprError {
        ExprError::Syntax { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(tok.as_bytes()) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &str) -> Result<(), ExprError> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.err(&format!("expected `{tok}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.peek() == Some(b'+') {
            self.pos += 1;
            return self.unary();
        }
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            return Ok(Expr::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                let name = self.ident();
                if name == "p" && self.peek() == Some(b'[') {
                    self.pos += 1;
                    let s = self.pos;
                    while self.pos < self.src.len() && self.src[self.pos] != b']' {
                        self.pos += 1;
                    }
                    if self.pos >= self.src.len() {
                        return Err(self.err("unterminated `p[`"));
                    }
                    let sym = String::from_utf8_lossy(&self.src[s..self.pos]).trim().to_string();
                    self.pos += 1;
                    return (self.resolve)(&sym).map(Expr::Var).ok_or(ExprError::UnknownSymbol(sym));
                }
                match name.as_str() {
                    "exp" | "sqrt" => {
                        self.expect("(")?;
                        let a = self.expr()?;
                        self.expect(")")?;
                        Ok(if name == "exp" { Expr::Exp(Box::new(a)) } else { Expr::Sqrt(Box::new(a)) })
                    }
                    "min" | "max" => {
                        self.expect("(")?;
                        let mut xs = vec![self.expr()?];
                        while self.eat(",") {
                            xs.push(self.expr()?);
                        }
                        self.expect(")")?;
                        Ok(if name == "min" { Expr::Min(xs) } else { Expr::Max(xs) })
                    }
                    "piecewise" => self.piecewise(),
                    _ => {
                        if self.peek() == Some(b'(') {
                            self.pos = start;
                            return Err(self.err(&format!("unknown function `{name}`")));
                        }
                        (self.resolve)(&name).map(Expr::Var).ok_or(ExprError::UnknownSymbol(name))
                    }
                }
            }
            Some(_) => Err(self.err("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            digits(self);
        }
        if self.pos < self.src.len() && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && (self.src[self.pos] == b'-' || self.src[self.pos] == b'+') {
                self.pos += 1;
            }
            if self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                digits(self);
            } else {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>().map(Expr::Const).map_err(|_| ExprError::Syntax { pos: start, msg: "bad number".into() })
    }

    fn piecewise(&mut self) -> Result<Expr, ExprError> {
        self.expect("{")?;
        let mut arms = Vec::new();
        loop {
            let save = self.pos;
            self.skip_ws();
            if self.ident() == "else" && self.peek() == Some(b':') {
                self.pos += 1;
                let otherwise = self.expr()?;
                self.eat(";");
                self.expect("}")?;
                return Ok(Expr::Piecewise { arms, otherwise: Box::new(otherwise) });
            }
            self.pos = save;
            let lhs = self.expr()?;
            let op = if self.eat("<=") {
                Cmp::Le
            } else if self.eat(">=") {
                Cmp::Ge
            } else if self.eat("<") {
                Cmp::Lt
            } else if self.eat(">") {
                Cmp::Gt
            } else {
                return Err(self.err("expected comparison in piecewise guard"));
            };
            let rhs = self.expr()?;
            let diff = lhs.clone().sub(rhs.clone());
            if !matches!(diff.degree(), Some(0 | 1)) {
                return Err(ExprError::NonAffineGuard);
            }
            self.expect(":")?;
            let e = self.expr()?;
            self.expect(";")?;
            arms.push((Guard { lhs, op, rhs }, e));
        }
    }
}
