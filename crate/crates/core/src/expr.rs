//! Closed-form expression trees.
//!
//! Trees are built from variables, named constants, the four arithmetic
//! operations, integer powers and `sin`, `cos`, `arcsin`, `arctan`, `exp`,
//! `log2`. They evaluate at any precision (point or interval), print in
//! infix and S-expression form, and the infix form parses back to a tree
//! that prints identically.

use std::fmt::Write as _;

use crate::numerics::interval::{Interval, IntervalError};
use crate::numerics::real::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("unknown kernel `{0}`")]
    UnknownKernel(String),
    #[error("arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("{op}: argument outside the domain ({detail})")]
    Domain { op: &'static str, detail: String },
    #[error("parse error at byte {pos}: {message}")]
    Parse { pos: usize, message: String },
}

impl From<IntervalError> for ExprError {
    fn from(e: IntervalError) -> Self {
        match e {
            IntervalError::Domain { op, lo, hi } => ExprError::Domain { op, detail: format!("[{lo}, {hi}]") },
            IntervalError::DivisionByZero => ExprError::Domain { op: "div", detail: "divisor contains 0".into() },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConstKind {
    Pi,
    E,
    Int(i64),
    /// Exact decimal literal, kept as written.
    Decimal(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constant {
    pub kind: ConstKind,
    pub provenance: Option<String>,
}

impl Constant {
    pub fn value(&self, prec: u32) -> Real {
        match &self.kind {
            ConstKind::Pi => Real::pi(prec),
            ConstKind::E => Real::e(prec),
            ConstKind::Int(n) => Real::from_i64(*n, prec),
            ConstKind::Decimal(s) => Real::parse(s, prec).expect("decimal literal"),
        }
    }

    pub fn enclosure(&self, prec: u32) -> Interval {
        match &self.kind {
            ConstKind::Pi => Interval::pi(prec),
            ConstKind::E => Interval::point(&Real::one(prec)).exp(),
            ConstKind::Int(n) => Interval::ratio(*n, 1, prec),
            ConstKind::Decimal(s) => Interval::from_decimal(s, prec),
        }
    }

    fn text(&self) -> String {
        match &self.kind {
            ConstKind::Pi => "pi".into(),
            ConstKind::E => "e".into(),
            ConstKind::Int(n) => n.to_string(),
            ConstKind::Decimal(s) => s.clone(),
        }
    }

    fn is_negative(&self) -> bool {
        match &self.kind {
            ConstKind::Int(n) => *n < 0,
            ConstKind::Decimal(s) => s.starts_with('-'),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Var(usize),
    Const(Constant),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, i32),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    /// `cert`, when present, is an expression `B` with `|arg| ≤ B < 1`
    /// on the intended domain.
    ArcSin { arg: Box<Expr>, cert: Option<Box<Expr>> },
    ArcTan(Box<Expr>),
    Exp(Box<Expr>),
    Log2(Box<Expr>),
}

// Builders; operator overloading keeps the kernel definitions readable.

pub fn var(i: usize) -> Expr {
    Expr::Var(i)
}

pub fn int(n: i64) -> Expr {
    Expr::Const(Constant { kind: ConstKind::Int(n), provenance: None })
}

pub fn pi() -> Expr {
    Expr::Const(Constant { kind: ConstKind::Pi, provenance: None })
}

pub fn decimal(text: &str, provenance: &str) -> Expr {
    Expr::Const(Constant { kind: ConstKind::Decimal(text.into()), provenance: Some(provenance.into()) })
}

pub fn labeled_int(n: i64, provenance: &str) -> Expr {
    Expr::Const(Constant { kind: ConstKind::Int(n), provenance: Some(provenance.into()) })
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, o: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(o))
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, o: Expr) -> Expr {
        Expr::Sub(Box::new(self), Box::new(o))
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, o: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(o))
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, o: Expr) -> Expr {
        Expr::Div(Box::new(self), Box::new(o))
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

impl Expr {
    pub fn sin(self) -> Expr {
        Expr::Sin(Box::new(self))
    }
    pub fn cos(self) -> Expr {
        Expr::Cos(Box::new(self))
    }
    pub fn asin(self) -> Expr {
        Expr::ArcSin { arg: Box::new(self), cert: None }
    }
    pub fn asin_certified(self, bound: Expr) -> Expr {
        Expr::ArcSin { arg: Box::new(self), cert: Some(Box::new(bound)) }
    }
    pub fn atan(self) -> Expr {
        Expr::ArcTan(Box::new(self))
    }
    pub fn exp(self) -> Expr {
        Expr::Exp(Box::new(self))
    }
    pub fn log2(self) -> Expr {
        Expr::Log2(Box::new(self))
    }
    pub fn pow(self, n: i32) -> Expr {
        Expr::Pow(Box::new(self), n)
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Var(_) | Expr::Const(_) => vec![],
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => vec![a, b],
            Expr::Neg(a)
            | Expr::Pow(a, _)
            | Expr::Sin(a)
            | Expr::Cos(a)
            | Expr::ArcTan(a)
            | Expr::Exp(a)
            | Expr::Log2(a) => vec![a],
            Expr::ArcSin { arg, .. } => vec![arg],
        }
    }

    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Var(i) => Some(*i),
            _ => self.children().iter().filter_map(|c| c.max_var()).max(),
        }
    }

    /// Replace every `Var(i)` with `subs[i]`.
    pub fn substitute(&self, subs: &[Expr]) -> Expr {
        let s = |e: &Expr| Box::new(e.substitute(subs));
        match self {
            Expr::Var(i) => subs[*i].clone(),
            Expr::Const(c) => Expr::Const(c.clone()),
            Expr::Add(a, b) => Expr::Add(s(a), s(b)),
            Expr::Sub(a, b) => Expr::Sub(s(a), s(b)),
            Expr::Mul(a, b) => Expr::Mul(s(a), s(b)),
            Expr::Div(a, b) => Expr::Div(s(a), s(b)),
            Expr::Neg(a) => Expr::Neg(s(a)),
            Expr::Pow(a, n) => Expr::Pow(s(a), *n),
            Expr::Sin(a) => Expr::Sin(s(a)),
            Expr::Cos(a) => Expr::Cos(s(a)),
            Expr::ArcSin { arg, cert } => Expr::ArcSin { arg: s(arg), cert: cert.as_ref().map(|c| s(c)) },
            Expr::ArcTan(a) => Expr::ArcTan(s(a)),
            Expr::Exp(a) => Expr::Exp(s(a)),
            Expr::Log2(a) => Expr::Log2(s(a)),
        }
    }

    fn point(&self, args: &[Real], wp: u32) -> Result<Real, ExprError> {
        Ok(match self {
            Expr::Var(i) => args[*i].to_prec(wp),
            Expr::Const(c) => c.value(wp),
            Expr::Add(a, b) => a.point(args, wp)? + b.point(args, wp)?,
            Expr::Sub(a, b) => a.point(args, wp)? - b.point(args, wp)?,
            Expr::Mul(a, b) => a.point(args, wp)? * b.point(args, wp)?,
            Expr::Div(a, b) => {
                let d = b.point(args, wp)?;
                if d.is_zero() {
                    return Err(ExprError::Domain { op: "div", detail: "division by zero".into() });
                }
                a.point(args, wp)? / d
            }
            Expr::Neg(a) => -a.point(args, wp)?,
            Expr::Pow(a, n) => a.point(args, wp)?.powi(*n),
            Expr::Sin(a) => a.point(args, wp)?.sin(),
            Expr::Cos(a) => a.point(args, wp)?.cos(),
            Expr::ArcSin { arg, .. } => {
                let v = arg.point(args, wp)?;
                if v.abs() > 1 {
                    return Err(ExprError::Domain { op: "arcsin", detail: v.to_short(12) });
                }
                v.asin()
            }
            Expr::ArcTan(a) => a.point(args, wp)?.atan(),
            Expr::Exp(a) => a.point(args, wp)?.exp(),
            Expr::Log2(a) => {
                let v = a.point(args, wp)?;
                if v.signum_i32() <= 0 {
                    return Err(ExprError::Domain { op: "log2", detail: v.to_short(12) });
                }
                v.log2()
            }
        })
    }

    fn enclose(&self, boxes: &[Interval], prec: u32) -> Result<Interval, ExprError> {
        Ok(match self {
            Expr::Var(i) => boxes[*i].clone(),
            Expr::Const(c) => c.enclosure(prec),
            Expr::Add(a, b) => a.enclose(boxes, prec)?.add(&b.enclose(boxes, prec)?),
            Expr::Sub(a, b) => a.enclose(boxes, prec)?.sub(&b.enclose(boxes, prec)?),
            Expr::Mul(a, b) => {
                if a == b {
                    a.enclose(boxes, prec)?.sqr()
                } else {
                    a.enclose(boxes, prec)?.mul(&b.enclose(boxes, prec)?)
                }
            }
            Expr::Div(a, b) => a.enclose(boxes, prec)?.div(&b.enclose(boxes, prec)?)?,
            Expr::Neg(a) => a.enclose(boxes, prec)?.neg(),
            Expr::Pow(a, n) => {
                let base = a.enclose(boxes, prec)?;
                if *n >= 0 {
                    base.powi(*n as u32)
                } else {
                    base.powi(n.unsigned_abs()).recip()?
                }
            }
            Expr::Sin(a) => a.enclose(boxes, prec)?.sin(),
            Expr::Cos(a) => a.enclose(boxes, prec)?.cos(),
            Expr::ArcSin { arg, .. } => arg.enclose(boxes, prec)?.asin()?,
            Expr::ArcTan(a) => a.enclose(boxes, prec)?.atan(),
            Expr::Exp(a) => a.enclose(boxes, prec)?.exp(),
            Expr::Log2(a) => a.enclose(boxes, prec)?.log2()?,
        })
    }

    /// Check every certified `arcsin` on a box: each bound must enclose
    /// below 1. Returns the widest certified range found.
    pub fn certify_arcsin(&self, boxes: &[Interval], prec: u32) -> Result<Option<Real>, ExprError> {
        let mut worst: Option<Real> = None;
        if let Expr::ArcSin { arg, cert: Some(b) } = self {
            let bound = b.enclose(boxes, prec)?;
            if bound.hi() >= &Real::one(prec) {
                return Err(ExprError::Domain { op: "arcsin", detail: "certificate bound reaches 1".into() });
            }
            let val = arg.enclose(boxes, prec)?;
            if val.mag() > *bound.hi() {
                return Err(ExprError::Domain { op: "arcsin", detail: "argument exceeds its certificate".into() });
            }
            worst = Some(bound.hi().clone());
        }
        for c in self.children() {
            if let Some(w) = c.certify_arcsin(boxes, prec)? {
                worst = Some(match worst {
                    Some(v) => v.max(&w),
                    None => w,
                });
            }
        }
        Ok(worst)
    }

    // ---- printing ----------------------------------------------------

    fn level(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::Const(c) if c.is_negative() => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }

    fn write_infix(&self, names: &[String], out: &mut String) {
        let wrap = |e: &Expr, min: u8, out: &mut String| {
            if e.level() < min {
                out.push('(');
                e.write_infix(names, out);
                out.push(')');
            } else {
                e.write_infix(names, out);
            }
        };
        let call = |name: &str, a: &Expr, out: &mut String| {
            out.push_str(name);
            out.push('(');
            a.write_infix(names, out);
            out.push(')');
        };
        match self {
            Expr::Var(i) => out.push_str(&names[*i]),
            Expr::Const(c) => out.push_str(&c.text()),
            Expr::Add(a, b) => {
                wrap(a, 1, out);
                out.push_str(" + ");
                wrap(b, 2, out);
            }
            Expr::Sub(a, b) => {
                wrap(a, 1, out);
                out.push_str(" - ");
                wrap(b, 2, out);
            }
            Expr::Mul(a, b) => {
                wrap(a, 2, out);
                out.push('*');
                wrap(b, 3, out);
            }
            Expr::Div(a, b) => {
                wrap(a, 2, out);
                out.push('/');
                wrap(b, 3, out);
            }
            Expr::Neg(a) => {
                out.push('-');
                wrap(a, 3, out);
            }
            Expr::Pow(a, n) => {
                wrap(a, 5, out);
                let _ = write!(out, "^{n}");
            }
            Expr::Sin(a) => call("sin", a, out),
            Expr::Cos(a) => call("cos", a, out),
            Expr::ArcSin { arg, .. } => call("arcsin", arg, out),
            Expr::ArcTan(a) => call("arctan", a, out),
            Expr::Exp(a) => call("exp", a, out),
            Expr::Log2(a) => call("log2", a, out),
        }
    }

    fn write_sexpr(&self, names: &[String], out: &mut String) {
        let node = |tag: &str, kids: &[&Expr], out: &mut String| {
            out.push('(');
            out.push_str(tag);
            for k in kids {
                out.push(' ');
                k.write_sexpr(names, out);
            }
            out.push(')');
        };
        match self {
            Expr::Var(i) => out.push_str(&names[*i]),
            Expr::Const(c) => match &c.provenance {
                Some(p) => {
                    let _ = write!(out, "(const {} {:?})", c.text(), p);
                }
                None => out.push_str(&c.text()),
            },
            Expr::Add(a, b) => node("+", &[a, b], out),
            Expr::Sub(a, b) => node("-", &[a, b], out),
            Expr::Mul(a, b) => node("*", &[a, b], out),
            Expr::Div(a, b) => node("/", &[a, b], out),
            Expr::Neg(a) => node("neg", &[a], out),
            Expr::Pow(a, n) => {
                out.push_str("(pow ");
                a.write_sexpr(names, out);
                let _ = write!(out, " {n})");
            }
            Expr::Sin(a) => node("sin", &[a], out),
            Expr::Cos(a) => node("cos", &[a], out),
            Expr::ArcSin { arg, cert } => {
                out.push_str("(arcsin ");
                arg.write_sexpr(names, out);
                if let Some(c) = cert {
                    out.push_str(" (bound ");
                    c.write_sexpr(names, out);
                    out.push(')');
                }
                out.push(')');
            }
            Expr::ArcTan(a) => node("arctan", &[a], out),
            Expr::Exp(a) => node("exp", &[a], out),
            Expr::Log2(a) => node("log2", &[a], out),
        }
    }

    fn collect_provenance(&self, out: &mut Vec<(String, String)>) {
        if let Expr::Const(c) = self {
            if let Some(p) = &c.provenance {
                let item = (c.text(), p.clone());
                if !out.contains(&item) {
                    out.push(item);
                }
            }
        }
        if let Expr::ArcSin { cert: Some(c), .. } = self {
            c.collect_provenance(out);
        }
        for c in self.children() {
            c.collect_provenance(out);
        }
    }
}

/// An expression together with the names of its variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Function {
    pub vars: Vec<String>,
    pub body: Expr,
}

impl Function {
    pub fn new(vars: &[&str], body: Expr) -> Self {
        let f = Function { vars: vars.iter().map(|s| s.to_string()).collect(), body };
        if let Some(m) = f.body.max_var() {
            assert!(m < f.vars.len(), "variable index {m} out of range");
        }
        f
    }

    pub fn identity() -> Self {
        Function::new(&["x"], var(0))
    }

    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    /// Evaluate with 32 guard bits; the result carries the precision of the
    /// widest argument.
    pub fn eval(&self, args: &[Real]) -> Result<Real, ExprError> {
        if args.len() != self.arity() {
            return Err(ExprError::ArityMismatch { expected: self.arity(), got: args.len() });
        }
        let prec = args.iter().map(Real::prec).max().unwrap_or_else(crate::numerics::default_precision);
        Ok(self.body.point(args, prec + 32)?.to_prec(prec))
    }

    pub fn eval_at(&self, args: &[Real], prec: u32) -> Result<Real, ExprError> {
        if args.len() != self.arity() {
            return Err(ExprError::ArityMismatch { expected: self.arity(), got: args.len() });
        }
        Ok(self.body.point(args, prec + 32)?.to_prec(prec))
    }

    pub fn eval_interval(&self, boxes: &[Interval]) -> Result<Interval, ExprError> {
        if boxes.len() != self.arity() {
            return Err(ExprError::ArityMismatch { expected: self.arity(), got: boxes.len() });
        }
        let prec = boxes.iter().map(Interval::prec).max().unwrap_or_else(crate::numerics::default_precision);
        self.body.enclose(boxes, prec)
    }

    pub fn to_infix(&self) -> String {
        let mut s = String::new();
        self.body.write_infix(&self.vars, &mut s);
        s
    }

    pub fn to_sexpr(&self) -> String {
        let mut s = String::new();
        self.body.write_sexpr(&self.vars, &mut s);
        s
    }

    /// `(literal, origin)` for each labelled constant, in first-use order.
    pub fn provenance(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        self.body.collect_provenance(&mut out);
        out
    }

    pub fn parse(text: &str, vars: &[&str]) -> Result<Function, ExprError> {
        let mut p = Parser { src: text.as_bytes(), pos: 0, vars };
        let body = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("trailing input"));
        }
        Ok(Function::new(vars, body))
    }
}

/// `outer(inner_1(v), …, inner_n(v))`; all inners share one variable list.
pub fn compose(outer: &Function, inners: &[Function]) -> Result<Function, ExprError> {
    if inners.len() != outer.arity() {
        return Err(ExprError::ArityMismatch { expected: outer.arity(), got: inners.len() });
    }
    let vars = inners.first().map(|f| f.vars.clone()).unwrap_or_default();
    for f in inners {
        if f.vars.len() != vars.len() {
            return Err(ExprError::ArityMismatch { expected: vars.len(), got: f.vars.len() });
        }
    }
    let subs: Vec<Expr> = inners.iter().map(|f| f.body.clone()).collect();
    Ok(Function { vars, body: outer.body.substitute(&subs) })
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    vars: &'a [&'a str],
}

impl Parser<'_> {
    fn err(&self, message: &str) -> ExprError {
        ExprError::Parse { pos: self.pos, message: message.into() }
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

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = lhs + self.term()?;
            } else if self.eat(b'-') {
                lhs = lhs - self.term()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = lhs * self.unary()?;
            } else if self.eat(b'/') {
                lhs = lhs / self.unary()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat(b'-') {
            return Ok(-self.unary()?);
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let neg = self.eat(b'-');
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let digits = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            let n: i32 = digits.parse().map_err(|_| self.err("expected an integer exponent"))?;
            return Ok(base.pow(if neg { -n } else { n }));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                while self.pos < self.src.len() && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.') {
                    self.pos += 1;
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                if text.contains('.') {
                    if text.matches('.').count() > 1 || text.ends_with('.') {
                        return Err(ExprError::Parse { pos: start, message: format!("bad number `{text}`") });
                    }
                    Ok(Expr::Const(Constant { kind: ConstKind::Decimal(text.into()), provenance: None }))
                } else {
                    let n: i64 = text
                        .parse()
                        .map_err(|_| ExprError::Parse { pos: start, message: format!("integer `{text}` too large") })?;
                    Ok(int(n))
                }
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                let func: Option<fn(Expr) -> Expr> = match name {
                    "sin" => Some(Expr::sin),
                    "cos" => Some(Expr::cos),
                    "arcsin" => Some(Expr::asin),
                    "arctan" => Some(Expr::atan),
                    "exp" => Some(Expr::exp),
                    "log2" => Some(Expr::log2),
                    _ => None,
                };
                if let Some(f) = func {
                    if !self.eat(b'(') {
                        return Err(self.err("expected `(` after function name"));
                    }
                    let arg = self.expr()?;
                    if !self.eat(b')') {
                        return Err(self.err("expected `)`"));
                    }
                    return Ok(f(arg));
                }
                if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    return Ok(var(i));
                }
                match name {
                    "pi" => Ok(pi()),
                    "e" => Ok(Expr::Const(Constant { kind: ConstKind::E, provenance: None })),
                    _ => Err(ExprError::Parse { pos: start, message: format!("unknown name `{name}`") }),
                }
            }
            _ => Err(self.err("expected an operand")),
        }
    }
}

// ---- kernel library --------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelId {
    PsiCorrect,
    Sigma,
    SigmaIter(usize),
    S,
    GatePhi,
    Pair2,
    UpsilonK(usize),
}

impl std::str::FromStr for KernelId {
    type Err = ExprError;
    fn from_str(s: &str) -> Result<Self, ExprError> {
        let unknown = || ExprError::UnknownKernel(s.to_string());
        let arg = |prefix: &str| -> Option<usize> {
            s.strip_prefix(prefix)?.strip_prefix('(')?.strip_suffix(')')?.trim().parse().ok()
        };
        Ok(match s {
            "psi_correct" | "psi" => KernelId::PsiCorrect,
            "sigma" => KernelId::Sigma,
            "s" => KernelId::S,
            "gate_phi" | "phi" => KernelId::GatePhi,
            "pair2" => KernelId::Pair2,
            _ if s.starts_with("sigma_iter") => KernelId::SigmaIter(arg("sigma_iter").ok_or_else(unknown)?),
            _ if s.starts_with("upsilon_k") => {
                let k = arg("upsilon_k").ok_or_else(unknown)?;
                if k < 2 {
                    return Err(unknown());
                }
                KernelId::UpsilonK(k)
            }
            _ => return Err(unknown()),
        })
    }
}

fn two_pi_times(e: Expr) -> Expr {
    int(2) * pi() * e
}

fn psi_body(x: Expr, y: Expr) -> Expr {
    let damp = int(1) - (-y - int(2)).exp();
    let arg = two_pi_times(x.clone()).sin() * damp.clone();
    x - arg.asin_certified(damp) / (int(2) * pi())
}

fn sigma_body(x: Expr) -> Expr {
    x.clone() - decimal("0.2", "sigma amplitude") * two_pi_times(x).sin()
}

fn pair2_body(x: Expr, y: Expr) -> Expr {
    ((x.clone() + y.clone()).pow(2) + int(3) * x + y) / int(2)
}

fn upsilon2_body(a: Expr, b: Expr) -> Expr {
    let big_y = labeled_int(32, "pairing sharpness") * (int(1) + a.clone().pow(2) + b.clone().pow(2));
    pair2_body(psi_body(a, big_y.clone()), psi_body(b, big_y))
}

pub fn build_kernel(id: KernelId) -> Function {
    match id {
        KernelId::PsiCorrect => Function::new(&["x", "y"], psi_body(var(0), var(1))),
        KernelId::Sigma => Function::new(&["x"], sigma_body(var(0))),
        KernelId::SigmaIter(l) => {
            let mut f = Function::identity();
            let sigma = build_kernel(KernelId::Sigma);
            for _ in 0..l {
                f = compose(&sigma, &[f]).expect("unary");
            }
            f
        }
        KernelId::S => {
            let sn = two_pi_times(var(0)).sin();
            Function::new(&["t"], (sn.clone().pow(2) + sn) / int(2))
        }
        KernelId::GatePhi => {
            let s = build_kernel(KernelId::S).body;
            Function::new(&["t", "y"], psi_body(s, var(1)))
        }
        KernelId::Pair2 => Function::new(&["x", "y"], pair2_body(var(0), var(1))),
        KernelId::UpsilonK(k) => {
            let names: Vec<String> = (1..=k).map(|i| format!("x{i}")).collect();
            let mut acc = upsilon2_body(var(0), var(1));
            for i in 2..k {
                acc = upsilon2_body(acc, var(i));
            }
            Function { vars: names, body: acc }
        }
    }
}

pub fn build_kernel_named(name: &str) -> Result<Function, ExprError> {
    Ok(build_kernel(name.parse()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Kernels;

    const P: u32 = 256;

    fn r(v: f64) -> Real {
        Real::with_prec(v, P)
    }

    #[test]
    fn sigma_prints_as_expected() {
        assert_eq!(build_kernel(KernelId::Sigma).to_infix(), "x - 0.2*sin(2*pi*x)");
    }

    #[test]
    fn psi_print_shape() {
        let s = build_kernel(KernelId::PsiCorrect).to_infix();
        assert_eq!(s, "x - arcsin(sin(2*pi*x)*(1 - exp(-y - 2)))/(2*pi)");
        let phi = build_kernel(KernelId::GatePhi).to_infix();
        assert!(phi.contains("arcsin(sin(2*pi*((sin(2*pi*t)^2 + sin(2*pi*t))/2))*(1 - exp(-y - 2)))"), "{phi}");
    }

    #[test]
    fn print_parse_print_is_fixed() {
        for id in [
            KernelId::PsiCorrect,
            KernelId::Sigma,
            KernelId::SigmaIter(3),
            KernelId::S,
            KernelId::GatePhi,
            KernelId::Pair2,
            KernelId::UpsilonK(3),
        ] {
            let f = build_kernel(id);
            let text = f.to_infix();
            let names: Vec<&str> = f.vars.iter().map(String::as_str).collect();
            let again = Function::parse(&text, &names).unwrap();
            assert_eq!(again.to_infix(), text, "{id:?}");
            let x: Vec<Real> = (0..f.arity()).map(|i| r(0.3 + 0.1 * i as f64)).collect();
            assert_eq!(f.eval(&x).unwrap(), again.eval(&x).unwrap());
        }
    }

    #[test]
    fn tricky_parses() {
        let f = Function::parse("-x^2 - -3*(x - 1)/(2*x)", &["x"]).unwrap();
        assert_eq!(f.to_infix(), "-x^2 - -3*(x - 1)/(2*x)");
        let v = f.eval(&[r(2.0)]).unwrap();
        assert_eq!(v, -4.0 + 0.75);
        assert!(Function::parse("x +", &["x"]).is_err());
        assert!(Function::parse("foo(x)", &["x"]).is_err());
        assert_eq!(Function::parse("5", &[]).unwrap().eval(&[]).unwrap(), 5.0);
    }

    #[test]
    fn evaluations_match_kernels() {
        let k = Kernels::at(P);
        let psi = build_kernel(KernelId::PsiCorrect);
        let sigma3 = build_kernel(KernelId::SigmaIter(3));
        let phi = build_kernel(KernelId::GatePhi);
        for i in 0..50 {
            let x = r(-4.0 + i as f64 * 0.173);
            let y = r((i % 7) as f64 * 1.5);
            let tol = Real::one(P) / Real::from_i64(2, P).powi(P as i32 - 8);
            let d = (psi.eval(&[x.clone(), y.clone()]).unwrap() - k.psi(&x, &y)).abs();
            assert!(d <= &tol * &x.abs().max(&Real::one(P)));
            let d = (sigma3.eval(std::slice::from_ref(&x)).unwrap() - k.sigma_iter(&x, 3)).abs();
            assert!(d <= &tol * &x.abs().max(&Real::one(P)));
            let d = (phi.eval(&[x.clone(), y.clone()]).unwrap() - k.gate_phi(&x, &y)).abs();
            assert!(d <= tol);
        }
        assert_eq!(build_kernel(KernelId::Pair2).eval(&[r(0.0), r(1.0)]).unwrap(), 1.0);
    }

    #[test]
    fn compose_checks_arity() {
        let psi = build_kernel(KernelId::PsiCorrect);
        assert_eq!(
            compose(&psi, &[Function::identity()]),
            Err(ExprError::ArityMismatch { expected: 2, got: 1 })
        );
        let id = compose(&Function::identity(), &[build_kernel(KernelId::Sigma)]).unwrap();
        assert_eq!(id, build_kernel(KernelId::Sigma));
    }

    #[test]
    fn interval_domain_error() {
        let f = Function::parse("arcsin(x)", &["x"]).unwrap();
        let bad = Interval::new(r(0.5), r(1.5));
        assert!(matches!(f.eval_interval(&[bad]), Err(ExprError::Domain { op: "arcsin", .. })));
        assert!(matches!(f.eval(&[r(2.0)]), Err(ExprError::Domain { .. })));
    }

    #[test]
    fn arcsin_certificate_holds_on_box() {
        let psi = build_kernel(KernelId::PsiCorrect);
        let boxes = [Interval::new(r(-3.0), r(3.0)), Interval::new(r(0.0), r(60.0))];
        let bound = psi.body.certify_arcsin(&boxes, P).unwrap().unwrap();
        assert!(bound < 1.0);
    }

    #[test]
    fn provenance_is_listed() {
        let f = build_kernel(KernelId::UpsilonK(2));
        let p = f.provenance();
        assert!(p.iter().any(|(v, _)| v == "32"));
        assert!(f.to_sexpr().contains("(const 32 \"pairing sharpness\")"));
    }

    #[test]
    fn unknown_kernel_name() {
        assert!(matches!(build_kernel_named("nope"), Err(ExprError::UnknownKernel(_))));
        assert!(build_kernel_named("sigma_iter(4)").is_ok());
        assert!(build_kernel_named("upsilon_k(3)").is_ok());
    }
}
