//! Reaction expressions: parsing, evaluation, symbolic differentiation and
//! compilation to a flat stack program.

use std::fmt;

/// Elementary functions admitted by the expression grammar.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Cos,
    Sin,
    Log,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        match name {
            "exp" => Some(Func::Exp),
            "cos" => Some(Func::Cos),
            "sin" => Some(Func::Sin),
            "log" => Some(Func::Log),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Exp => x.exp(),
            Func::Cos => x.cos(),
            Func::Sin => x.sin(),
            Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Cos => "cos",
            Func::Sin => "sin",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }
}

/// Expression tree over component symbols `u1..un` and named parameters.
///
/// `Var(i)` refers to component `u{i+1}`; `Param(j)` indexes the parameter
/// table the expression was parsed against.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Param(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Parse failure located by 1-based character column within the source string.
#[derive(Clone, Debug, PartialEq)]
pub struct ExprError {
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "column {}: {}", self.column, self.message)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        let col = i + 1;
        if ch.is_whitespace() {
            i += 1;
        } else if ch.is_ascii_digit() || ch == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value = text.parse::<f64>().map_err(|_| ExprError {
                column: col,
                message: format!("malformed number '{text}'"),
            })?;
            out.push((Tok::Num(value), col));
        } else if ch.is_alphabetic() || ch == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
        } else if "+-*/^".contains(ch) {
            out.push((Tok::Op(ch), col));
            i += 1;
        } else if ch == '(' {
            out.push((Tok::LParen, col));
            i += 1;
        } else if ch == ')' {
            out.push((Tok::RParen, col));
            i += 1;
        } else {
            return Err(ExprError {
                column: col,
                message: format!("unexpected character '{ch}'"),
            });
        }
    }
    out.push((Tok::End, chars.len() + 1));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    n: usize,
    params: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn col(&self) -> usize {
        self.toks[self.pos].1
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError {
            column: self.col(),
            message: message.into(),
        })
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Op('+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Op('-') => {
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
                Tok::Op('*') => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Op('/') => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Tok::Op('-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Tok::Op('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if let Tok::Op('^') = self.peek() {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.pos += 1;
                let inner = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return self.err("expected ')'");
                }
                self.pos += 1;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let col = self.col();
                self.pos += 1;
                if let Some(func) = Func::from_name(&name) {
                    if *self.peek() != Tok::LParen {
                        return self.err(format!("expected '(' after function '{name}'"));
                    }
                    self.pos += 1;
                    let arg = self.expr()?;
                    if *self.peek() != Tok::RParen {
                        return self.err("expected ')'");
                    }
                    self.pos += 1;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                if let Some(idx) = self.params.iter().position(|p| *p == name) {
                    return Ok(Expr::Param(idx));
                }
                if let Some(rest) = name.strip_prefix('u') {
                    if let Ok(k) = rest.parse::<usize>() {
                        if k >= 1 && k <= self.n {
                            return Ok(Expr::Var(k - 1));
                        }
                        return Err(ExprError {
                            column: col,
                            message: format!("component '{name}' out of range 1..{}", self.n),
                        });
                    }
                }
                if name == "pi" {
                    return Ok(Expr::Num(std::f64::consts::PI));
                }
                Err(ExprError {
                    column: col,
                    message: format!("unknown identifier '{name}'"),
                })
            }
            Tok::End => self.err("unexpected end of expression"),
            Tok::RParen => self.err("unexpected ')'"),
            Tok::Op(c) => self.err(format!("unexpected operator '{c}'")),
        }
    }
}

/// Parses `src` over `n` components and the given parameter names.
pub fn parse(src: &str, n: usize, params: &[String]) -> Result<Expr, ExprError> {
    let toks = tokenize(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        n,
        params,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.err("unexpected trailing input");
    }
    Ok(e)
}

fn num(v: f64) -> Expr {
    Expr::Num(v)
}

fn is_num(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Num(x) if *x == v)
}

fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => num(x + y),
        _ if is_num(&a, 0.0) => b,
        _ if is_num(&b, 0.0) => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => num(x - y),
        _ if is_num(&b, 0.0) => a,
        _ if is_num(&a, 0.0) => neg(b),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => num(x * y),
        _ if is_num(&a, 0.0) || is_num(&b, 0.0) => num(0.0),
        _ if is_num(&a, 1.0) => b,
        _ if is_num(&b, 1.0) => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => num(x / y),
        _ if is_num(&a, 0.0) => num(0.0),
        _ if is_num(&b, 1.0) => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(x) => num(-x),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => num(x.powf(*y)),
        _ if is_num(&b, 1.0) => a,
        _ if is_num(&b, 0.0) => num(1.0),
        _ => Expr::Pow(Box::new(a), Box::new(b)),
    }
}

fn call(f: Func, a: Expr) -> Expr {
    match a {
        Expr::Num(x) => num(f.apply(x)),
        other => Expr::Call(f, Box::new(other)),
    }
}

impl Expr {
    /// Evaluates the tree at state `u` with parameter values `p`.
    pub fn eval(&self, u: &[f64], p: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => u[*i],
            Expr::Param(j) => p[*j],
            Expr::Neg(a) => -a.eval(u, p),
            Expr::Add(a, b) => a.eval(u, p) + b.eval(u, p),
            Expr::Sub(a, b) => a.eval(u, p) - b.eval(u, p),
            Expr::Mul(a, b) => a.eval(u, p) * b.eval(u, p),
            Expr::Div(a, b) => a.eval(u, p) / b.eval(u, p),
            Expr::Pow(a, b) => power(a.eval(u, p), b.eval(u, p)),
            Expr::Call(f, a) => f.apply(a.eval(u, p)),
        }
    }

    /// True when the tree does not depend on any component.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Param(_) => true,
            Expr::Var(_) => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.is_constant(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.is_constant() && b.is_constant(),
        }
    }

    /// Symbolic partial derivative with respect to component `j`.
    pub fn diff(&self, j: usize) -> Expr {
        match self {
            Expr::Num(_) | Expr::Param(_) => num(0.0),
            Expr::Var(i) => num(if *i == j { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.diff(j)),
            Expr::Add(a, b) => add(a.diff(j), b.diff(j)),
            Expr::Sub(a, b) => sub(a.diff(j), b.diff(j)),
            Expr::Mul(a, b) => add(mul(a.diff(j), (**b).clone()), mul((**a).clone(), b.diff(j))),
            Expr::Div(a, b) => div(
                sub(mul(a.diff(j), (**b).clone()), mul((**a).clone(), b.diff(j))),
                pow((**b).clone(), num(2.0)),
            ),
            Expr::Pow(a, b) => {
                if b.is_constant() {
                    mul(
                        mul(
                            (**b).clone(),
                            pow((**a).clone(), sub((**b).clone(), num(1.0))),
                        ),
                        a.diff(j),
                    )
                } else {
                    mul(
                        self.clone(),
                        add(
                            mul(b.diff(j), call(Func::Log, (**a).clone())),
                            div(mul((**b).clone(), a.diff(j)), (**a).clone()),
                        ),
                    )
                }
            }
            Expr::Call(f, a) => {
                let inner = (**a).clone();
                let outer = match f {
                    Func::Exp => call(Func::Exp, inner),
                    Func::Cos => neg(call(Func::Sin, inner)),
                    Func::Sin => call(Func::Cos, inner),
                    Func::Log => div(num(1.0), inner),
                    Func::Sqrt => div(num(0.5), call(Func::Sqrt, inner)),
                };
                mul(outer, a.diff(j))
            }
        }
    }

    /// Replaces every component `u_i` by `u_i + shift_i`.
    pub fn shifted(&self, shift: &[f64]) -> Expr {
        match self {
            Expr::Var(i) => add(Expr::Var(*i), num(shift[*i])),
            Expr::Num(_) | Expr::Param(_) => self.clone(),
            Expr::Neg(a) => neg(a.shifted(shift)),
            Expr::Add(a, b) => add(a.shifted(shift), b.shifted(shift)),
            Expr::Sub(a, b) => sub(a.shifted(shift), b.shifted(shift)),
            Expr::Mul(a, b) => mul(a.shifted(shift), b.shifted(shift)),
            Expr::Div(a, b) => div(a.shifted(shift), b.shifted(shift)),
            Expr::Pow(a, b) => pow(a.shifted(shift), b.shifted(shift)),
            Expr::Call(f, a) => call(*f, a.shifted(shift)),
        }
    }

    /// Compiles to a postfix program with parameter values folded in.
    pub fn compile(&self, p: &[f64]) -> Program {
        let mut ops = Vec::new();
        emit(self, p, &mut ops);
        let mut depth = 0usize;
        let mut max_depth = 0usize;
        for op in &ops {
            match op {
                Op::Const(_) | Op::Var(_) => depth += 1,
                Op::Add | Op::Sub | Op::Mul | Op::Div | Op::Pow => depth -= 1,
                _ => {}
            }
            max_depth = max_depth.max(depth);
        }
        Program { ops, max_depth }
    }
}

fn power(x: f64, y: f64) -> f64 {
    if y.fract() == 0.0 && y.abs() <= 64.0 {
        x.powi(y as i32)
    } else {
        x.powf(y)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(i) => write!(f, "u{}", i + 1),
            Expr::Param(j) => write!(f, "p[{j}]"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(g, a) => write!(f, "{}({a})", g.name()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Op {
    Const(f64),
    Var(usize),
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    PowI(i32),
    Call(Func),
}

fn emit(e: &Expr, p: &[f64], ops: &mut Vec<Op>) {
    match e {
        Expr::Num(v) => ops.push(Op::Const(*v)),
        Expr::Param(j) => ops.push(Op::Const(p[*j])),
        Expr::Var(i) => ops.push(Op::Var(*i)),
        Expr::Neg(a) => {
            emit(a, p, ops);
            ops.push(Op::Neg);
        }
        Expr::Call(g, a) => {
            emit(a, p, ops);
            ops.push(Op::Call(*g));
        }
        Expr::Pow(a, b) if b.is_constant() => {
            let y = b.eval(&[], p);
            emit(a, p, ops);
            if y.fract() == 0.0 && y.abs() <= 64.0 {
                ops.push(Op::PowI(y as i32));
            } else {
                ops.push(Op::Const(y));
                ops.push(Op::Pow);
            }
        }
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
            emit(a, p, ops);
            emit(b, p, ops);
            ops.push(match e {
                Expr::Add(..) => Op::Add,
                Expr::Sub(..) => Op::Sub,
                Expr::Mul(..) => Op::Mul,
                Expr::Div(..) => Op::Div,
                _ => Op::Pow,
            });
        }
    }
}

/// Postfix program produced by [`Expr::compile`]; evaluation matches
/// [`Expr::eval`] bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    ops: Vec<Op>,
    max_depth: usize,
}

impl Program {
    /// Evaluates the program using `stack` as scratch space.
    pub fn eval_with(&self, u: &[f64], stack: &mut Vec<f64>) -> f64 {
        stack.clear();
        stack.reserve(self.max_depth);
        for op in &self.ops {
            match *op {
                Op::Const(v) => stack.push(v),
                Op::Var(i) => stack.push(u[i]),
                Op::Neg => {
                    let x = stack.last_mut().unwrap();
                    *x = -*x;
                }
                Op::PowI(k) => {
                    let x = stack.last_mut().unwrap();
                    *x = x.powi(k);
                }
                Op::Call(g) => {
                    let x = stack.last_mut().unwrap();
                    *x = g.apply(*x);
                }
                Op::Add | Op::Sub | Op::Mul | Op::Div | Op::Pow => {
                    let b = stack.pop().unwrap();
                    let a = stack.last_mut().unwrap();
                    *a = match *op {
                        Op::Add => *a + b,
                        Op::Sub => *a - b,
                        Op::Mul => *a * b,
                        Op::Div => *a / b,
                        _ => power(*a, b),
                    };
                }
            }
        }
        stack[0]
    }

    /// Convenience evaluation with a fresh stack.
    pub fn eval(&self, u: &[f64]) -> f64 {
        let mut stack = Vec::with_capacity(self.max_depth);
        self.eval_with(u, &mut stack)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_precedence_and_unary_minus() {
        let e = parse("-u1^2 + 3*u2/2", 2, &[]).unwrap();
        assert_eq!(e.eval(&[2.0, 4.0], &[]), -4.0 + 6.0);
        let e = parse("2^-1", 1, &[]).unwrap();
        assert_eq!(e.eval(&[0.0], &[]), 0.5);
        let e = parse("2^3^2", 1, &[]).unwrap();
        assert_eq!(e.eval(&[0.0], &[]), 512.0);
    }

    #[test]
    fn parses_scientific_numbers_and_params() {
        let p = names(&["beta"]);
        let e = parse("1.5e-1*beta + 2E2", 1, &p).unwrap();
        assert!((e.eval(&[0.0], &[2.0]) - 200.3).abs() < 1e-12);
    }

    #[test]
    fn reports_columns() {
        let err = parse("u1 + $", 1, &[]).unwrap_err();
        assert_eq!(err.column, 6);
        let err = parse("u1 + foo", 1, &[]).unwrap_err();
        assert_eq!(err.column, 6);
        assert!(err.message.contains("foo"));
        let err = parse("u3", 2, &[]).unwrap_err();
        assert_eq!(err.column, 1);
        let err = parse("(u1 + 1", 1, &[]).unwrap_err();
        assert_eq!(err.column, 8);
    }

    #[test]
    fn derivatives_of_elementary_functions() {
        let e = parse("exp(u1)*cos(u2) + u1^3 - sqrt(u2) + log(u1)/u2", 2, &[]).unwrap();
        let u = [0.7, 1.3];
        let d0 = e.diff(0).eval(&u, &[]);
        let d1 = e.diff(1).eval(&u, &[]);
        let want0 = u[0].exp() * u[1].cos() + 3.0 * u[0] * u[0] + 1.0 / (u[0] * u[1]);
        let want1 = -u[0].exp() * u[1].sin() - 0.5 / u[1].sqrt() - u[0].ln() / (u[1] * u[1]);
        assert!((d0 - want0).abs() < 1e-13);
        assert!((d1 - want1).abs() < 1e-13);
    }

    #[test]
    fn variable_exponent_derivative() {
        let e = parse("u1^u2", 2, &[]).unwrap();
        let u = [1.7f64, 0.6f64];
        let want = u[0].powf(u[1]) * u[0].ln();
        assert!((e.diff(1).eval(&u, &[]) - want).abs() < 1e-13);
    }

    #[test]
    fn compiled_program_matches_tree() {
        let p = names(&["k", "theta"]);
        let e = parse("theta*u1 - u1^2 - u1*u2 + exp(-k*u2)/(1+u1^2)", 2, &p).unwrap();
        let prog = e.compile(&[0.3, 0.04]);
        for u in [[0.1, 0.2], [-1.0, 3.0], [2.5, -0.5]] {
            assert_eq!(prog.eval(&u).to_bits(), e.eval(&u, &[0.3, 0.04]).to_bits());
        }
    }

    #[test]
    fn shifting_substitutes_components() {
        let e = parse("u1 - u1^2", 1, &[]).unwrap();
        let s = e.shifted(&[1.0]);
        assert!((s.eval(&[0.25], &[]) - e.eval(&[1.25], &[])).abs() < 1e-15);
    }
}
