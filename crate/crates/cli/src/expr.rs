//! Arithmetic expressions over `x, t, u, ux, ut` with symbolic differentiation.
//!
//! Grammar (see `docs/expressions.md`):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('+' | '-') unary | power
//! power  := atom ('^' unary)?
//! atom   := number | name | func '(' expr ')' | '(' expr ')'
//! ```

use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Var {
    X,
    T,
    U,
    Ux,
    Ut,
}

impl Var {
    fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::T => "t",
            Var::U => "u",
            Var::Ux => "ux",
            Var::Ut => "ut",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    /// Only produced by differentiation of `f^g` with non-constant `g`.
    Ln,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    /// Byte offset into the source string.
    pub pos: usize,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at column {}: {}", self.pos + 1, self.msg)
    }
}

impl std::error::Error for ParseError {}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v = text
                .parse::<f64>()
                .map_err(|_| ParseError { pos: start, msg: format!("bad number '{text}'") })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if "+-*/^()".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else {
            return Err(ParseError { pos: i, msg: format!("unexpected character '{c}'") });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: &'a [(usize, Tok)],
    pos: usize,
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { pos: self.here(), msg: msg.into() })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat('^') {
            return Ok(Expr::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let start = self.here();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return self.err("expected ')'");
                }
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                let func = match name.as_str() {
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "exp" => Some(Func::Exp),
                    _ => None,
                };
                if let Some(func) = func {
                    if !self.eat('(') {
                        return self.err(format!("expected '(' after {name}"));
                    }
                    let arg = self.expr()?;
                    if !self.eat(')') {
                        return self.err("expected ')'");
                    }
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                match name.as_str() {
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    "x" => Ok(Expr::Var(Var::X)),
                    "t" => Ok(Expr::Var(Var::T)),
                    "u" => Ok(Expr::Var(Var::U)),
                    "ux" => Ok(Expr::Var(Var::Ux)),
                    "ut" => Ok(Expr::Var(Var::Ut)),
                    _ => Err(ParseError { pos: start, msg: format!("unknown name '{name}'") }),
                }
            }
            Some(Tok::Op(c)) => self.err(format!("unexpected '{c}'")),
            None => self.err("unexpected end of expression"),
        }
    }
}

/// Values of `x, t, u, ux, ut` in that order.
pub type Env = [f64; 5];

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ParseError> {
        let toks = tokenize(src)?;
        let mut p = Parser { toks: &toks, pos: 0, end: src.len() };
        let e = p.expr()?;
        if p.pos != toks.len() {
            return p.err("trailing input");
        }
        Ok(e)
    }

    pub fn eval(&self, env: &Env) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(v) => env[v.index()],
            Expr::Neg(a) => -a.eval(env),
            Expr::Add(a, b) => a.eval(env) + b.eval(env),
            Expr::Sub(a, b) => a.eval(env) - b.eval(env),
            Expr::Mul(a, b) => a.eval(env) * b.eval(env),
            Expr::Div(a, b) => a.eval(env) / b.eval(env),
            Expr::Pow(a, b) => {
                let (base, e) = (a.eval(env), b.eval(env));
                if e.fract() == 0.0 && e.abs() <= i32::MAX as f64 {
                    base.powi(e as i32)
                } else {
                    base.powf(e)
                }
            }
            Expr::Call(f, a) => {
                let v = a.eval(env);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Ln => v.ln(),
                }
            }
        }
    }

    /// Variables the expression depends on, sorted.
    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_vars(&self, out: &mut Vec<Var>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => out.push(*v),
            Expr::Neg(a) | Expr::Call(_, a) => a.collect_vars(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    fn is_num(&self, v: f64) -> bool {
        matches!(self, Expr::Num(c) if *c == v)
    }

    fn num(&self) -> Option<f64> {
        match self {
            Expr::Num(c) => Some(*c),
            _ => None,
        }
    }

    fn depends_on(&self, v: Var) -> bool {
        self.vars().contains(&v)
    }

    /// `∂/∂v`, with constant folding of trivial terms.
    pub fn derivative(&self, v: Var) -> Expr {
        use Expr::*;
        match self {
            Num(_) => Num(0.0),
            Var(w) => Num(if *w == v { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.derivative(v)),
            Add(a, b) => add(a.derivative(v), b.derivative(v)),
            Sub(a, b) => sub(a.derivative(v), b.derivative(v)),
            Mul(a, b) => add(mul(a.derivative(v), (**b).clone()), mul((**a).clone(), b.derivative(v))),
            Div(a, b) => div(
                sub(mul(a.derivative(v), (**b).clone()), mul((**a).clone(), b.derivative(v))),
                pow((**b).clone(), Num(2.0)),
            ),
            Pow(a, b) => {
                if !b.depends_on(v) {
                    // b a^{b−1} a'
                    mul(mul((**b).clone(), pow((**a).clone(), sub((**b).clone(), Num(1.0)))), a.derivative(v))
                } else {
                    // a^b (b' ln a + b a'/a)
                    mul(
                        self.clone(),
                        add(
                            mul(b.derivative(v), Call(Func::Ln, a.clone())),
                            div(mul((**b).clone(), a.derivative(v)), (**a).clone()),
                        ),
                    )
                }
            }
            Call(f, a) => {
                let inner = a.derivative(v);
                let outer = match f {
                    Func::Sin => Call(Func::Cos, a.clone()),
                    Func::Cos => neg(Call(Func::Sin, a.clone())),
                    Func::Exp => self.clone(),
                    Func::Ln => div(Num(1.0), (**a).clone()),
                };
                mul(outer, inner)
            }
        }
    }
}

fn neg(a: Expr) -> Expr {
    match a.num() {
        Some(c) => Expr::Num(-c),
        None => Expr::Neg(Box::new(a)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    if a.is_num(0.0) {
        b
    } else if b.is_num(0.0) {
        a
    } else if let (Some(x), Some(y)) = (a.num(), b.num()) {
        Expr::Num(x + y)
    } else {
        Expr::Add(Box::new(a), Box::new(b))
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    if b.is_num(0.0) {
        a
    } else if a.is_num(0.0) {
        neg(b)
    } else if let (Some(x), Some(y)) = (a.num(), b.num()) {
        Expr::Num(x - y)
    } else {
        Expr::Sub(Box::new(a), Box::new(b))
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    if a.is_num(0.0) || b.is_num(0.0) {
        Expr::Num(0.0)
    } else if a.is_num(1.0) {
        b
    } else if b.is_num(1.0) {
        a
    } else if let (Some(x), Some(y)) = (a.num(), b.num()) {
        Expr::Num(x * y)
    } else {
        Expr::Mul(Box::new(a), Box::new(b))
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    if a.is_num(0.0) {
        Expr::Num(0.0)
    } else if b.is_num(1.0) {
        a
    } else {
        Expr::Div(Box::new(a), Box::new(b))
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    if b.is_num(1.0) {
        a
    } else if b.is_num(0.0) {
        Expr::Num(1.0)
    } else {
        Expr::Pow(Box::new(a), Box::new(b))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(v) => write!(f, "{}", v.name()),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, a) => {
                let name = match func {
                    Func::Sin => "sin",
                    Func::Cos => "cos",
                    Func::Exp => "exp",
                    Func::Ln => "ln",
                };
                write!(f, "{name}({a})")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn at(src: &str, env: Env) -> f64 {
        Expr::parse(src).unwrap().eval(&env)
    }

    #[test]
    fn precedence_and_associativity() {
        let z = [0.0; 5];
        assert_eq!(at("1 + 2 * 3", z), 7.0);
        assert_eq!(at("(1 + 2) * 3", z), 9.0);
        assert_eq!(at("2 ^ 3 ^ 2", z), 512.0);
        assert_eq!(at("-2 ^ 2", z), -4.0);
        assert_eq!(at("8 / 4 / 2", z), 1.0);
        assert_eq!(at("1 - 2 - 3", z), -4.0);
        assert_eq!(at("2 * -3", z), -6.0);
        assert_eq!(at("1.5e-1 * 2E1", z), 3.0);
        assert!((at("cos(pi)", z) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn variables() {
        let env = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(at("x + 10*t + 100*u + 1000*ux + 10000*ut", env), 54321.0);
        let e = Expr::parse("sin(u) - 0.5 + x*t").unwrap();
        assert_eq!(e.vars(), vec![Var::X, Var::T, Var::U]);
    }

    #[test]
    fn errors_report_position() {
        let e = Expr::parse("1 + y").unwrap_err();
        assert_eq!(e.pos, 4);
        assert!(e.msg.contains("unknown name"));
        assert_eq!(Expr::parse("sin x").unwrap_err().pos, 4);
        assert_eq!(Expr::parse("(1 + 2").unwrap_err().pos, 6);
        assert_eq!(Expr::parse("1 + 2)").unwrap_err().pos, 5);
        assert_eq!(Expr::parse("2 $ 3").unwrap_err().pos, 2);
        assert!(Expr::parse("").is_err());
        assert!(Expr::parse("tan(x)").is_err());
    }

    #[test]
    fn derivative_examples() {
        let d = Expr::parse("x^3 + 2*sin(x)").unwrap().derivative(Var::X);
        for &x in &[0.0, 0.7, -1.3] {
            let env = [x, 0.0, 0.0, 0.0, 0.0];
            assert!((d.eval(&env) - (3.0 * x * x + 2.0 * x.cos())).abs() < 1e-14);
        }
        let d = Expr::parse("exp(-t) * cos(2*t)").unwrap().derivative(Var::T);
        let t = 0.4_f64;
        let want = -(-t).exp() * (2.0 * t).cos() - 2.0 * (-t).exp() * (2.0 * t).sin();
        assert!((d.eval(&[0.0, t, 0.0, 0.0, 0.0]) - want).abs() < 1e-14);
        assert_eq!(Expr::parse("u*ut").unwrap().derivative(Var::X), Expr::Num(0.0));
    }

    proptest! {
        #[test]
        fn derivative_matches_finite_difference(
            c in -2.0..2.0_f64, k in 0.5..3.0_f64, x in 0.1..2.0_f64, which in 0usize..5
        ) {
            let src = match which {
                0 => format!("{c}*sin({k}*x) + x^2"),
                1 => format!("exp({c}*x)/(1 + x^2)"),
                2 => format!("x^x + {k}"),
                3 => format!("cos(x)^3 - {c}*x"),
                _ => format!("(x - {c})*(x + {k})/exp(x)"),
            };
            let e = Expr::parse(&src).unwrap();
            let d = e.derivative(Var::X);
            let h = 1e-5;
            let f = |x: f64| e.eval(&[x, 0.0, 0.0, 0.0, 0.0]);
            let fd = (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h);
            let exact = d.eval(&[x, 0.0, 0.0, 0.0, 0.0]);
            prop_assert!((fd - exact).abs() <= 1e-7 * (1.0 + exact.abs()), "{} vs {}", fd, exact);
        }

        #[test]
        fn display_round_trips(c in -5.0..5.0_f64, k in 1i32..4) {
            let e = Expr::parse(&format!("{c} * x ^ {k} - cos(t) / (1 + u^2)")).unwrap();
            let again = Expr::parse(&e.to_string()).unwrap();
            let env = [0.3, 0.7, 1.1, 0.0, 0.0];
            prop_assert_eq!(e.eval(&env), again.eval(&env));
        }
    }
}
