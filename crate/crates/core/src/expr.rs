//! Expression language for intrinsic functions supplied on the command line.
//!
//! Grammar: real literals, `s`, `+ - * /`, unary minus, parentheses,
//! `pow(e, c)` or `e^c` with a constant exponent, `log(e)` and `inv(e)`.
//! Poles of real-polynomial denominators and cuts of `log`/`pow` applied to
//! affine arguments are located exactly; anything else is reported as opaque
//! and left to the quadrature error estimate.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::slice_fn::{Domain, Excluded, IntrinsicSliceFunction, Ray};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    S,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, f64),
    Log(Box<Expr>),
    Inv(Box<Expr>),
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(c) => write!(f, "{c}"),
            Expr::S => write!(f, "s"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a}+{b})"),
            Expr::Sub(a, b) => write!(f, "({a}-{b})"),
            Expr::Mul(a, b) => write!(f, "({a}*{b})"),
            Expr::Div(a, b) => write!(f, "({a}/{b})"),
            Expr::Pow(a, c) => write!(f, "pow({a},{c})"),
            Expr::Log(a) => write!(f, "log({a})"),
            Expr::Inv(a) => write!(f, "inv({a})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
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
            let v = text
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad number {text:?}: {e}")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::Parse(format!("unexpected character {c:?} in {src:?}")));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, c: char) -> Result<()> {
        match self.next() {
            Some(Tok::Op(x)) if x == c => Ok(()),
            other => Err(Error::Parse(format!("expected '{c}', found {other:?}"))),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if c == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            let c = exp
                .constant()
                .ok_or_else(|| Error::Parse(format!("exponent after '^' must be constant, got {exp}")))?;
            return Ok(Expr::Pow(Box::new(base), c));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(Expr::Num(v)),
            Some(Tok::Op('(')) => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => match name.as_str() {
                "s" => Ok(Expr::S),
                "pow" => {
                    self.expect('(')?;
                    let base = self.expr()?;
                    self.expect(',')?;
                    let exp = self.expr()?;
                    self.expect(')')?;
                    let c = exp
                        .constant()
                        .ok_or_else(|| Error::Parse(format!("exponent of pow must be constant, got {exp}")))?;
                    Ok(Expr::Pow(Box::new(base), c))
                }
                "log" | "inv" => {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    Ok(if name == "log" {
                        Expr::Log(Box::new(arg))
                    } else {
                        Expr::Inv(Box::new(arg))
                    })
                }
                other => Err(Error::Parse(format!("unknown identifier {other:?}"))),
            },
            other => Err(Error::Parse(format!("unexpected token {other:?}"))),
        }
    }
}

/// Real polynomial with ascending coefficients.
type Poly = Vec<f64>;

fn poly_trim(mut p: Poly) -> Poly {
    while p.len() > 1 && *p.last().unwrap() == 0.0 {
        p.pop();
    }
    p
}

fn poly_add(a: &Poly, b: &Poly, sign: f64) -> Poly {
    let n = a.len().max(b.len());
    poly_trim(
        (0..n)
            .map(|k| a.get(k).copied().unwrap_or(0.0) + sign * b.get(k).copied().unwrap_or(0.0))
            .collect(),
    )
}

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    poly_trim(out)
}

fn poly_pow(a: &Poly, k: u32) -> Poly {
    (0..k).fold(vec![1.0], |acc, _| poly_mul(&acc, a))
}

/// Complex roots of a real polynomial via the companion matrix.
pub fn poly_roots(p: &[f64]) -> Vec<Complex64> {
    let scale = p.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mut p: Vec<f64> = p.to_vec();
    while p.len() > 1 && p.last().unwrap().abs() <= 1e-14 * scale {
        p.pop();
    }
    let deg = p.len().saturating_sub(1);
    if deg == 0 {
        return Vec::new();
    }
    let lead = p[deg];
    let mut c = DMatrix::<f64>::zeros(deg, deg);
    for k in 0..deg {
        c[(0, k)] = -p[deg - 1 - k] / lead;
        if k + 1 < deg {
            c[(k + 1, k)] = 1.0;
        }
    }
    c.complex_eigenvalues().iter().copied().collect()
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let toks = tokenize(src)?;
        if toks.is_empty() {
            return Err(Error::Parse("empty expression".into()));
        }
        let mut p = Parser { toks, pos: 0 };
        let e = p.expr()?;
        if p.pos < p.toks.len() {
            return Err(Error::Parse(format!("trailing input after {e}")));
        }
        Ok(e)
    }

    /// Value if the expression does not involve `s`.
    pub fn constant(&self) -> Option<f64> {
        let c = self.as_rational()?;
        (c.0.len() == 1 && c.1.len() == 1).then(|| c.0[0] / c.1[0])
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        match self {
            Expr::Num(c) => Complex64::from(*c),
            Expr::S => z,
            Expr::Neg(a) => -a.eval(z),
            Expr::Add(a, b) => a.eval(z) + b.eval(z),
            Expr::Sub(a, b) => a.eval(z) - b.eval(z),
            Expr::Mul(a, b) => a.eval(z) * b.eval(z),
            Expr::Div(a, b) => a.eval(z) / b.eval(z),
            Expr::Pow(a, c) => {
                let base = a.eval(z);
                if c.fract() == 0.0 && c.abs() <= 64.0 {
                    base.powi(*c as i32)
                } else {
                    (base.ln() * *c).exp()
                }
            }
            Expr::Log(a) => a.eval(z).ln(),
            Expr::Inv(a) => a.eval(z).inv(),
        }
    }

    /// `(numerator, denominator)` when the expression is a real rational function.
    pub fn as_rational(&self) -> Option<(Poly, Poly)> {
        Some(match self {
            Expr::Num(c) => (vec![*c], vec![1.0]),
            Expr::S => (vec![0.0, 1.0], vec![1.0]),
            Expr::Neg(a) => {
                let (n, d) = a.as_rational()?;
                (n.iter().map(|x| -x).collect(), d)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                let (n1, d1) = a.as_rational()?;
                let (n2, d2) = b.as_rational()?;
                let sign = if matches!(self, Expr::Add(..)) { 1.0 } else { -1.0 };
                if d1 == d2 {
                    (poly_add(&n1, &n2, sign), d1)
                } else {
                    (poly_add(&poly_mul(&n1, &d2), &poly_mul(&n2, &d1), sign), poly_mul(&d1, &d2))
                }
            }
            Expr::Mul(a, b) => {
                let (n1, d1) = a.as_rational()?;
                let (n2, d2) = b.as_rational()?;
                (poly_mul(&n1, &n2), poly_mul(&d1, &d2))
            }
            Expr::Div(a, b) => {
                let (n1, d1) = a.as_rational()?;
                let (n2, d2) = b.as_rational()?;
                (poly_mul(&n1, &d2), poly_mul(&d1, &n2))
            }
            Expr::Inv(a) => {
                let (n, d) = a.as_rational()?;
                (d, n)
            }
            Expr::Pow(a, c) if c.fract() == 0.0 && c.abs() <= 64.0 => {
                let (n, d) = a.as_rational()?;
                let k = c.abs() as u32;
                if *c >= 0.0 {
                    (poly_pow(&n, k), poly_pow(&d, k))
                } else {
                    (poly_pow(&d, k), poly_pow(&n, k))
                }
            }
            _ => return None,
        })
    }

    /// Poles and cuts that can be located, plus descriptions of opaque parts.
    pub fn singularities(&self) -> (Excluded, Vec<String>) {
        let mut ex = Excluded::default();
        let mut opaque = Vec::new();
        self.collect_singularities(&mut ex, &mut opaque);
        (ex, opaque)
    }

    fn zeros_of(&self, ex: &mut Excluded, opaque: &mut Vec<String>) {
        match self.as_rational() {
            Some((n, _)) => {
                for r in poly_roots(&n) {
                    ex.points.push(Complex64::new(r.re, r.im.abs()));
                }
            }
            None => opaque.push(format!("zeros of {self}")),
        }
    }

    fn cut_of(&self, ex: &mut Excluded, opaque: &mut Vec<String>) {
        match self.as_rational() {
            Some((n, d)) if d.len() == 1 && n.len() <= 2 => {
                let b = n[0] / d[0];
                let a = n.get(1).copied().unwrap_or(0.0) / d[0];
                if a == 0.0 {
                    if b <= 0.0 {
                        opaque.push(format!("{self} is a constant on the cut"));
                    }
                } else {
                    // a s + b <= 0
                    ex.rays.push(Ray {
                        start: -b / a,
                        toward_negative: a > 0.0,
                    });
                }
            }
            _ => opaque.push(format!("cut of log/pow applied to {self}")),
        }
    }

    fn collect_singularities(&self, ex: &mut Excluded, opaque: &mut Vec<String>) {
        match self {
            Expr::Num(_) | Expr::S => {}
            Expr::Neg(a) => a.collect_singularities(ex, opaque),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.collect_singularities(ex, opaque);
                b.collect_singularities(ex, opaque);
            }
            Expr::Div(a, b) => {
                a.collect_singularities(ex, opaque);
                b.collect_singularities(ex, opaque);
                b.zeros_of(ex, opaque);
            }
            Expr::Inv(a) => {
                a.collect_singularities(ex, opaque);
                a.zeros_of(ex, opaque);
            }
            Expr::Pow(a, c) => {
                a.collect_singularities(ex, opaque);
                if c.fract() == 0.0 && c.abs() <= 64.0 {
                    if *c < 0.0 {
                        a.zeros_of(ex, opaque);
                    }
                } else {
                    a.cut_of(ex, opaque);
                }
            }
            Expr::Log(a) => {
                a.collect_singularities(ex, opaque);
                a.cut_of(ex, opaque);
            }
        }
    }

    /// The intrinsic function with the located singularities removed from its domain.
    pub fn to_intrinsic(&self) -> IntrinsicSliceFunction {
        let (ex, _) = self.singularities();
        let e = self.clone();
        IntrinsicSliceFunction::new(move |z| e.eval(z), Domain::whole().without(&ex)).labelled(self.to_string())
    }
}

/// Parses an expression into an intrinsic slice function.
pub fn parse_intrinsic(src: &str) -> Result<IntrinsicSliceFunction> {
    Ok(Expr::parse(src)?.to_intrinsic())
}
