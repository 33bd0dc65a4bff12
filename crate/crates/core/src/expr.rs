//! Whitelisted expression grammar for potentials, ground states and
//! diffusion coefficients.
//!
//! The grammar is closed under differentiation: sums, products, ratios,
//! polynomials, `exp` of a quadratic, trigonometric/hyperbolic atoms with
//! polynomial argument, and real powers of polynomials. A tabulated atom
//! carries numerically constructed ground states (see `model`).

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("expression not in the whitelist: {0}")]
    Whitelist(String),
    #[error("derivative of order {0} not available for tabulated function")]
    MissingDerivative(u32),
}

/// Numerically tabulated even function on `[-xmax, xmax]` with derivatives
/// up to order 3 stored on a uniform grid. Evaluation uses cubic Hermite
/// interpolation between nodes.
pub struct Tabulated {
    pub name: String,
    step: f64,
    xmax: f64,
    /// rows[k][i] = k-th derivative at node i (x = i * step), k = 0..=3
    rows: [Vec<f64>; 4],
}

impl Tabulated {
    pub fn new(name: String, step: f64, rows: [Vec<f64>; 4]) -> Self {
        let xmax = step * (rows[0].len() - 1) as f64;
        Tabulated { name, step, xmax, rows }
    }

    pub fn xmax(&self) -> f64 {
        self.xmax
    }

    /// k-th derivative of the even extension at x.
    fn eval(&self, order: u32, x: f64) -> f64 {
        let sign = if order % 2 == 1 && x < 0.0 { -1.0 } else { 1.0 };
        let x = x.abs().min(self.xmax);
        let k = order as usize;
        let i = ((x / self.step) as usize).min(self.rows[0].len() - 2);
        let s = (x - i as f64 * self.step) / self.step;
        let (f0, f1) = (self.rows[k][i], self.rows[k][i + 1]);
        if k + 1 <= 3 {
            // Hermite cubic with derivative row k+1
            let (d0, d1) = (self.rows[k + 1][i] * self.step, self.rows[k + 1][i + 1] * self.step);
            let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
            let h10 = s * (1.0 - s) * (1.0 - s);
            let h01 = s * s * (3.0 - 2.0 * s);
            let h11 = s * s * (s - 1.0);
            sign * (h00 * f0 + h10 * d0 + h01 * f1 + h11 * d1)
        } else {
            sign * (f0 + s * (f1 - f0))
        }
    }
}

impl fmt::Debug for Tabulated {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tabulated({}, n={}, xmax={})", self.name, self.rows[0].len(), self.xmax)
    }
}

#[derive(Debug, Clone)]
pub enum Expr {
    /// Monomial coefficients in x, ascending degree.
    Poly(Vec<f64>),
    Sum(Vec<Expr>),
    Prod(Vec<Expr>),
    Ratio(Box<Expr>, Box<Expr>),
    /// Real power of a polynomial base.
    Pow(Box<Expr>, f64),
    Exp(Box<Expr>),
    Cos(Box<Expr>),
    Sin(Box<Expr>),
    Cosh(Box<Expr>),
    Sinh(Box<Expr>),
    Tanh(Box<Expr>),
    /// k-th derivative of a tabulated function.
    Tab(Arc<Tabulated>, u32),
}

fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck)
}

fn poly_deriv(c: &[f64]) -> Vec<f64> {
    if c.len() <= 1 {
        return vec![0.0];
    }
    c.iter().enumerate().skip(1).map(|(j, &cj)| j as f64 * cj).collect()
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, &ai) in a.iter().enumerate() {
        out[i] += ai;
    }
    for (i, &bi) in b.iter().enumerate() {
        out[i] += bi;
    }
    out
}

fn poly_trim(mut c: Vec<f64>) -> Vec<f64> {
    while c.len() > 1 && *c.last().unwrap() == 0.0 {
        c.pop();
    }
    c
}

impl Expr {
    pub fn constant(v: f64) -> Expr {
        Expr::Poly(vec![v])
    }

    pub fn var() -> Expr {
        Expr::Poly(vec![0.0, 1.0])
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Poly(c) if c.iter().all(|&v| v == 0.0))
    }

    /// Monomial coefficients if the expression is (a composition reducible
    /// to) a polynomial.
    pub fn as_poly(&self) -> Option<Vec<f64>> {
        match self {
            Expr::Poly(c) => Some(c.clone()),
            Expr::Sum(terms) => {
                let mut acc = vec![0.0];
                for t in terms {
                    acc = poly_add(&acc, &t.as_poly()?);
                }
                Some(poly_trim(acc))
            }
            Expr::Prod(factors) => {
                let mut acc = vec![1.0];
                for f in factors {
                    acc = poly_mul(&acc, &f.as_poly()?);
                }
                Some(poly_trim(acc))
            }
            Expr::Pow(base, e) => {
                let n = *e as i64;
                if n as f64 == *e && n >= 0 {
                    let b = base.as_poly()?;
                    let mut acc = vec![1.0];
                    for _ in 0..n {
                        acc = poly_mul(&acc, &b);
                    }
                    Some(poly_trim(acc))
                } else {
                    None
                }
            }
            _ => None,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Expr::Poly(c) => poly_eval(c, x),
            Expr::Sum(terms) => terms.iter().map(|t| t.eval(x)).sum(),
            Expr::Prod(factors) => factors.iter().map(|f| f.eval(x)).product(),
            Expr::Ratio(num, den) => num.eval(x) / den.eval(x),
            Expr::Pow(base, e) => base.eval(x).powf(*e),
            Expr::Exp(a) => a.eval(x).exp(),
            Expr::Cos(a) => a.eval(x).cos(),
            Expr::Sin(a) => a.eval(x).sin(),
            Expr::Cosh(a) => a.eval(x).cosh(),
            Expr::Sinh(a) => a.eval(x).sinh(),
            Expr::Tanh(a) => a.eval(x).tanh(),
            Expr::Tab(t, k) => t.eval(*k, x),
        }
    }

    pub fn derivative(&self) -> Result<Expr, ExprError> {
        let d = match self {
            Expr::Poly(c) => Expr::Poly(poly_deriv(c)),
            Expr::Sum(terms) => {
                let mut out = Vec::new();
                for t in terms {
                    let dt = t.derivative()?;
                    if !dt.is_zero() {
                        out.push(dt);
                    }
                }
                Expr::Sum(out)
            }
            Expr::Prod(factors) => {
                let mut terms = Vec::new();
                for i in 0..factors.len() {
                    let di = factors[i].derivative()?;
                    if di.is_zero() {
                        continue;
                    }
                    let mut prod = vec![di];
                    for (j, f) in factors.iter().enumerate() {
                        if j != i {
                            prod.push(f.clone());
                        }
                    }
                    terms.push(Expr::Prod(prod));
                }
                Expr::Sum(terms)
            }
            Expr::Ratio(num, den) => {
                let dn = num.derivative()?;
                let dd = den.derivative()?;
                // (n'd - nd') / d^2
                let top = Expr::Sum(vec![
                    Expr::Prod(vec![dn, (**den).clone()]),
                    Expr::Prod(vec![Expr::constant(-1.0), (**num).clone(), dd]),
                ]);
                Expr::Ratio(Box::new(top), Box::new(Expr::Prod(vec![(**den).clone(), (**den).clone()])))
            }
            Expr::Pow(base, e) => {
                let db = base.derivative()?;
                Expr::Prod(vec![Expr::constant(*e), db, Expr::Pow(base.clone(), e - 1.0)])
            }
            Expr::Exp(a) => Expr::Prod(vec![a.derivative()?, self.clone()]),
            Expr::Cos(a) => {
                Expr::Prod(vec![Expr::constant(-1.0), a.derivative()?, Expr::Sin(a.clone())])
            }
            Expr::Sin(a) => Expr::Prod(vec![a.derivative()?, Expr::Cos(a.clone())]),
            Expr::Cosh(a) => Expr::Prod(vec![a.derivative()?, Expr::Sinh(a.clone())]),
            Expr::Sinh(a) => Expr::Prod(vec![a.derivative()?, Expr::Cosh(a.clone())]),
            Expr::Tanh(a) => {
                // d tanh = a' (1 - tanh^2)
                let t = Expr::Tanh(a.clone());
                Expr::Prod(vec![
                    a.derivative()?,
                    Expr::Sum(vec![
                        Expr::constant(1.0),
                        Expr::Prod(vec![Expr::constant(-1.0), t.clone(), t]),
                    ]),
                ])
            }
            Expr::Tab(t, k) => {
                if *k >= 3 {
                    return Err(ExprError::MissingDerivative(k + 1));
                }
                Expr::Tab(t.clone(), k + 1)
            }
        };
        Ok(d)
    }
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: &str) -> Result<T, ExprError> {
        Err(ExprError::Parse { pos: self.pos, msg: msg.into() })
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

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    terms.push(self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    terms.push(Expr::Prod(vec![Expr::constant(-1.0), self.term()?]));
                }
                _ => break,
            }
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Expr::Sum(terms) })
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    acc = Expr::Prod(vec![acc, self.factor()?]);
                }
                Some(b'/') => {
                    self.pos += 1;
                    acc = Expr::Ratio(Box::new(acc), Box::new(self.factor()?));
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let neg = if self.peek() == Some(b'-') {
                self.pos += 1;
                true
            } else {
                false
            };
            let e = match self.atom()? {
                Expr::Poly(c) if c.len() == 1 => {
                    if neg {
                        -c[0]
                    } else {
                        c[0]
                    }
                }
                _ => return self.err("exponent must be a number"),
            };
            let n = e as i64;
            if n as f64 == e && (0..=64).contains(&n) {
                if let Some(p) = base.as_poly() {
                    let mut acc = vec![1.0];
                    for _ in 0..n {
                        acc = poly_mul(&acc, &p);
                    }
                    return Ok(Expr::Poly(poly_trim(acc)));
                }
                let mut acc = Expr::constant(1.0);
                for _ in 0..n {
                    acc = Expr::Prod(vec![acc, base.clone()]);
                }
                return Ok(acc);
            }
            if base.as_poly().is_none() {
                return Err(ExprError::Whitelist(
                    "non-integer power requires a polynomial base".into(),
                ));
            }
            return Ok(Expr::Pow(Box::new(base), e));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Expr::Prod(vec![Expr::constant(-1.0), self.factor()?]))
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return self.err("expected ')'");
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            _ => self.err("unexpected end of expression"),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            if c.is_ascii_digit() || c == b'.' {
                self.pos += 1;
            } else if (c == b'e' || c == b'E') && self.pos > start {
                self.pos += 1;
                if matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')) {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match s.parse::<f64>() {
            Ok(v) => Ok(Expr::constant(v)),
            Err(_) => self.err("malformed number"),
        }
    }

    fn ident(&mut self) -> Result<Expr, ExprError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
        match name.as_str() {
            "x" => Ok(Expr::var()),
            "pi" => Ok(Expr::constant(std::f64::consts::PI)),
            "exp" | "cos" | "sin" | "cosh" | "sinh" | "tanh" | "sqrt" => {
                if self.peek() != Some(b'(') {
                    return self.err("expected '(' after function name");
                }
                self.pos += 1;
                let arg = self.expr()?;
                if self.peek() != Some(b')') {
                    return self.err("expected ')'");
                }
                self.pos += 1;
                let poly = arg.as_poly();
                match name.as_str() {
                    "exp" => {
                        let p = poly.ok_or_else(|| {
                            ExprError::Whitelist("exp argument must be polynomial".into())
                        })?;
                        if p.len() > 3 {
                            return Err(ExprError::Whitelist(
                                "exp argument must be a quadratic polynomial".into(),
                            ));
                        }
                        Ok(Expr::Exp(Box::new(Expr::Poly(p))))
                    }
                    "sqrt" => {
                        let p = poly.ok_or_else(|| {
                            ExprError::Whitelist("sqrt argument must be polynomial".into())
                        })?;
                        Ok(Expr::Pow(Box::new(Expr::Poly(p)), 0.5))
                    }
                    other => {
                        let p = poly.ok_or_else(|| {
                            ExprError::Whitelist(format!("{other} argument must be polynomial"))
                        })?;
                        let inner = Box::new(Expr::Poly(p));
                        Ok(match other {
                            "cos" => Expr::Cos(inner),
                            "sin" => Expr::Sin(inner),
                            "cosh" => Expr::Cosh(inner),
                            "sinh" => Expr::Sinh(inner),
                            "tanh" => Expr::Tanh(inner),
                            _ => unreachable!(),
                        })
                    }
                }
            }
            _ => self.err(&format!("unknown identifier '{name}'")),
        }
    }
}

/// Parse a whitelisted expression in the variable `x`.
pub fn parse(src: &str) -> Result<Expr, ExprError> {
    let mut p = Parser { src: src.as_bytes(), pos: 0 };
    let e = p.expr()?;
    if p.peek().is_some() {
        return p.err("trailing input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parse_and_eval() {
        let e = parse("1 + 2*x^2 - cos(x)").unwrap();
        assert_relative_eq!(e.eval(0.5), 1.0 + 0.5 - 0.5f64.cos());
    }

    #[test]
    fn sqrt_derivative() {
        // d/dx sqrt(1+x^2) = x / sqrt(1+x^2)
        let e = parse("sqrt(1 + x^2)").unwrap();
        let d = e.derivative().unwrap();
        for &x in &[-2.0f64, -0.3, 0.0, 1.7] {
            let expect = x / (1.0 + x * x).sqrt();
            assert_relative_eq!(d.eval(x), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn tanh_second_derivative() {
        let e = parse("tanh(2*x)").unwrap();
        let d2 = e.derivative().unwrap().derivative().unwrap();
        let x = 0.4f64;
        let t = (2.0 * x).tanh();
        let expect = -8.0 * t * (1.0 - t * t);
        assert_relative_eq!(d2.eval(x), expect, epsilon = 1e-12);
    }

    #[test]
    fn exp_whitelist_rejects_cubic() {
        assert!(matches!(parse("exp(x^3)"), Err(ExprError::Whitelist(_))));
    }

    #[test]
    fn polynomial_collapse() {
        let e = parse("(1+x)^3 - x^3").unwrap();
        let p = e.as_poly().unwrap();
        assert_eq!(p, vec![1.0, 3.0, 3.0]);
    }

    #[test]
    fn ratio_derivative() {
        // d/dx (x / (1+x^2)) = (1 - x^2)/(1+x^2)^2
        let e = parse("x / (1+x^2)").unwrap();
        let d = e.derivative().unwrap();
        let x = 0.7f64;
        let expect = (1.0 - x * x) / (1.0 + x * x).powi(2);
        assert_relative_eq!(d.eval(x), expect, epsilon = 1e-12);
    }
}
