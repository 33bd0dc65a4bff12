//! Heat-coefficient recursion in exact polynomial arithmetic.
//!
//! With the potential recentred at the base point y and u = x - y, the
//! coefficients of the small-time expansion satisfy
//!
//!   a_0 = 1,   r a_r + u a_r' = a_{r-1}'' - W a_{r-1},
//!
//! which determines each monomial coefficient of a_r by division: if the
//! right-hand side has coefficient g_j at u^j then a_r has g_j / (r + j).
//! The recursion is exact in floating point up to rounding, so the only
//! source of error downstream is the resummation itself.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ScalarField;

/// Maximum admissible degree of the highest-order coefficient polynomial;
/// the recursion grows degree by deg(W) each order.
const MAX_TOTAL_DEGREE: usize = 512;

#[derive(Debug, Error)]
pub enum CoeffError {
    #[error("degree overflow: potential degree {potential_degree} at r_max {r_max} exceeds the cap of {MAX_TOTAL_DEGREE}")]
    DegreeOverflow { potential_degree: usize, r_max: usize },
    #[error("polynomial fit of the potential did not converge (max error {0:.3e})")]
    FitDiverged(f64),
    #[error("growth fit needs at least 3 nonzero coefficients in the window (found {0})")]
    AllZero(usize),
    #[error("coefficient sequence grows faster than r! (fit slope {0:.3e} > 0)")]
    Unbounded(f64),
    #[error("fit window [{0}, {1}] exceeds the table (r_max {2})")]
    WindowOutOfRange(usize, usize, usize),
}

/// Dense polynomial in powers of (x - center).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialRep {
    pub coefficients: Vec<f64>,
    pub center: f64,
}

impl PolynomialRep {
    pub fn new(coefficients: Vec<f64>, center: f64) -> Self {
        PolynomialRep { coefficients, center }
    }

    pub fn constant(v: f64, center: f64) -> Self {
        PolynomialRep::new(vec![v], center)
    }

    pub fn degree(&self) -> usize {
        let mut d = self.coefficients.len().saturating_sub(1);
        while d > 0 && self.coefficients[d] == 0.0 {
            d -= 1;
        }
        d
    }

    pub fn eval(&self, x: f64) -> f64 {
        let u = x - self.center;
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * u + c)
    }

    pub fn derivative(&self) -> PolynomialRep {
        if self.coefficients.len() <= 1 {
            return PolynomialRep::constant(0.0, self.center);
        }
        let c = self
            .coefficients
            .iter()
            .enumerate()
            .skip(1)
            .map(|(j, &cj)| j as f64 * cj)
            .collect();
        PolynomialRep::new(c, self.center)
    }

    pub fn mul(&self, other: &PolynomialRep) -> PolynomialRep {
        assert_eq!(self.center, other.center, "polynomial centers differ");
        let n = self.coefficients.len() + other.coefficients.len() - 1;
        // compensated accumulation: products of like sign can still cancel
        // heavily in the recursion, so sum each convolution bin with Kahan
        let mut out = vec![0.0f64; n];
        let mut comp = vec![0.0f64; n];
        for (i, &ai) in self.coefficients.iter().enumerate() {
            for (j, &bj) in other.coefficients.iter().enumerate() {
                let y = ai * bj - comp[i + j];
                let t = out[i + j] + y;
                comp[i + j] = (t - out[i + j]) - y;
                out[i + j] = t;
            }
        }
        PolynomialRep::new(out, self.center)
    }

    pub fn sub(&self, other: &PolynomialRep) -> PolynomialRep {
        assert_eq!(self.center, other.center, "polynomial centers differ");
        let n = self.coefficients.len().max(other.coefficients.len());
        let mut out = vec![0.0; n];
        for (i, &c) in self.coefficients.iter().enumerate() {
            out[i] += c;
        }
        for (i, &c) in other.coefficients.iter().enumerate() {
            out[i] -= c;
        }
        PolynomialRep::new(out, self.center)
    }

    /// Taylor shift to a new center (synthetic division by (x - new)).
    pub fn recenter(&self, new_center: f64) -> PolynomialRep {
        let shift = new_center - self.center;
        let mut c = self.coefficients.clone();
        let n = c.len();
        for i in 0..n.saturating_sub(1) {
            for j in (i..n - 1).rev() {
                let (next, cur) = (c[j + 1], c[j]);
                c[j] = cur + shift * next;
            }
        }
        PolynomialRep::new(c, new_center)
    }
}

/// Polynomial model of a potential around a base point. Polynomials pass
/// through exactly (recentred); anything else is fitted by Chebyshev
/// interpolation on [center - halfwidth, center + halfwidth].
pub fn approximate_potential(
    w: &ScalarField,
    center: f64,
    degree: usize,
    halfwidth: f64,
) -> Result<PolynomialRep, CoeffError> {
    if let Some(c) = w.expr.as_poly() {
        return Ok(PolynomialRep::new(c, 0.0).recenter(center));
    }
    let fit = |deg: usize| chebyshev_fit(w, center, deg, halfwidth);
    let full = fit(degree);
    let half = fit(degree / 2);
    // errors on a dense grid; the full-degree fit must both be small and
    // improve on the half-degree fit, otherwise the family is not converging
    let scale = (0..201)
        .map(|i| w.eval(center - halfwidth + 2.0 * halfwidth * i as f64 / 200.0).abs())
        .fold(0.0f64, f64::max)
        .max(1.0);
    let err = |p: &PolynomialRep| {
        (0..201)
            .map(|i| {
                let x = center - halfwidth + 2.0 * halfwidth * i as f64 / 200.0;
                (p.eval(x) - w.eval(x)).abs()
            })
            .fold(0.0f64, f64::max)
    };
    let (e_full, e_half) = (err(&full), err(&half));
    // a full-degree fit at rounding level is accepted outright; otherwise it
    // must both be small relative to the potential's size and clearly
    // improve on the half-degree fit
    if e_full > 1e-9 * scale && (e_full > 1e-4 * scale || e_full > 0.5 * e_half) {
        return Err(CoeffError::FitDiverged(e_full));
    }
    Ok(full)
}

fn chebyshev_fit(w: &ScalarField, center: f64, degree: usize, halfwidth: f64) -> PolynomialRep {
    let n = degree + 1;
    // Chebyshev coefficients from values at the Gauss nodes
    let vals: Vec<f64> = (0..n)
        .map(|k| {
            let t = std::f64::consts::PI * (k as f64 + 0.5) / n as f64;
            w.eval(center + halfwidth * t.cos())
        })
        .collect();
    let coefs: Vec<f64> = (0..n)
        .map(|j| {
            let s: f64 = (0..n)
                .map(|k| {
                    let t = std::f64::consts::PI * (k as f64 + 0.5) / n as f64;
                    vals[k] * (j as f64 * t).cos()
                })
                .sum();
            s * if j == 0 { 1.0 } else { 2.0 } / n as f64
        })
        .collect();
    // convert sum c_j T_j(u/h) to monomials in u via the three-term recurrence
    let mut acc = vec![0.0f64; n];
    let mut t_prev = vec![1.0]; // T_0
    let mut t_cur = vec![0.0, 1.0]; // T_1
    for (j, &cj) in coefs.iter().enumerate() {
        let t: &[f64] = match j {
            0 => &t_prev,
            1 => &t_cur,
            _ => {
                // T_{j} = 2 s T_{j-1} - T_{j-2}
                let mut next = vec![0.0; t_cur.len() + 1];
                for (i, &c) in t_cur.iter().enumerate() {
                    next[i + 1] += 2.0 * c;
                }
                for (i, &c) in t_prev.iter().enumerate() {
                    next[i] -= c;
                }
                t_prev = std::mem::replace(&mut t_cur, next);
                &t_cur
            }
        };
        for (i, &c) in t.iter().enumerate() {
            acc[i] += cj * c;
        }
    }
    // substitute s = u / halfwidth
    for (i, c) in acc.iter_mut().enumerate() {
        *c /= halfwidth.powi(i as i32);
    }
    PolynomialRep::new(acc, center)
}

/// Run the recursion up to order `r_max` for a polynomial potential
/// centred at the base point. Element r of the result is a_r.
pub fn expansion_coefficients(
    w: &PolynomialRep,
    r_max: usize,
) -> Result<Vec<PolynomialRep>, CoeffError> {
    let dw = w.degree();
    if dw * r_max > MAX_TOTAL_DEGREE {
        return Err(CoeffError::DegreeOverflow { potential_degree: dw, r_max });
    }
    let mut orders = Vec::with_capacity(r_max + 1);
    orders.push(PolynomialRep::constant(1.0, w.center));
    for r in 1..=r_max {
        let prev: &PolynomialRep = &orders[r - 1];
        let g = prev.derivative().derivative().sub(&w.mul(prev));
        let c: Vec<f64> = g
            .coefficients
            .iter()
            .enumerate()
            .map(|(j, &gj)| gj / (r + j) as f64)
            .collect();
        orders.push(PolynomialRep::new(c, w.center));
    }
    Ok(orders)
}

/// Table of expansion coefficients at a fixed base point, serializable as
/// JSON for the command-line pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientTable {
    /// base point the polynomials are centred at
    pub y: f64,
    /// interval of validity of the polynomial potential model
    pub interval: (f64, f64),
    pub r_max: usize,
    /// potential coefficients in powers of (x - y)
    pub potential: Vec<f64>,
    /// orders[r] = coefficients of a_r in powers of (x - y)
    pub orders: Vec<Vec<f64>>,
}

impl CoefficientTable {
    pub fn build(
        w: &ScalarField,
        y: f64,
        degree: usize,
        halfwidth: f64,
        r_max: usize,
    ) -> Result<CoefficientTable, CoeffError> {
        let wp = approximate_potential(w, y, degree, halfwidth)?;
        let orders = expansion_coefficients(&wp, r_max)?;
        Ok(CoefficientTable {
            y,
            interval: (y - halfwidth, y + halfwidth),
            r_max,
            potential: wp.coefficients,
            orders: orders.into_iter().map(|p| p.coefficients).collect(),
        })
    }

    pub fn order(&self, r: usize) -> PolynomialRep {
        PolynomialRep::new(self.orders[r].clone(), self.y)
    }

    /// Sequence a_r(x) for r = 0..=r_max at a fixed evaluation point.
    pub fn sequence_at(&self, x: f64) -> Vec<f64> {
        (0..=self.r_max).map(|r| self.order(r).eval(x)).collect()
    }
}

/// a_r evaluated at x.
pub fn coefficient_at(table: &CoefficientTable, r: usize, x: f64) -> f64 {
    table.order(r).eval(x)
}

/// Fitted factorial growth bound |a_r| <= K r! / kappa^r.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GevreyEstimate {
    pub kappa: f64,
    pub big_k: f64,
    pub window: (usize, usize),
    /// max over the window of log(|a_r| kappa^r / (K r!)); non-positive by
    /// construction since K is inflated to cover every point
    pub residual_max: f64,
}

fn ln_factorial(r: usize) -> f64 {
    (1..=r).map(|k| (k as f64).ln()).sum()
}

/// Least-squares fit of log |a_r| - log r! over the window, skipping
/// coefficients that vanish identically (odd orders at symmetric points).
pub fn gevrey_fit(seq: &[f64], window: (usize, usize)) -> Result<GevreyEstimate, CoeffError> {
    let (lo, hi) = window;
    if hi >= seq.len() || lo >= hi {
        return Err(CoeffError::WindowOutOfRange(lo, hi, seq.len().saturating_sub(1)));
    }
    let pts: Vec<(f64, f64)> = (lo..=hi)
        .filter(|&r| seq[r].abs() > 1e-300)
        .map(|r| (r as f64, seq[r].abs().ln() - ln_factorial(r)))
        .collect();
    if pts.len() < 3 {
        return Err(CoeffError::AllZero(pts.len()));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    if slope > 1e-9 {
        return Err(CoeffError::Unbounded(slope));
    }
    let kappa = (-slope).exp();
    // inflate K so the bound holds at every fitted point:
    // ln K = max_r (z_r + r ln kappa)
    let ln_k = pts
        .iter()
        .map(|&(r, z)| z + r * kappa.ln())
        .fold(f64::NEG_INFINITY, f64::max);
    let big_k = ln_k.exp();
    let residual_max = pts
        .iter()
        .map(|&(r, z)| z + r * kappa.ln() - ln_k)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GevreyEstimate { kappa, big_k, window, residual_max })
}

/// Window-stability diagnostic: relative spread of kappa between two
/// overlapping fit windows.
pub fn gevrey_window_spread(
    seq: &[f64],
    w1: (usize, usize),
    w2: (usize, usize),
) -> Result<f64, CoeffError> {
    let a = gevrey_fit(seq, w1)?;
    let b = gevrey_fit(seq, w2)?;
    Ok((a.kappa - b.kappa).abs() / a.kappa.abs().max(b.kappa.abs()))
}

/// Convenience: potential evaluated through the quadrature-free table is
/// sometimes needed on a grid; kept here so callers do not rebuild fields.
pub fn table_potential_max(table: &CoefficientTable, n: usize) -> f64 {
    let p = PolynomialRep::new(table.potential.clone(), table.y);
    (0..n)
        .map(|i| {
            let x = table.interval.0
                + (table.interval.1 - table.interval.0) * i as f64 / (n - 1) as f64;
            p.eval(x).abs()
        })
        .fold(0.0, f64::max)
}
