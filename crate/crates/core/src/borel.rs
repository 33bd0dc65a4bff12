//! Borel transform, Pade continuation and Laplace resummation.
//!
//! A factorially divergent sequence a_r is mapped to its Borel transform
//! b_r = a_r / r!, the transform is continued off its disc of convergence
//! by a rational (Pade) approximant g, and the resummed value at time t is
//!
//!   f(t) = (1/t) int_0^inf g(tau) e^{-tau/t} dtau
//!        = int_0^inf g(t u) e^{-u} du,
//!
//! evaluated with Gauss-Laguerre quadrature. The Hankel system for the
//! Pade denominator is solved after geometric rescaling of the
//! coefficients; without it the system's condition number reflects the
//! coefficient decay rather than genuine degeneracy.

use num_complex::Complex64;
use thiserror::Error;

use crate::quad;

#[derive(Debug, Error)]
pub enum BorelError {
    #[error("need at least {need} coefficients for order ({m}, {n}), got {got}")]
    TooFewCoefficients { m: usize, n: usize, need: usize, got: usize },
    #[error("Hankel system is numerically degenerate (condition {condition:.3e})")]
    DegenerateHankel { condition: f64 },
    #[error("pole at distance {clearance:.3e} from the Laplace contour")]
    PoleOnContour { clearance: f64 },
    #[error("Laplace quadrature did not converge (last relative change {0:.3e})")]
    QuadratureNotConverged(f64),
    #[error("empty coefficient sequence")]
    Empty,
}

/// b_r = a_r / r!, computed by successive division so large orders do not
/// overflow through an explicit factorial.
pub fn borel_transform(a: &[f64]) -> Vec<f64> {
    let mut fact = 1.0f64;
    a.iter()
        .enumerate()
        .map(|(r, &ar)| {
            if r > 0 {
                fact *= r as f64;
            }
            ar / fact
        })
        .collect()
}

/// Rational continuation of a power series, with its pole set.
#[derive(Debug, Clone)]
pub struct RationalApproximant {
    /// numerator coefficients, ascending
    pub num: Vec<f64>,
    /// denominator coefficients, ascending, den[0] = 1
    pub den: Vec<f64>,
    pub order: (usize, usize),
    pub poles: Vec<Complex64>,
    /// distance from the nearest pole to the contour [0, inf)
    pub pole_clearance: f64,
}

impl RationalApproximant {
    pub fn eval(&self, tau: f64) -> f64 {
        let horner = |c: &[f64]| c.iter().rev().fold(0.0, |acc, &ck| acc * tau + ck);
        horner(&self.num) / horner(&self.den)
    }
}

fn contour_distance(z: Complex64) -> f64 {
    if z.re >= 0.0 {
        z.im.abs()
    } else {
        z.norm()
    }
}

/// Roots of an ascending-coefficient polynomial via the companion matrix.
fn poly_roots(c: &[f64]) -> Vec<Complex64> {
    let mut c = c.to_vec();
    while c.len() > 1 && c.last().unwrap().abs() < 1e-300 {
        c.pop();
    }
    let n = c.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let lead = c[n];
    let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        m[(i, n - 1)] = -c[i] / lead;
    }
    m.complex_eigenvalues().iter().copied().collect()
}

/// Pade approximant [m/n] of the series with coefficients `b`.
///
/// The denominator is the solution of the Hankel system
/// sum_{k=0}^n q_k b_{m+j-k} = 0 (j = 1..n) with q_0 = 1; the system is
/// solved by SVD after the geometric rescaling b_r -> b_r lambda^r.
pub fn pade_continue(b: &[f64], m: usize, n: usize) -> Result<RationalApproximant, BorelError> {
    let need = m + n + 1;
    if b.len() < need {
        return Err(BorelError::TooFewCoefficients { m, n, need, got: b.len() });
    }
    if b.is_empty() {
        return Err(BorelError::Empty);
    }

    // least-squares slope of ln |b_r| over the used range gives the
    // geometric scale; lambda = exp(-slope) flattens the sequence
    let pts: Vec<(f64, f64)> = b[..need]
        .iter()
        .enumerate()
        .filter(|(_, &v)| v.abs() > 1e-300)
        .map(|(r, &v)| (r as f64, v.abs().ln()))
        .collect();
    let lambda = if pts.len() >= 2 {
        let np = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (-(np * sxy - sx * sy) / (np * sxx - sx * sx)).exp()
    } else {
        1.0
    };
    let lambda = if lambda.is_finite() && lambda > 0.0 { lambda } else { 1.0 };
    let bs: Vec<f64> = b[..need]
        .iter()
        .enumerate()
        .map(|(r, &v)| v * lambda.powi(r as i32))
        .collect();

    let mut den_scaled = vec![1.0];
    if n > 0 {
        let bi = |i: isize| if i < 0 { 0.0 } else { bs[i as usize] };
        let mut h = nalgebra::DMatrix::<f64>::zeros(n, n);
        let mut rhs = nalgebra::DVector::<f64>::zeros(n);
        for j in 1..=n {
            for k in 1..=n {
                h[(j - 1, k - 1)] = bi(m as isize + j as isize - k as isize);
            }
            rhs[j - 1] = -bs[m + j];
        }
        let svd = h.svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if condition > 1e12 {
            return Err(BorelError::DegenerateHankel { condition });
        }
        let q = svd.solve(&rhs, 0.0).expect("svd solve");
        den_scaled.extend(q.iter().copied());
    }
    let num_scaled: Vec<f64> = (0..=m)
        .map(|i| {
            (0..=i.min(n)).map(|k| den_scaled[k] * bs[i - k]).sum::<f64>()
        })
        .collect();

    // undo the scaling: the scaled approximant represents g(lambda tau),
    // so substitute tau -> tau / lambda
    let num: Vec<f64> =
        num_scaled.iter().enumerate().map(|(i, &c)| c * lambda.powi(-(i as i32))).collect();
    let den: Vec<f64> =
        den_scaled.iter().enumerate().map(|(k, &c)| c * lambda.powi(-(k as i32))).collect();

    let poles = poly_roots(&den);
    let pole_clearance = poles
        .iter()
        .map(|&z| contour_distance(z))
        .fold(f64::INFINITY, f64::min);
    Ok(RationalApproximant { num, den, order: (m, n), poles, pole_clearance })
}

/// Result of one Laplace resummation.
#[derive(Debug, Clone)]
pub struct LaplaceResult {
    pub value: f64,
    /// last relative change under node doubling
    pub quad_error: f64,
    pub nodes: usize,
}

/// Laplace sum of an explicit Borel-plane function g:
/// f(t) = int_0^inf g(t u) e^{-u} du, by Gauss-Laguerre with node doubling.
pub fn laplace_sum(g: &dyn Fn(f64) -> f64, t: f64) -> Result<LaplaceResult, BorelError> {
    let mut n = 16;
    let eval = |n: usize| {
        let rule = quad::gauss_laguerre(n);
        rule.nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&u, &w)| w * g(t * u))
            .sum::<f64>()
    };
    let mut prev = eval(n);
    loop {
        n *= 2;
        let val = eval(n);
        let change = (val - prev).abs() / val.abs().max(f64::MIN_POSITIVE);
        if change <= 1e-10 {
            return Ok(LaplaceResult { value: val, quad_error: change, nodes: n });
        }
        if n >= 256 {
            // Laguerre rules plateau around 1e-9 relative for rational
            // integrands with finite-distance poles; accept the plateau but
            // report it through quad_error
            if change <= 1e-8 {
                return Ok(LaplaceResult { value: val, quad_error: change, nodes: n });
            }
            return Err(BorelError::QuadratureNotConverged(change));
        }
        prev = val;
    }
}

/// Laplace sum of a rational continuation, guarding the contour.
pub fn laplace_sum_rational(
    rat: &RationalApproximant,
    t: f64,
) -> Result<LaplaceResult, BorelError> {
    if rat.pole_clearance <= 1e-8 {
        return Err(BorelError::PoleOnContour { clearance: rat.pole_clearance });
    }
    laplace_sum(&|tau| rat.eval(tau), t)
}

/// Outcome of the full pipeline on a coefficient sequence.
#[derive(Debug, Clone)]
pub struct BorelSummation {
    pub value: f64,
    /// order actually used after degeneracy retries
    pub order_used: (usize, usize),
    pub approximant: Option<RationalApproximant>,
    pub clearance: f64,
    pub quad_error: f64,
    pub nodes: usize,
    /// true when every Pade order was degenerate and the value is a plain
    /// truncated partial sum of the input series
    pub fallback_truncated: bool,
}

/// Full pipeline: Borel transform, Pade continuation, Laplace resummation.
/// A degenerate Hankel system or a pole on the Laplace contour (typically a
/// spurious Froissart pole of an over-resolved approximant) triggers a
/// retry at (m-1, n-1). If every order down to (1, 1) fails, the truncated
/// partial sum of the input series is returned and flagged.
pub fn borel_sum(a: &[f64], t: f64, order: (usize, usize)) -> Result<BorelSummation, BorelError> {
    if a.is_empty() {
        return Err(BorelError::Empty);
    }
    let b = borel_transform(a);
    let (mut m, mut n) = order;
    loop {
        let attempt = pade_continue(&b, m, n).and_then(|rat| {
            let lp = laplace_sum_rational(&rat, t)?;
            Ok((rat, lp))
        });
        match attempt {
            Ok((rat, lp)) => {
                return Ok(BorelSummation {
                    value: lp.value,
                    order_used: (m, n),
                    clearance: rat.pole_clearance,
                    approximant: Some(rat),
                    quad_error: lp.quad_error,
                    nodes: lp.nodes,
                    fallback_truncated: false,
                });
            }
            Err(
                BorelError::DegenerateHankel { .. }
                | BorelError::PoleOnContour { .. }
                | BorelError::QuadratureNotConverged(_),
            ) if m > 1 && n > 1 => {
                m -= 1;
                n -= 1;
            }
            Err(
                BorelError::DegenerateHankel { .. }
                | BorelError::PoleOnContour { .. }
                | BorelError::QuadratureNotConverged(_),
            ) => {
                let value = a.iter().rev().fold(0.0, |acc, &ar| acc * t + ar);
                return Ok(BorelSummation {
                    value,
                    order_used: (m, n),
                    approximant: None,
                    clearance: f64::INFINITY,
                    quad_error: f64::NAN,
                    nodes: 0,
                    fallback_truncated: true,
                });
            }
            Err(e) => return Err(e),
        }
    }
}

/// Resummation across several Pade orders, flagging disagreement.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub values: Vec<((usize, usize), f64)>,
    pub max_spread: f64,
    /// true when the relative spread across orders exceeds 1e-4
    pub flagged: bool,
}

pub fn borel_sum_sweep(
    a: &[f64],
    t: f64,
    orders: &[(usize, usize)],
) -> Result<SweepResult, BorelError> {
    let mut values = Vec::new();
    for &ord in orders {
        let s = borel_sum(a, t, ord)?;
        values.push((s.order_used, s.value));
    }
    let vmax = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    let vmin = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let scale = values.iter().map(|v| v.1.abs()).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    let max_spread = (vmax - vmin) / scale;
    Ok(SweepResult { values, max_spread, flagged: max_spread > 1e-4 })
}

/// Exponential growth diagnostic for a continuation: the certified bound
/// is |g(tau)| <= K exp(C sqrt(tau)) with K = max(1, |g(0)|). Returns the
/// largest ratio |g(tau)| / (K exp(C sqrt(tau))) on a log-spaced grid.
#[derive(Debug, Clone)]
pub struct GrowthReport {
    pub max_ratio: f64,
    pub at_tau: f64,
    pub ok: bool,
}

pub fn growth_check(rat: &RationalApproximant, c: f64, tau_max: f64) -> GrowthReport {
    let k = rat.eval(0.0).abs().max(1.0);
    let n = 200;
    let (mut max_ratio, mut at_tau) = (0.0f64, 0.0f64);
    for i in 0..=n {
        let tau = tau_max.powf(i as f64 / n as f64) * 1e-3f64.powf(1.0 - i as f64 / n as f64);
        let ratio = rat.eval(tau).abs() / (k * (c * tau.sqrt()).exp());
        if ratio > max_ratio {
            max_ratio = ratio;
            at_tau = tau;
        }
    }
    GrowthReport { max_ratio, at_tau, ok: max_ratio <= 1.0 + 1e-9 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn transform_divides_factorials() {
        let a = vec![1.0, 2.0, 6.0, 24.0];
        assert_eq!(borel_transform(&a), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn pade_recovers_exact_rational() {
        // b_r = (-1)^r is the series of 1/(1+tau); [1/1] must be exact
        let b: Vec<f64> = (0..8).map(|r| if r % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let rat = pade_continue(&b, 1, 1).unwrap();
        for &tau in &[0.0, 0.5, 3.0, 10.0] {
            assert_relative_eq!(rat.eval(tau), 1.0 / (1.0 + tau), epsilon = 1e-12);
        }
        assert_eq!(rat.poles.len(), 1);
        assert_relative_eq!(rat.poles[0].re, -1.0, epsilon = 1e-10);
        assert_relative_eq!(rat.pole_clearance, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn degenerate_hankel_detected() {
        // the same series at [2/2]: the Hankel matrix is rank one
        let b: Vec<f64> = (0..8).map(|r| if r % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(matches!(
            pade_continue(&b, 2, 2),
            Err(BorelError::DegenerateHankel { .. })
        ));
    }

    #[test]
    fn scaling_keeps_decaying_series_solvable() {
        // b_r = r / 4^r: poles off the contour, decay must not masquerade
        // as degeneracy
        let b: Vec<f64> = (0..12).map(|r| r as f64 / 4.0f64.powi(r as i32)).collect();
        // the series sums to tau/4 / (1 - tau/4)^2, exactly of type [1/2]
        let rat = pade_continue(&b, 1, 2).unwrap();
        for &tau in &[0.3f64, 1.5] {
            let exact = (tau / 4.0) / (1.0 - tau / 4.0).powi(2);
            assert_relative_eq!(rat.eval(tau), exact, epsilon = 1e-10, max_relative = 1e-10);
        }
    }

    #[test]
    fn euler_series_reference() {
        // a_r = (-1)^r r!: f(0.1) = int e^{-u}/(1 + 0.1 u) du
        let mut fact = 1.0;
        let a: Vec<f64> = (0..10)
            .map(|r| {
                if r > 0 {
                    fact *= r as f64;
                }
                if r % 2 == 0 {
                    fact
                } else {
                    -fact
                }
            })
            .collect();
        let s = borel_sum(&a, 0.1, (4, 4)).unwrap();
        assert!(!s.fallback_truncated);
        // auto-retry must land on the exact [1/1]
        assert_eq!(s.order_used, (1, 1));
        assert_relative_eq!(s.value, 0.9156333393978808, epsilon = 1e-10);
    }

    #[test]
    fn pole_on_contour_rejected() {
        // b_r = 1: g = 1/(1 - tau) has its pole on the contour
        let b = vec![1.0; 8];
        let rat = pade_continue(&b, 1, 1).unwrap();
        assert!(rat.pole_clearance < 1e-8);
        assert!(matches!(
            laplace_sum_rational(&rat, 0.5),
            Err(BorelError::PoleOnContour { .. })
        ));
    }

    #[test]
    fn laplace_of_exponential() {
        // g = e^{-tau}: f(t) = 1/(1+t) for every t > 0
        for &t in &[0.5, 1.0, 2.0] {
            let lp = laplace_sum(&|tau: f64| (-tau).exp(), t).unwrap();
            assert_relative_eq!(lp.value, 1.0 / (1.0 + t), epsilon = 1e-9);
        }
    }

    #[test]
    fn sweep_flags_disagreement() {
        // alternating factorial series agrees across orders
        let mut fact = 1.0;
        let a: Vec<f64> = (0..14)
            .map(|r| {
                if r > 0 {
                    fact *= r as f64;
                }
                if r % 2 == 0 {
                    fact
                } else {
                    -fact
                }
            })
            .collect();
        let sweep = borel_sum_sweep(&a, 0.1, &[(3, 3), (4, 4), (5, 5)]).unwrap();
        assert!(!sweep.flagged, "spread {}", sweep.max_spread);
    }

    #[test]
    fn growth_check_bounds_decaying_continuation() {
        let b: Vec<f64> = (0..8).map(|r| if r % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let rat = pade_continue(&b, 1, 1).unwrap();
        let rep = growth_check(&rat, 0.5, 100.0);
        assert!(rep.ok, "ratio {} at tau {}", rep.max_ratio, rep.at_tau);
    }
}
