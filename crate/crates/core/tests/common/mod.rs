//! Shared test helpers: truncated power-series arithmetic in t and an
//! independent oracle for the modified Mehler kernel.
//!
//! For W = omega^2 x^2 / 4 the exact kernel is
//!
//!   u = (4 pi sinh(omega t)/omega)^{-1/2}
//!       exp(-omega[(x^2+y^2) cosh(omega t) - 2 x y] / (4 sinh(omega t))),
//!
//! so the modified kernel k~ = (4 pi t)^{1/2} e^{(x-y)^2/4t} u is analytic
//! in t and its Taylor coefficients are exactly the expansion coefficients
//! a_r(x, y). They are computed here by series composition only -- no use
//! of the recursion under test.

#![allow(dead_code)]

pub fn series_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for i in 0..n.min(a.len()) {
        for j in 0..(n - i).min(b.len()) {
            out[i + j] += a[i] * b[j];
        }
    }
    out
}

/// a / b with b[0] != 0.
pub fn series_div(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut acc = if i < a.len() { a[i] } else { 0.0 };
        for k in 1..=i.min(b.len() - 1) {
            acc -= b[k] * out[i - k];
        }
        out[i] = acc / b[0];
    }
    out
}

/// sqrt(a) with a[0] > 0.
pub fn series_sqrt(a: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    out[0] = a[0].sqrt();
    for i in 1..n {
        let mut acc = if i < a.len() { a[i] } else { 0.0 };
        for k in 1..i {
            acc -= out[k] * out[i - k];
        }
        out[i] = acc / (2.0 * out[0]);
    }
    out
}

/// exp(a).
pub fn series_exp(a: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    out[0] = a.first().copied().unwrap_or(0.0).exp();
    for i in 1..n {
        let mut acc = 0.0;
        for k in 1..=i.min(a.len() - 1) {
            acc += k as f64 * a[k] * out[i - k];
        }
        out[i] = acc / i as f64;
    }
    out
}

/// Taylor coefficients in t of the modified Mehler kernel k~(t, x, y) for
/// the potential W = omega^2 x^2 / 4 (no zero-point shift), up to order
/// r_max inclusive.
pub fn mehler_series(omega: f64, x: f64, y: f64, r_max: usize) -> Vec<f64> {
    let n = r_max + 1 + 4;
    // sinh(omega t) = omega t * sig(t), cosh(omega t) = c(t) as series in t
    let mut sig = vec![0.0; n];
    let mut cosh = vec![0.0; n];
    let mut fact = 1.0f64;
    for k in 0..n {
        // power of t^k carries omega^k / k! from both series
        if k > 0 {
            fact *= k as f64;
        }
        let wk = omega.powi(k as i32) / fact;
        if k % 2 == 0 {
            cosh[k] = wk;
            // sinh / (omega t): term t^{k} comes from sinh's t^{k+1}
            sig[k] = omega.powi(k as i32) / ((1..=k + 1).map(|j| j as f64).product::<f64>());
        }
    }
    // A(t) = omega[(x^2+y^2) cosh - 2xy]/4
    let mut a = vec![0.0; n];
    for k in 0..n {
        a[k] = omega * (x * x + y * y) * cosh[k] / 4.0;
    }
    a[0] -= omega * x * y / 2.0;
    // E(t) = -(A/sig - A(0)) / (omega t); the constant term of q = A/sig
    // is exactly A(0) = omega (x-y)^2 / 4, which cancels the Gaussian
    // prefactor, so the series shifts down by one power of t
    let q = series_div(&a, &sig, n);
    let mut e = vec![0.0; n];
    for k in 1..n {
        e[k - 1] = -q[k] / omega;
    }
    let one = vec![1.0];
    let inv_sig = series_div(&one, &sig, n);
    let pref = series_sqrt(&inv_sig, n);
    let expo = series_exp(&e, n);
    let mut out = series_mul(&pref, &expo, n);
    out.truncate(r_max + 1);
    out
}

#[cfg(test)]
mod self_checks {
    use super::*;

    #[test]
    fn oracle_matches_closed_form_at_small_t() {
        // sum the series and compare with the closed-form modified kernel
        let (omega, x, y) = (2.0, 0.7, -0.3);
        let coef = mehler_series(omega, x, y, 16);
        for &t in &[0.01f64, 0.05] {
            let series: f64 = coef.iter().rev().fold(0.0, |acc, &c| acc * t + c);
            let s = (omega * t).sinh();
            let c = (omega * t).cosh();
            let u = (4.0 * std::f64::consts::PI * s / omega).powf(-0.5)
                * (-omega * ((x * x + y * y) * c - 2.0 * x * y) / (4.0 * s)).exp();
            let k_tilde = (4.0 * std::f64::consts::PI * t).sqrt()
                * ((x - y) * (x - y) / (4.0 * t)).exp()
                * u;
            let rel = (series - k_tilde).abs() / k_tilde.abs();
            assert!(rel < 1e-12, "rel {rel} at t {t}");
        }
    }
}
