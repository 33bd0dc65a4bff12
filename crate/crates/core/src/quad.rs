//! Quadrature rules: Gauss-Legendre and Gauss-Laguerre nodes via the
//! Golub-Welsch eigenvalue method (cached per order), a composite
//! Gauss-Legendre integrator with order doubling, and an adaptive
//! Gauss-Kronrod (G7,K15) integrator.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn golub_welsch(diag: Vec<f64>, offdiag: Vec<f64>, mu0: f64) -> Rule {
    let n = diag.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = diag[i];
        if i + 1 < n {
            m[(i, i + 1)] = offdiag[i];
            m[(i + 1, i)] = offdiag[i];
        }
    }
    let eig = m.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let v0 = eig.eigenvectors[(0, j)];
            (eig.eigenvalues[j], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

fn cache(which: usize) -> &'static Mutex<HashMap<usize, Rule>> {
    static CACHES: OnceLock<[Mutex<HashMap<usize, Rule>>; 2]> = OnceLock::new();
    &CACHES.get_or_init(|| [Mutex::new(HashMap::new()), Mutex::new(HashMap::new())])[which]
}

/// Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> Rule {
    let mut c = cache(0).lock().unwrap();
    c.entry(n)
        .or_insert_with(|| {
            let diag = vec![0.0; n];
            let off: Vec<f64> = (1..n)
                .map(|k| {
                    let k = k as f64;
                    k / (4.0 * k * k - 1.0).sqrt()
                })
                .collect();
            golub_welsch(diag, off, 2.0)
        })
        .clone()
}

/// Gauss-Laguerre rule for weight e^{-x} on [0, inf).
///
/// Nodes come from the Golub-Welsch eigenproblem, but the weights use the
/// classical formula w_i = x_i / ((n+1) L_{n+1}(x_i))^2: the eigenvector
/// first components only carry absolute accuracy, which ruins the tiny
/// tail weights whenever the integrand grows, while the recurrence
/// evaluation of L_{n+1} keeps the weights relatively accurate.
pub fn gauss_laguerre(n: usize) -> Rule {
    let mut c = cache(1).lock().unwrap();
    c.entry(n)
        .or_insert_with(|| {
            let diag: Vec<f64> = (0..n).map(|k| 2.0 * k as f64 + 1.0).collect();
            let off: Vec<f64> = (1..n).map(|k| k as f64).collect();
            let mut rule = golub_welsch(diag, off, 1.0);
            for (x, w) in rule.nodes.iter().zip(rule.weights.iter_mut()) {
                // L_{n+1}(x) by upward recurrence
                let (mut prev, mut cur) = (1.0f64, 1.0 - x);
                for k in 1..=n {
                    let kf = k as f64;
                    let next = ((2.0 * kf + 1.0 - x) * cur - kf * prev) / (kf + 1.0);
                    prev = cur;
                    cur = next;
                }
                let d = (n as f64 + 1.0) * cur;
                *w = x / (d * d);
            }
            rule
        })
        .clone()
}

/// Integrate f on [a, b] with an n-node Gauss-Legendre rule.
pub fn integrate_gl(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let rule = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// Gauss-Legendre with node doubling until the relative change is below
/// `rtol`. Returns (value, last relative change, nodes used).
pub fn integrate_gl_adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    rtol: f64,
    n_max: usize,
) -> (f64, f64, usize) {
    let mut n = 16;
    let mut prev = integrate_gl(f, a, b, n);
    loop {
        n *= 2;
        let val = integrate_gl(f, a, b, n);
        let change = (val - prev).abs() / val.abs().max(f64::MIN_POSITIVE);
        if change <= rtol || n >= n_max {
            return (val, change, n);
        }
        prev = val;
    }
}

// G7 / K15 node-weight tables (positive half; nodes are symmetric).
const K15_NODES: [f64; 8] = [
    0.0,
    0.207_784_955_007_898_5,
    0.405_845_151_377_397_2,
    0.586_087_235_467_691_1,
    0.741_531_185_599_394_4,
    0.864_864_423_359_769_1,
    0.949_107_912_342_758_5,
    0.991_455_371_120_813_0,
];
const K15_WEIGHTS: [f64; 8] = [
    0.209_482_141_084_727_83,
    0.204_432_940_075_298_9,
    0.190_350_578_064_785_4,
    0.169_004_726_639_267_9,
    0.140_653_259_715_525_2,
    0.104_790_010_322_250_3,
    0.063_092_092_629_978_55,
    0.022_935_322_010_529_224,
];
const G7_WEIGHTS: [f64; 4] = [
    0.417_959_183_673_469_4,
    0.381_830_050_505_118_9,
    0.279_705_391_489_276_7,
    0.129_484_966_168_869_7,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut k = K15_WEIGHTS[0] * f(mid);
    let mut g = G7_WEIGHTS[0] * f(mid);
    for i in 1..8 {
        let dx = half * K15_NODES[i];
        let s = f(mid - dx) + f(mid + dx);
        k += K15_WEIGHTS[i] * s;
        if i % 2 == 0 {
            g += G7_WEIGHTS[i / 2] * s;
        }
    }
    (k * half, (k - g).abs() * half)
}

/// Adaptive Gauss-Kronrod integration on [a, b] to absolute tolerance.
pub fn integrate_gk_adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (val, err) = gk15(f, a, b);
        if err <= tol || depth >= 40 {
            return val;
        }
        let mid = 0.5 * (a + b);
        rec(f, a, mid, tol * 0.5, depth + 1) + rec(f, mid, b, tol * 0.5, depth + 1)
    }
    if a == b {
        return 0.0;
    }
    let sign = if a < b { 1.0 } else { -1.0 };
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    sign * rec(f, lo, hi, tol, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_polynomial_exact() {
        // 5-node rule integrates degree-9 polynomials exactly
        let v = integrate_gl(&|x| x.powi(8), -1.0, 1.0, 5);
        assert_relative_eq!(v, 2.0 / 9.0, epsilon = 1e-13);
    }

    #[test]
    fn laguerre_moments() {
        let rule = gauss_laguerre(12);
        // int_0^inf x^5 e^{-x} dx = 120
        let m5: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(5)).sum();
        assert_relative_eq!(m5, 120.0, epsilon = 1e-9);
    }

    #[test]
    fn laguerre_rational_reference() {
        // int_0^inf e^{-u} / (1 + 0.1 u) du, reference from adaptive GK of
        // the same integrand truncated at u = 80
        let refv = integrate_gk_adaptive(&|u: f64| (-u).exp() / (1.0 + 0.1 * u), 0.0, 80.0, 1e-13);
        let rule = gauss_laguerre(64);
        let v: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w / (1.0 + 0.1 * x)).sum();
        assert_relative_eq!(v, refv, epsilon = 1e-11);
    }

    #[test]
    fn gk_asinh() {
        let v = integrate_gk_adaptive(&|y: f64| 1.0 / (1.0 + y * y).sqrt(), 0.0, 3.0, 1e-12);
        assert_relative_eq!(v, 3f64.asinh(), epsilon = 1e-11);
    }
}
