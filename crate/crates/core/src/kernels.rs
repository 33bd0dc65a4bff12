//! Kernel assembly and validation.
//!
//! The parametrix kernel for dt u = lap u - W u is
//!
//!   u(t, x, y) = (4 pi t)^{-d/2} exp(-(x-y)^2 / 4t) sum_r a_r(x, y) t^r,
//!
//! the drift-diffusion kernel is k = psi(y)/psi(x) u, and the modified
//! kernel k~ strips the Gaussian prefactor. The series can be summed by
//! truncation or through the Borel pipeline. Reference values come from
//! the exact Mehler / Ornstein-Uhlenbeck kernels and from a Crank-Nicolson
//! solve of the forward equation.

use thiserror::Error;

use crate::borel::{self, BorelError, BorelSummation};
use crate::coeffs::{CoefficientTable, PolynomialRep};
use crate::model::{ModelError, ModelSpec, ScalarField};
use crate::quad;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error(transparent)]
    Borel(#[from] BorelError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("PDE solve lost mass: relative loss {0:.3e}")]
    MassLoss(f64),
    #[error("bad PDE grid: {0}")]
    BadGrid(String),
}

/// How the coefficient series in t is summed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SumMode {
    /// plain partial sum up to the table order
    Truncated,
    /// Borel transform, Pade continuation at the given order, Laplace sum
    Borel { order: (usize, usize) },
}

#[derive(Debug, Clone)]
pub struct KernelEstimate {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    /// parametrix kernel of dt u = lap u - W u
    pub u: f64,
    /// k = psi(y)/psi(x) u, the transition density of the drift diffusion
    pub k: f64,
    /// k~ = (4 pi t)^{d/2} e^{(x-y)^2/4t} k
    pub k_tilde: f64,
    /// resummation diagnostics when the Borel mode was used
    pub summation: Option<BorelSummation>,
}

fn gauss_prefactor(t: f64, x: f64, y: f64) -> f64 {
    let d2 = (x - y) * (x - y);
    (4.0 * std::f64::consts::PI * t).powf(-0.5) * (-d2 / (4.0 * t)).exp()
}

/// Sum the coefficient series of the table at (t, x).
fn sum_series(
    table: &CoefficientTable,
    t: f64,
    x: f64,
    mode: SumMode,
) -> Result<(f64, Option<BorelSummation>), KernelError> {
    let seq = table.sequence_at(x);
    match mode {
        SumMode::Truncated => {
            let v = seq.iter().rev().fold(0.0, |acc, &a| acc * t + a);
            Ok((v, None))
        }
        SumMode::Borel { order } => {
            let s = borel::borel_sum(&seq, t, order)?;
            Ok((s.value, Some(s)))
        }
    }
}

/// Parametrix kernel u(t, x, y) with y the base point of the table.
pub fn assemble_u(
    table: &CoefficientTable,
    t: f64,
    x: f64,
    mode: SumMode,
) -> Result<(f64, Option<BorelSummation>), KernelError> {
    let (series, diag) = sum_series(table, t, x, mode)?;
    Ok((gauss_prefactor(t, x, table.y) * series, diag))
}

/// Full kernel estimate at (t, x) for the diffusion started at... note the
/// convention: the table base point is y and k(t, x, y) is the density of
/// the diffusion started at x, evaluated at y (symmetric in the parametrix
/// factor, weighted by the ground-state ratio).
pub fn modified_kernel(
    model: &ModelSpec,
    table: &CoefficientTable,
    t: f64,
    x: f64,
    mode: SumMode,
) -> Result<KernelEstimate, KernelError> {
    let (series, summation) = sum_series(table, t, x, mode)?;
    let y = table.y;
    let ratio = model.psi.eval(y) / model.psi.eval(x);
    let u = gauss_prefactor(t, x, y) * series;
    Ok(KernelEstimate { t, x, y, u, k: ratio * u, k_tilde: ratio * series, summation })
}

// ---------------------------------------------------------------------------
// Exact references
// ---------------------------------------------------------------------------

/// Exact kernel of dt u = lap u - (omega^2 x^2/4 - omega/2) u (Mehler
/// kernel including the zero-point shift).
pub fn mehler_exact(omega: f64, t: f64, x: f64, y: f64) -> f64 {
    let s = (omega * t).sinh();
    let c = (omega * t).cosh();
    let pref = (omega / (4.0 * std::f64::consts::PI * s)).sqrt();
    let arg = -omega * ((x * x + y * y) * c - 2.0 * x * y) / (4.0 * s);
    (omega * t / 2.0).exp() * pref * arg.exp()
}

/// Exact Ornstein-Uhlenbeck transition density in y for the generator
/// lap + beta grad with beta = -omega x: Gaussian with mean x e^{-omega t}
/// and variance (1 - e^{-2 omega t}) / omega.
pub fn ou_exact(omega: f64, t: f64, x: f64, y: f64) -> f64 {
    let mean = x * (-omega * t).exp();
    let var = (1.0 - (-2.0 * omega * t).exp()) / omega;
    (2.0 * std::f64::consts::PI * var).powf(-0.5) * (-(y - mean) * (y - mean) / (2.0 * var)).exp()
}

// ---------------------------------------------------------------------------
// Analytic heat-equation residual
// ---------------------------------------------------------------------------

/// Residual (dt - lap + W) u_n of the order-n truncation, which satisfies
/// the exact identity
///   (dt - lap + W) u_n = G(t, x, y) t^n (W a_n - a_n'')(x).
pub fn heat_residual(table: &CoefficientTable, n: usize, t: f64, x: f64) -> f64 {
    let w = PolynomialRep::new(table.potential.clone(), table.y);
    let an = table.order(n);
    let g = w.mul(&an).sub(&an.derivative().derivative());
    gauss_prefactor(t, x, table.y) * t.powi(n as i32) * g.eval(x)
}

/// Least-squares slope of log |residual| against log t; at x = y the
/// Gaussian prefactor contributes t^{-1/2}, so the expected slope is
/// n - 1/2.
pub fn residual_order(table: &CoefficientTable, n: usize, x: f64, ts: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .map(|&t| (t.ln(), heat_residual(table, n, t, x).abs().ln()))
        .collect();
    let np = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (np * sxy - sx * sy) / (np * sxx - sx * sx)
}

// ---------------------------------------------------------------------------
// Crank-Nicolson forward solve
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct PdeGrid {
    pub lo: f64,
    pub hi: f64,
    /// number of spatial intervals
    pub nx: usize,
    /// number of time steps
    pub nt: usize,
    /// Richardson-extrapolate in the mollifier width
    pub richardson: bool,
}

#[derive(Debug, Clone)]
pub struct PdeSolution {
    pub xs: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
    pub mass: f64,
}

impl PdeSolution {
    pub fn interp(&self, x: f64) -> f64 {
        let h = self.xs[1] - self.xs[0];
        if x <= self.xs[0] || x >= *self.xs.last().unwrap() {
            return 0.0;
        }
        let i = ((x - self.xs[0]) / h) as usize;
        let s = (x - self.xs[i]) / h;
        self.p[i] * (1.0 - s) + self.p[i + 1] * s
    }

    pub fn max(&self) -> f64 {
        self.p.iter().fold(0.0f64, |a, &b| a.max(b))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,p\n");
        for (x, p) in self.xs.iter().zip(&self.p) {
            out.push_str(&format!("{x},{p}\n"));
        }
        out
    }
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = diag[0];
    rhs[0] /= d;
    c[0] = sup[0] / d;
    for i in 1..n {
        d = diag[i] - sub[i] * c[i - 1];
        if i < n - 1 {
            c[i] = sup[i] / d;
        }
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / d;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

fn cn_run(beta: &[f64], h: f64, dt: f64, nt: usize, p: &mut [f64]) {
    // A p = (p_{i+1} - 2 p_i + p_{i-1})/h^2 - (b_{i+1} p_{i+1} - b_{i-1} p_{i-1})/(2h)
    let n = p.len();
    let r = dt / (2.0 * h * h);
    let q = dt / (4.0 * h);
    // implicit (I - dt/2 A) and explicit (I + dt/2 A) bands; Dirichlet 0
    // at the boundary rows (absorbing)
    let mut sub_i = vec![0.0; n];
    let mut diag_i = vec![1.0; n];
    let mut sup_i = vec![0.0; n];
    let mut sub_e = vec![0.0; n];
    let mut diag_e = vec![1.0; n];
    let mut sup_e = vec![0.0; n];
    for i in 1..n - 1 {
        let (am, ap) = (r + q * beta[i - 1], r - q * beta[i + 1]);
        sub_i[i] = -am;
        diag_i[i] = 1.0 + 2.0 * r;
        sup_i[i] = -ap;
        sub_e[i] = am;
        diag_e[i] = 1.0 - 2.0 * r;
        sup_e[i] = ap;
    }
    let mut rhs = vec![0.0; n];
    for _ in 0..nt {
        rhs[0] = 0.0;
        rhs[n - 1] = 0.0;
        for i in 1..n - 1 {
            rhs[i] = sub_e[i] * p[i - 1] + diag_e[i] * p[i] + sup_e[i] * p[i + 1];
        }
        thomas(&sub_i, &diag_i, &sup_i, &mut rhs);
        p.copy_from_slice(&rhs);
    }
}

fn cn_solve_one(
    beta_vals: &[f64],
    xs: &[f64],
    t: f64,
    y0: f64,
    width: f64,
    nt: usize,
) -> Result<Vec<f64>, KernelError> {
    let h = xs[1] - xs[0];
    // a Gaussian mollifier of variance w^2 equals the free kernel at time
    // w^2/2, so running to t - w^2/2 removes the mollifier bias exactly in
    // the free case and to leading order otherwise
    let t_run = t - width * width / 2.0;
    if t_run <= 0.0 {
        return Err(KernelError::BadGrid(format!(
            "time {t} shorter than mollifier time {w}",
            w = width * width / 2.0
        )));
    }
    let mut p: Vec<f64> = xs
        .iter()
        .map(|&x| {
            (-(x - y0) * (x - y0) / (2.0 * width * width)).exp()
                / (width * (2.0 * std::f64::consts::PI).sqrt())
        })
        .collect();
    let dt = t_run / nt as f64;
    cn_run(beta_vals, h, dt, nt, &mut p);
    Ok(p)
}

/// Crank-Nicolson solve of the forward equation
/// dt p = lap p - div(beta p) on [lo, hi] with absorbing boundaries,
/// started from a mollified delta at y0 of width 2h.
pub fn solve_pde_forward(
    beta: &ScalarField,
    t: f64,
    y0: f64,
    grid: PdeGrid,
) -> Result<PdeSolution, KernelError> {
    if grid.nx < 16 || grid.nt == 0 || grid.hi <= grid.lo {
        return Err(KernelError::BadGrid("need nx >= 16, nt >= 1, hi > lo".into()));
    }
    if y0 <= grid.lo || y0 >= grid.hi {
        return Err(KernelError::BadGrid("start point outside the grid".into()));
    }
    let n = grid.nx + 1;
    let h = (grid.hi - grid.lo) / grid.nx as f64;
    let xs: Vec<f64> = (0..n).map(|i| grid.lo + i as f64 * h).collect();
    let beta_vals: Vec<f64> = xs.iter().map(|&x| beta.eval(x)).collect();

    let w = 2.0 * h;
    let p = if grid.richardson {
        // eliminate the residual O(w^2) mollifier bias: p ~ p_w + c w^2
        let p_w = cn_solve_one(&beta_vals, &xs, t, y0, w, grid.nt)?;
        let p_h = cn_solve_one(&beta_vals, &xs, t, y0, w / 2.0, grid.nt)?;
        p_w.iter().zip(&p_h).map(|(&a, &b)| (4.0 * b - a) / 3.0).collect()
    } else {
        cn_solve_one(&beta_vals, &xs, t, y0, w, grid.nt)?
    };

    let mass = h * (p.iter().sum::<f64>() - 0.5 * (p[0] + p[n - 1]));
    if (mass - 1.0).abs() > 1e-4 {
        return Err(KernelError::MassLoss((mass - 1.0).abs()));
    }
    Ok(PdeSolution { xs, p, t, mass })
}

// ---------------------------------------------------------------------------
// Consistency suite
// ---------------------------------------------------------------------------

/// k(t, from, to) assembled from a table based at `to` (evaluated at
/// `from`; the parametrix factor is symmetric in its arguments).
fn kernel_from_table(
    model: &ModelSpec,
    table: &CoefficientTable,
    t: f64,
    from: f64,
    mode: SumMode,
) -> Result<f64, KernelError> {
    Ok(modified_kernel(model, table, t, from, mode)?.k)
}

#[derive(Debug, Clone)]
pub struct ConsistencyReport {
    /// relative Chapman-Kolmogorov defect at (t/2, t/2)
    pub chapman_kolmogorov: f64,
    /// |integral of k(t, x, .) - 1|
    pub mass_defect: f64,
    /// relative detailed-balance defect psi^2(x) k(x,z) vs psi^2(z) k(z,x)
    pub detailed_balance: f64,
    /// fitted residual slopes (n, slope, expected n - 1/2)
    pub residual_slopes: Vec<(usize, f64)>,
}

/// Run the internal consistency checks for a model at two base points.
/// `table_x` is based at x, `table_z` at z; both intervals must cover the
/// intermediate integration range.
pub fn consistency_suite(
    model: &ModelSpec,
    table_x: &CoefficientTable,
    table_z: &CoefficientTable,
    t: f64,
    mode: SumMode,
) -> Result<ConsistencyReport, KernelError> {
    let (x, z) = (table_x.y, table_z.y);

    // Chapman-Kolmogorov: k(t, x, z) = int k(t/2, x, y) k(t/2, y, z) dy.
    // k(t/2, x, y) comes from table_x evaluated at y (base-point symmetry),
    // k(t/2, y, z) from table_z evaluated at y.
    let lhs = kernel_from_table(model, table_z, t, x, mode)?;
    let lo = table_x.interval.0.max(table_z.interval.0);
    let hi = table_x.interval.1.min(table_z.interval.1);
    let integrand = |y: f64| {
        let g1 = modified_kernel(model, table_x, t / 2.0, y, mode).map(|k| k.u).unwrap_or(0.0);
        let g2 = modified_kernel(model, table_z, t / 2.0, y, mode).map(|k| k.u).unwrap_or(0.0);
        model.psi.eval(z) / model.psi.eval(x) * g1 * g2
    };
    let (rhs, _, _) = quad::integrate_gl_adaptive(&integrand, lo, hi, 1e-11, 1024);
    let chapman_kolmogorov = (lhs - rhs).abs() / lhs.abs().max(rhs.abs());

    // mass: int k(t, x, y) dy over the table interval
    let mass_integrand = |y: f64| {
        let u = modified_kernel(model, table_x, t, y, mode).map(|k| k.u).unwrap_or(0.0);
        model.psi.eval(y) / model.psi.eval(x) * u
    };
    let (mass, _, _) =
        quad::integrate_gl_adaptive(&mass_integrand, table_x.interval.0, table_x.interval.1, 1e-11, 1024);
    let mass_defect = (mass - 1.0).abs();

    // detailed balance with respect to the invariant density psi^2
    let kxz = kernel_from_table(model, table_z, t, x, mode)?;
    let kzx = kernel_from_table(model, table_x, t, z, mode)?;
    let (px, pz) = (model.psi.eval(x).powi(2), model.psi.eval(z).powi(2));
    let detailed_balance = (px * kxz - pz * kzx).abs() / (px * kxz).abs().max((pz * kzx).abs());

    // analytic heat residual order at the base point
    let ts = [0.2, 0.1, 0.05, 0.025, 0.0125];
    let residual_slopes = (1..=table_x.r_max.min(6))
        .map(|n| (n, residual_order(table_x, n, x, &ts)))
        .collect();

    Ok(ConsistencyReport { chapman_kolmogorov, mass_defect, detailed_balance, residual_slopes })
}
