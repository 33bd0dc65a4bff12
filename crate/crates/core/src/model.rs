//! Diffusion models built from symmetric measures and ground states.
//!
//! A potential is the (negative) Fourier transform of a finite symmetric
//! atomic measure. The ground-state transformation maps between the drift
//! picture (generator `lap + beta . grad`) and the Schroedinger picture
//! (`-lap + V`), and the OU-shifted construction multiplies the ground
//! state by a Gaussian factor `exp(-omega |x|^2 / 4)` to obtain a
//! normalizable invariant density.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Deserialize;
use thiserror::Error;

use crate::expr::{self, Expr, Tabulated};
use crate::quad;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("measure violates symmetry: atom at xi = {0} has no mirror atom with equal weight")]
    SymmetryViolation(f64),
    #[error("ground state is non-positive at x = {0}")]
    NonPositiveGroundState(f64),
    #[error("missing derivative: {0}")]
    MissingDerivative(String),
    #[error("normalization quadrature did not converge: {0}")]
    NormalizationDivergent(String),
    #[error("model invariant '{name}' violated: residual {residual:.3e} at x = {x}")]
    InvariantViolated { name: &'static str, residual: f64, x: f64 },
    #[error("only d = 1 is supported for field construction (got d = {0})")]
    UnsupportedDimension(usize),
    #[error("expression error: {0}")]
    Expr(#[from] expr::ExprError),
    #[error("model file: {0}")]
    File(String),
}

/// Finite atomic symmetric complex measure defining a potential.
#[derive(Debug, Clone)]
pub struct SymmetricMeasure {
    pub atoms: Vec<(f64, Complex64)>,
    pub dimension: usize,
}

impl SymmetricMeasure {
    pub fn new(atoms: Vec<(f64, Complex64)>) -> Result<Self, ModelError> {
        let m = SymmetricMeasure { atoms, dimension: 1 };
        m.check_symmetry()?;
        Ok(m)
    }

    /// Every atom at xi != 0 must be mirrored at -xi with the same weight.
    pub fn check_symmetry(&self) -> Result<(), ModelError> {
        for &(xi, w) in &self.atoms {
            if xi == 0.0 {
                continue;
            }
            let mirrored = self
                .atoms
                .iter()
                .any(|&(xj, wj)| (xj + xi).abs() < 1e-14 && (wj - w).norm() < 1e-14 * (1.0 + w.norm()));
            if !mirrored {
                return Err(ModelError::SymmetryViolation(xi));
            }
        }
        Ok(())
    }

    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|(_, w)| w.norm()).sum()
    }
}

/// Certificate of the Gaussian-regularity bound for a measure, carrying the
/// growth constant C = 2 e^{kappa/a} (integral)^{1/2}.
#[derive(Debug, Clone)]
pub struct RegularityCertificate {
    pub a: f64,
    pub r: f64,
    pub kappa: f64,
    pub integral_value: f64,
    pub c: f64,
}

/// Scalar function on an interval with exact derivatives.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub expr: Expr,
    pub domain: (f64, f64),
}

impl ScalarField {
    pub fn new(expr: Expr, domain: (f64, f64)) -> Self {
        ScalarField { expr, domain }
    }

    pub fn constant(v: f64, domain: (f64, f64)) -> Self {
        ScalarField::new(Expr::constant(v), domain)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.expr.eval(x)
    }

    pub fn derivative(&self) -> Result<ScalarField, ModelError> {
        Ok(ScalarField::new(self.expr.derivative()?, self.domain))
    }

    pub fn grid(&self, n: usize) -> Vec<f64> {
        let (lo, hi) = self.domain;
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    pub fn min_on_grid(&self, n: usize) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0);
        for x in self.grid(n) {
            let v = self.eval(x);
            if v < best.0 {
                best = (v, x);
            }
        }
        best
    }
}

/// Drift vector field (one component in d = 1).
#[derive(Debug, Clone)]
pub struct DriftField {
    pub component: ScalarField,
    pub gradient_flag: bool,
}

impl DriftField {
    pub fn eval(&self, x: f64) -> f64 {
        self.component.eval(x)
    }
}

/// Full diffusion model of the OU-shifted construction.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub d: usize,
    pub omega: f64,
    pub phi: ScalarField,
    pub c_phi: f64,
    pub psi: ScalarField,
    pub beta_phi: DriftField,
    pub beta_psi: DriftField,
    pub v_phi: ScalarField,
    pub v_tilde: ScalarField,
    pub w_total: ScalarField,
    pub measure: Option<SymmetricMeasure>,
    pub certificate: Option<RegularityCertificate>,
    /// Spectral shift applied so the ground state sits at energy zero
    /// (zero for models defined directly by an expression phi).
    pub energy_shift: f64,
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// V(x) = -sum_k w_k e^{i x xi_k}, assembled in cosine form so the
/// imaginary part vanishes identically after pairing.
pub fn potential_from_measure(
    mu: &SymmetricMeasure,
    domain: (f64, f64),
) -> Result<ScalarField, ModelError> {
    mu.check_symmetry()?;
    let mut terms: Vec<Expr> = Vec::new();
    let mut constant = 0.0;
    let mut done: Vec<f64> = Vec::new();
    for &(xi, w) in &mu.atoms {
        if xi == 0.0 {
            constant -= w.re;
            continue;
        }
        if done.iter().any(|&d| (d - xi.abs()).abs() < 1e-14) {
            continue;
        }
        done.push(xi.abs());
        // paired sum w e^{i x xi} + w e^{-i x xi} = 2 w cos(x xi)
        terms.push(Expr::Prod(vec![
            Expr::constant(-2.0 * w.re),
            Expr::Cos(Box::new(Expr::Poly(vec![0.0, xi.abs()]))),
        ]));
    }
    if constant != 0.0 || terms.is_empty() {
        terms.push(Expr::constant(constant));
    }
    Ok(ScalarField::new(Expr::Sum(terms), domain))
}

/// beta = 2 grad(phi) / phi.
pub fn drift_from_ground_state(phi: &ScalarField) -> Result<DriftField, ModelError> {
    let (min, at) = phi.min_on_grid(201);
    if min <= 0.0 {
        return Err(ModelError::NonPositiveGroundState(at));
    }
    let dphi = phi.derivative()?;
    let beta = Expr::Ratio(
        Box::new(Expr::Prod(vec![Expr::constant(2.0), dphi.expr])),
        Box::new(phi.expr.clone()),
    );
    Ok(DriftField { component: ScalarField::new(beta, phi.domain), gradient_flag: true })
}

/// V = |beta|^2 / 4 + div(beta) / 2.
pub fn potential_from_drift(beta: &DriftField) -> Result<ScalarField, ModelError> {
    let db = beta
        .component
        .derivative()
        .map_err(|e| ModelError::MissingDerivative(e.to_string()))?;
    let e = Expr::Sum(vec![
        Expr::Prod(vec![
            Expr::constant(0.25),
            beta.component.expr.clone(),
            beta.component.expr.clone(),
        ]),
        Expr::Prod(vec![Expr::constant(0.5), db.expr]),
    ]);
    Ok(ScalarField::new(e, beta.component.domain))
}

/// Certificate with integral_value = sum |w_k| e^{a xi_k^2 / 2 + R |xi_k|}
/// and C = 2 e^{kappa/a} (integral_value)^{1/2}.
pub fn regularity_certificate(
    mu: &SymmetricMeasure,
    a: f64,
    r: f64,
    kappa: f64,
) -> Result<RegularityCertificate, ModelError> {
    assert!(a > 0.0 && r >= 0.0 && kappa > 0.0, "certificate parameters out of range");
    mu.check_symmetry()?;
    let integral_value: f64 = mu
        .atoms
        .iter()
        .map(|&(xi, w)| w.norm() * (a * xi * xi / 2.0 + r * xi.abs()).exp())
        .sum();
    let c = 2.0 * (kappa / a).exp() * integral_value.sqrt();
    Ok(RegularityCertificate { a, r, kappa, integral_value, c })
}

fn gaussian_norm_const(omega: f64, d: usize) -> f64 {
    (2.0 * std::f64::consts::PI * 2.0 / omega).powi(d as i32)
}

fn choose_domain(phi: &ScalarField, omega: f64) -> Result<(f64, f64), ModelError> {
    // Expand L until the relative tail mass of phi^2 exp(-omega x^2/2) on
    // [L, 2L] is below 1e-10.
    let f = |x: f64| {
        let p = phi.eval(x);
        p * p * (-omega * x * x / 2.0).exp()
    };
    let mut l = (2.0_f64 / omega).sqrt().max(1.0) * 4.0;
    for _ in 0..40 {
        let core = quad::integrate_gl(&f, -l, l, 256);
        let tail = quad::integrate_gl(&f, l, 2.0 * l, 128) + quad::integrate_gl(&f, -2.0 * l, -l, 128);
        if !core.is_finite() || !tail.is_finite() {
            return Err(ModelError::NormalizationDivergent(format!(
                "phi^2 exp(-omega x^2/2) non-finite near |x| = {l}"
            )));
        }
        if tail <= 1e-10 * core {
            return Ok((-l, l));
        }
        l *= 1.5;
        if l > 1e4 {
            return Err(ModelError::NormalizationDivergent(
                "Gaussian tail of phi^2 never becomes negligible".into(),
            ));
        }
    }
    unreachable!()
}

/// Grid identities every constructed model must satisfy.
fn validate_model(m: &ModelSpec) -> Result<(), ModelError> {
    let tol = 1e-8;
    let xs = m.psi.grid(41);
    let dpsi2 = m.psi.derivative()?.derivative()?;
    for &x in &xs {
        // beta_psi = beta_phi - omega x
        let r1 = (m.beta_psi.eval(x) - (m.beta_phi.eval(x) - m.omega * x)).abs();
        if r1 > tol {
            return Err(ModelError::InvariantViolated { name: "beta_psi", residual: r1, x });
        }
        // V_tilde = V_phi + omega^2 x^2/4 - (omega/2) x beta_phi - omega d / 2
        let vt = m.v_phi.eval(x) + m.omega * m.omega * x * x / 4.0
            - 0.5 * m.omega * x * m.beta_phi.eval(x)
            - 0.5 * m.omega * m.d as f64;
        let r2 = (m.v_tilde.eval(x) - vt).abs();
        if r2 > tol * (1.0 + vt.abs()) {
            return Err(ModelError::InvariantViolated { name: "v_tilde", residual: r2, x });
        }
        // V_tilde psi = lap psi
        let r3 = (m.v_tilde.eval(x) * m.psi.eval(x) - dpsi2.eval(x)).abs();
        if r3 > tol * (1.0 + dpsi2.eval(x).abs()) {
            return Err(ModelError::InvariantViolated { name: "v_tilde_psi", residual: r3, x });
        }
    }
    if m.omega > 0.0 {
        let psi = m.psi.clone();
        let (mass, _, _) =
            quad::integrate_gl_adaptive(&|x| psi.eval(x).powi(2), psi.domain.0, psi.domain.1, 1e-12, 4096);
        let r = (mass - 1.0).abs();
        if r > 1e-7 {
            return Err(ModelError::InvariantViolated { name: "psi_norm", residual: r, x: 0.0 });
        }
    }
    Ok(())
}

/// OU-shifted model: psi = c_phi phi exp(-omega x^2/4) / (2 pi 2/omega)^{d/2}
/// with c_phi chosen so that the invariant density psi^2 integrates to one.
pub fn build_ou_shifted_model(
    phi: ScalarField,
    omega: f64,
    d: usize,
    mu: Option<SymmetricMeasure>,
) -> Result<ModelSpec, ModelError> {
    if d != 1 {
        return Err(ModelError::UnsupportedDimension(d));
    }
    if omega == 0.0 {
        return free_model(phi, mu);
    }
    let (min, at) = phi.min_on_grid(201);
    if min <= 0.0 {
        return Err(ModelError::NonPositiveGroundState(at));
    }
    let domain = choose_domain(&phi, omega)?;
    let phi = ScalarField::new(phi.expr, domain);

    let norm = gaussian_norm_const(omega, d);
    let f = |x: f64| {
        let p = phi.eval(x);
        p * p * (-omega * x * x / 2.0).exp() / norm
    };
    let (integral, change, _) = quad::integrate_gl_adaptive(&f, domain.0, domain.1, 1e-10, 8192);
    if !(integral.is_finite() && integral > 0.0) || change > 1e-8 {
        return Err(ModelError::NormalizationDivergent(format!(
            "c_phi quadrature value {integral}, last change {change}"
        )));
    }
    let c_phi = integral.powf(-0.5);

    let psi = ScalarField::new(
        Expr::Prod(vec![
            Expr::constant(c_phi / norm.powf(d as f64 / 2.0)),
            phi.expr.clone(),
            Expr::Exp(Box::new(Expr::Poly(vec![0.0, 0.0, -omega / 4.0]))),
        ]),
        domain,
    );
    let beta_phi = drift_from_ground_state(&phi)?;
    let beta_psi = DriftField {
        component: ScalarField::new(
            Expr::Sum(vec![beta_phi.component.expr.clone(), Expr::Poly(vec![0.0, -omega])]),
            domain,
        ),
        gradient_flag: true,
    };
    let v_phi = potential_from_drift(&beta_phi)?;
    let v_tilde = ScalarField::new(
        Expr::Sum(vec![
            v_phi.expr.clone(),
            Expr::Poly(vec![-0.5 * omega * d as f64, 0.0, omega * omega / 4.0]),
            Expr::Prod(vec![Expr::Poly(vec![0.0, -omega / 2.0]), beta_phi.component.expr.clone()]),
        ]),
        domain,
    );

    let model = ModelSpec {
        d,
        omega,
        phi,
        c_phi,
        psi,
        beta_phi,
        beta_psi,
        v_phi,
        v_tilde: v_tilde.clone(),
        w_total: v_tilde,
        measure: mu,
        certificate: None,
        energy_shift: 0.0,
    };
    validate_model(&model)?;
    Ok(model)
}

/// Degenerate omega = 0 model: only a constant phi is admissible, the
/// kernel is the free heat kernel and psi is unnormalized (identically 1).
fn free_model(phi: ScalarField, mu: Option<SymmetricMeasure>) -> Result<ModelSpec, ModelError> {
    if phi.expr.as_poly().map(|p| p.len() > 1).unwrap_or(true) {
        return Err(ModelError::NormalizationDivergent(
            "omega = 0 requires a constant phi (free model)".into(),
        ));
    }
    let domain = phi.domain;
    let one = ScalarField::constant(1.0, domain);
    let zero = ScalarField::constant(0.0, domain);
    let zero_drift = DriftField { component: zero.clone(), gradient_flag: true };
    Ok(ModelSpec {
        d: 1,
        omega: 0.0,
        phi: one.clone(),
        c_phi: 1.0,
        psi: one,
        beta_phi: zero_drift.clone(),
        beta_psi: zero_drift,
        v_phi: zero.clone(),
        v_tilde: zero.clone(),
        w_total: zero,
        measure: mu,
        certificate: None,
        energy_shift: 0.0,
    })
}

// ---------------------------------------------------------------------------
// Ground state of a measure potential
// ---------------------------------------------------------------------------

/// Integrate phi'' = (V - e) phi from x = 0 with even initial data.
/// Returns node values of (phi, phi') at spacing `step`, or None if phi
/// becomes non-positive before xmax.
fn even_solution(v: &ScalarField, e: f64, xmax: f64, step: f64) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = (xmax / step).ceil() as usize + 1;
    let substeps = 4;
    let h = step / substeps as f64;
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; n];
    f[0] = 1.0;
    let (mut y, mut yp, mut x) = (1.0f64, 0.0f64, 0.0f64);
    let rhs = |x: f64, y: f64| (v.eval(x) - e) * y;
    for i in 1..n {
        for _ in 0..substeps {
            let k1 = (yp, rhs(x, y));
            let k2 = (yp + 0.5 * h * k1.1, rhs(x + 0.5 * h, y + 0.5 * h * k1.0));
            let k3 = (yp + 0.5 * h * k2.1, rhs(x + 0.5 * h, y + 0.5 * h * k2.0));
            let k4 = (yp + h * k3.1, rhs(x + h, y + h * k3.0));
            y += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            yp += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            x += h;
        }
        if y <= 0.0 {
            return None;
        }
        f[i] = y;
        g[i] = yp;
    }
    Some((f, g))
}

/// Model whose potential comes from a symmetric measure. The measure
/// potential is shifted by the ground energy so the ground state sits at
/// zero (the shift a measure gains at the origin), and the positive even
/// solution of phi'' = (V - E0) phi supplies phi.
pub fn build_measure_model(
    mu: &SymmetricMeasure,
    omega: f64,
    extent: f64,
) -> Result<ModelSpec, ModelError> {
    let v = potential_from_measure(mu, (-extent, extent))?;
    let step = 1.0 / 512.0;
    let tv = mu.total_variation();
    let (mut lo, mut hi) = (-tv - 1.0, tv + 1.0);
    if even_solution(&v, lo, extent, step).is_none() {
        return Err(ModelError::NonPositiveGroundState(0.0));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if even_solution(&v, mid, extent, step).is_some() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let e0 = lo;
    let (f0, f1) = even_solution(&v, e0, extent, step).expect("certified positive");
    let dv = v.derivative()?;
    let n = f0.len();
    let mut f2 = vec![0.0; n];
    let mut f3 = vec![0.0; n];
    for i in 0..n {
        let x = i as f64 * step;
        let w = v.eval(x) - e0;
        f2[i] = w * f0[i];
        f3[i] = dv.eval(x) * f0[i] + w * f1[i];
    }
    let tab = Arc::new(Tabulated::new("ground_state".into(), step, [f0, f1, f2, f3]));
    let phi = ScalarField::new(Expr::Tab(tab, 0), (-extent, extent));
    let mut model = build_ou_shifted_model(phi, omega, 1, Some(mu.clone()))?;
    model.energy_shift = e0;
    Ok(model)
}

// ---------------------------------------------------------------------------
// Model definition files
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
pub struct ModelFile {
    pub dimension: usize,
    pub omega: f64,
    /// Whitelisted expression for phi; if omitted the ground state of the
    /// measure potential is constructed numerically.
    pub phi: Option<String>,
    pub measure: Option<MeasureSection>,
    pub regularity: Option<RegularitySection>,
    pub domain: Option<DomainSection>,
}

#[derive(Debug, Deserialize)]
pub struct MeasureSection {
    pub atoms: Vec<AtomSpec>,
}

#[derive(Debug, Deserialize)]
pub struct AtomSpec {
    pub xi: f64,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Deserialize)]
pub struct RegularitySection {
    pub a: f64,
    #[serde(rename = "R", alias = "r")]
    pub r: f64,
    pub kappa: f64,
}

#[derive(Debug, Deserialize)]
pub struct DomainSection {
    #[serde(rename = "L", alias = "l")]
    pub l: f64,
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<ModelFile, ModelError> {
        toml::from_str(text).map_err(|e| ModelError::File(e.to_string()))
    }

    pub fn build(&self) -> Result<ModelSpec, ModelError> {
        let l = self.domain.as_ref().map(|d| d.l).unwrap_or(16.0);
        let measure = match &self.measure {
            Some(sec) => Some(SymmetricMeasure::new(
                sec.atoms.iter().map(|a| (a.xi, Complex64::new(a.re, a.im))).collect(),
            )?),
            None => None,
        };
        let mut model = match (&self.phi, &measure) {
            (Some(src), _) => {
                let phi = ScalarField::new(expr::parse(src)?, (-l, l));
                let m = build_ou_shifted_model(phi, self.omega, self.dimension, measure)?;
                // a measure listed alongside an explicit ground state must
                // describe the same potential: V_mu = lap(phi) / phi
                if let Some(mu) = &m.measure {
                    let v_mu = potential_from_measure(mu, m.phi.domain)?;
                    for x in m.phi.grid(41) {
                        let r = (v_mu.eval(x) - m.v_phi.eval(x)).abs();
                        if r > 1e-6 * (1.0 + m.v_phi.eval(x).abs()) {
                            return Err(ModelError::InvariantViolated {
                                name: "measure_potential",
                                residual: r,
                                x,
                            });
                        }
                    }
                }
                m
            }
            (None, Some(mu)) => build_measure_model(mu, self.omega, l)?,
            (None, None) => {
                return Err(ModelError::File("model needs either phi or measure.atoms".into()))
            }
        };
        if let (Some(reg), Some(mu)) = (&self.regularity, &model.measure) {
            model.certificate = Some(regularity_certificate(mu, reg.a, reg.r, reg.kappa)?);
        }
        Ok(model)
    }
}

pub fn load_model(path: &std::path::Path) -> Result<ModelSpec, ModelError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ModelError::File(format!("{}: {e}", path.display())))?;
    ModelFile::parse(&text)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn atom(xi: f64, w: f64) -> (f64, Complex64) {
        (xi, Complex64::new(w, 0.0))
    }

    #[test]
    fn cosine_potential() {
        let mu = SymmetricMeasure::new(vec![atom(1.0, 0.5), atom(-1.0, 0.5)]).unwrap();
        let v = potential_from_measure(&mu, (-4.0, 4.0)).unwrap();
        for &x in &[-2.0, 0.0, 0.7] {
            assert_relative_eq!(v.eval(x), -x.cos(), epsilon = 1e-14);
        }
    }

    #[test]
    fn delta_zero_is_constant() {
        let mu = SymmetricMeasure::new(vec![atom(0.0, 1.0)]).unwrap();
        let v = potential_from_measure(&mu, (-1.0, 1.0)).unwrap();
        assert_relative_eq!(v.eval(0.3), -1.0);
    }

    #[test]
    fn unpaired_atom_rejected() {
        let err = SymmetricMeasure::new(vec![atom(1.0, 1.0)]);
        assert!(matches!(err, Err(ModelError::SymmetryViolation(_))));
    }

    #[test]
    fn drift_examples() {
        let dom = (-3.0, 3.0);
        // phi = exp(-x^2/4) -> beta = -x
        let phi = ScalarField::new(expr::parse("exp(-0.25*x^2)").unwrap(), dom);
        let beta = drift_from_ground_state(&phi).unwrap();
        assert_relative_eq!(beta.eval(1.3), -1.3, epsilon = 1e-12);
        // phi = cosh x -> beta = 2 tanh x
        let phi = ScalarField::new(expr::parse("cosh(x)").unwrap(), dom);
        let beta = drift_from_ground_state(&phi).unwrap();
        assert_relative_eq!(beta.eval(0.8), 2.0 * 0.8f64.tanh(), epsilon = 1e-12);
        // and its potential is identically 1
        let v = potential_from_drift(&beta).unwrap();
        assert_relative_eq!(v.eval(-1.1), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn negative_phi_rejected() {
        let phi = ScalarField::new(expr::parse("cos(x)").unwrap(), (-3.0, 3.0));
        assert!(matches!(
            drift_from_ground_state(&phi),
            Err(ModelError::NonPositiveGroundState(_))
        ));
    }

    #[test]
    fn ou_drift_potential() {
        // beta = -omega x -> V = omega^2 x^2 / 4 - omega/2
        let omega = 2.0;
        let beta = DriftField {
            component: ScalarField::new(Expr::Poly(vec![0.0, -omega]), (-3.0, 3.0)),
            gradient_flag: true,
        };
        let v = potential_from_drift(&beta).unwrap();
        let x = 0.9;
        assert_relative_eq!(v.eval(x), omega * omega * x * x / 4.0 - omega / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn certificate_values() {
        let mu = SymmetricMeasure::new(vec![atom(1.0, 0.5), atom(-1.0, 0.5)]).unwrap();
        let cert = regularity_certificate(&mu, 1.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(cert.integral_value, 0.5f64.exp(), epsilon = 1e-14);
        assert_relative_eq!(cert.c, 2.0 * 1f64.exp() * 0.25f64.exp(), epsilon = 1e-12);

        let mu0 = SymmetricMeasure::new(vec![atom(0.0, 1.0)]).unwrap();
        let cert = regularity_certificate(&mu0, 0.7, 2.0, 1.3).unwrap();
        assert_relative_eq!(cert.integral_value, 1.0);
        assert_relative_eq!(cert.c, 2.0 * (1.3f64 / 0.7).exp(), epsilon = 1e-12);

        let mu2 = SymmetricMeasure::new(vec![atom(2.0, 0.5), atom(-2.0, 0.5)]).unwrap();
        let cert = regularity_certificate(&mu2, 0.5, 1.0, 2.0).unwrap();
        assert_relative_eq!(cert.integral_value, 3f64.exp(), epsilon = 1e-12);
        assert_relative_eq!(cert.c, 2.0 * 4f64.exp() * 1.5f64.exp(), epsilon = 1e-11);
    }

    #[test]
    fn pure_ou_model() {
        let phi = ScalarField::constant(1.0, (-8.0, 8.0));
        let m = build_ou_shifted_model(phi, 2.0, 1, None).unwrap();
        assert_relative_eq!(m.c_phi, (2.0 * std::f64::consts::PI.sqrt()).sqrt(), epsilon = 1e-9);
        assert_relative_eq!(m.beta_psi.eval(0.7), -1.4, epsilon = 1e-12);
        let x = 1.2;
        assert_relative_eq!(m.v_tilde.eval(x), x * x - 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cosh_model_invariants() {
        let phi = ScalarField::new(expr::parse("cosh(x)").unwrap(), (-8.0, 8.0));
        // construction itself runs the grid checks, including V_tilde psi = lap psi
        let m = build_ou_shifted_model(phi, 1.0, 1, None).unwrap();
        // round trip V_phi = lap phi / phi: for cosh this is 1
        assert_relative_eq!(m.v_phi.eval(0.4), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn divergent_normalization_detected() {
        // phi = exp(x^2) grows faster than the omega = 1 Gaussian decays
        let phi = ScalarField::new(expr::parse("exp(x^2)").unwrap(), (-8.0, 8.0));
        assert!(matches!(
            build_ou_shifted_model(phi, 1.0, 1, None),
            Err(ModelError::NormalizationDivergent(_))
        ));
    }

    #[test]
    fn measure_model_ground_state() {
        // V = -cos x; the shift must land near the Mathieu band edge and the
        // shifted potential must satisfy V_phi = lap phi / phi on a grid.
        let mu = SymmetricMeasure::new(vec![atom(1.0, 0.5), atom(-1.0, 0.5)]).unwrap();
        let m = build_measure_model(&mu, 1.0, 16.0).unwrap();
        assert!(m.energy_shift < -0.3 && m.energy_shift > -0.5, "E0 = {}", m.energy_shift);
        let d2 = m.phi.derivative().unwrap().derivative().unwrap();
        for &x in &[0.0, 0.9, 2.4, -3.3] {
            let lhs = d2.eval(x) / m.phi.eval(x);
            let rhs = -x.cos() - m.energy_shift;
            assert_relative_eq!(lhs, rhs, epsilon = 1e-6);
        }
    }

    #[test]
    fn model_file_roundtrip() {
        // phi = cosh x has V = lap(phi)/phi = 1, matching the constant
        // potential encoded by a delta at 0 with weight -1
        let text = r#"
            dimension = 1
            omega = 2.0
            phi = "cosh(x)"
            [domain]
            L = 8.0
            [regularity]
            a = 1.0
            R = 0.0
            kappa = 1.0
            [[measure.atoms]]
            xi = 0.0
            re = -1.0
        "#;
        let mf = ModelFile::parse(text).unwrap();
        let m = mf.build().unwrap();
        assert!(m.certificate.is_some());
        assert_relative_eq!(m.beta_psi.eval(1.0), 2.0 * 1f64.tanh() - 2.0, epsilon = 1e-12);

        // an inconsistent pairing must be rejected
        let bad = text.replace("re = -1.0", "re = 1.0");
        let err = ModelFile::parse(&bad).unwrap().build();
        assert!(matches!(err, Err(ModelError::InvariantViolated { name: "measure_potential", .. })));
    }
}
