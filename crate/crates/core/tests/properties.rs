//! Property-based invariants of the expansion and resummation pipeline.

use num_complex::Complex64;
use proptest::prelude::*;

use kernelsum::borel::{borel_sum, laplace_sum, pade_continue};
use kernelsum::coeffs::{gevrey_fit, CoefficientTable, PolynomialRep};
use kernelsum::expr;
use kernelsum::lamperti::{DiffusionCoefficient, LampertiMap};
use kernelsum::model::{ScalarField, SymmetricMeasure};
use kernelsum::quad::integrate_gk_adaptive;

fn harmonic_table(y: f64) -> CoefficientTable {
    let w = ScalarField::new(expr::parse("x^2 - 1").unwrap(), (-16.0, 16.0));
    CoefficientTable::build(&w, y, 8, 4.0, 8).unwrap()
}

proptest! {
    /// Recentring a polynomial is a change of representation only.
    #[test]
    fn recenter_preserves_values(
        coefs in proptest::collection::vec(-3.0f64..3.0, 1..8),
        c0 in -2.0f64..2.0,
        c1 in -2.0f64..2.0,
        x in -3.0f64..3.0,
    ) {
        let p = PolynomialRep::new(coefs, c0);
        let q = p.recenter(c1);
        let back = q.recenter(c0);
        prop_assert!((p.eval(x) - q.eval(x)).abs() < 1e-9 * (1.0 + p.eval(x).abs()));
        for (a, b) in p.coefficients.iter().zip(&back.coefficients) {
            prop_assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()));
        }
    }

    /// The expansion coefficients are symmetric in the two endpoints:
    /// a_r evaluated at x from the table centred at y agrees with a_r
    /// evaluated at y from the table centred at x.
    #[test]
    fn coefficients_symmetric_in_endpoints(x in -1.5f64..1.5, y in -1.5f64..1.5) {
        let at_x = harmonic_table(y).sequence_at(x);
        let at_y = harmonic_table(x).sequence_at(y);
        for (r, (a, b)) in at_x.iter().zip(&at_y).enumerate() {
            prop_assert!(
                (a - b).abs() < 1e-10 * a.abs().max(1.0),
                "order {r}: {a} vs {b}"
            );
        }
    }

    /// Pade continuation reproduces a geometric Borel series exactly.
    #[test]
    fn pade_exact_on_geometric_series(c in 0.5f64..2.0, rho in -0.9f64..-0.1) {
        let b: Vec<f64> = (0..8).map(|r| c * rho.powi(r)).collect();
        let rat = pade_continue(&b, 1, 1).unwrap();
        for k in 0..=6 {
            let tau = 0.5 * k as f64;
            let exact = c / (1.0 - rho * tau);
            prop_assert!((rat.eval(tau) - exact).abs() < 1e-9 * exact.abs());
        }
        // the single pole sits at 1/rho on the negative axis
        prop_assert!(rat.pole_clearance > 1.0 / rho.abs() - 1e-9);
    }

    /// For a_r = r! c rho^r with rho < 0 the Borel sum has the closed
    /// integral form c int_0^inf e^{-u} / (1 - rho t u) du.
    #[test]
    fn borel_sum_matches_integral_form(
        c in 0.5f64..2.0,
        rho in -0.9f64..-0.2,
        t in 0.05f64..0.5,
    ) {
        let mut fact = 1.0;
        let a: Vec<f64> = (0..8)
            .map(|r| {
                if r > 0 {
                    fact *= r as f64;
                }
                fact * c * rho.powi(r)
            })
            .collect();
        let s = borel_sum(&a, t, (2, 2)).unwrap();
        let reference =
            c * integrate_gk_adaptive(&|u: f64| (-u).exp() / (1.0 - rho * t * u), 0.0, 80.0, 1e-13);
        prop_assert!(!s.fallback_truncated);
        prop_assert!(
            (s.value - reference).abs() < 1e-8 * reference.abs(),
            "{} vs {reference}", s.value
        );
    }

    /// Laplace quadrature identity: int e^{-u} e^{alpha t u} du = 1/(1 - alpha t).
    #[test]
    fn laplace_sum_exponential_identity(alpha in -2.0f64..0.8, t in 0.1f64..0.9) {
        prop_assume!(alpha * t < 0.85);
        let r = laplace_sum(&|tau: f64| (alpha * tau).exp(), t).unwrap();
        let exact = 1.0 / (1.0 - alpha * t);
        prop_assert!((r.value - exact).abs() < 1e-8 * exact.abs());
    }

    /// The growth fit recovers planted factorial-over-power sequences with
    /// kappa >= 1; kappa < 1 grows faster than r! and must be rejected.
    #[test]
    fn gevrey_fit_recovers_planted_growth(big_k in 0.5f64..3.0, kappa in 1.05f64..3.0) {
        let mut fact = 1.0;
        let seq: Vec<f64> = (0..15)
            .map(|r| {
                if r > 0 {
                    fact *= r as f64;
                }
                big_k * fact / kappa.powi(r)
            })
            .collect();
        let est = gevrey_fit(&seq, (5, 10)).unwrap();
        prop_assert!((est.kappa - kappa).abs() < 1e-8 * kappa);
        prop_assert!(est.residual_max <= 1e-12);
        prop_assert!(est.big_k >= big_k * (1.0 - 1e-8));

        let runaway: Vec<f64> = seq.iter().enumerate().map(|(r, v)| v * 2f64.powi(r as i32)).collect();
        prop_assume!(kappa < 2.0);
        prop_assert!(gevrey_fit(&runaway, (5, 10)).is_err());
    }

    /// A measure built from mirrored atoms passes the symmetry check; an
    /// unpaired atom fails it.
    #[test]
    fn measure_symmetry_check(
        xi in 0.1f64..3.0,
        re in -1.0f64..1.0,
        im in -1.0f64..1.0,
        stray in 0.1f64..3.0,
    ) {
        let w = Complex64::new(re, im);
        let good = vec![(xi, w), (-xi, w), (0.0, Complex64::new(0.3, 0.0))];
        prop_assert!(SymmetricMeasure::new(good.clone()).is_ok());
        let mut bad = good;
        bad.push((xi + stray, w));
        prop_assert!(SymmetricMeasure::new(bad).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// The coordinate change and its inverse are mutually inverse.
    #[test]
    fn lamperti_roundtrip(a in 0.5f64..4.0, s in -4.0f64..4.0) {
        let sigma = ScalarField::new(
            expr::parse(&format!("sqrt({a} + x^2)")).unwrap(),
            (-16.0, 16.0),
        );
        let map = LampertiMap::new(DiffusionCoefficient::new(sigma).unwrap(), 0.0).unwrap();
        let x = map.gamma(s);
        let back = map.inverse(x).unwrap();
        prop_assert!((back - s).abs() < 1e-9 * (1.0 + s.abs()));
    }
}
