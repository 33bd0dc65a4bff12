//! Small-time asymptotic expansions of transition kernels for
//! gradient-drift diffusions, and their resummation on the Borel plane.
//!
//! The crate is organized around a pipeline:
//!
//! * [`model`] builds a diffusion model (drift, potential, ground state)
//!   from a symmetric measure or a closed-form ground state;
//! * [`coeffs`] computes the heat-coefficient recursion in exact
//!   polynomial arithmetic and fits factorial growth bounds;
//! * [`borel`] maps coefficient sequences to the Borel plane, continues
//!   them by Pade approximants and resums with a Laplace quadrature;
//! * [`kernels`] assembles kernel estimates and validates them against
//!   closed-form kernels and a Crank-Nicolson PDE reference;
//! * [`lamperti`] reduces non-unit diffusion coefficients to the
//!   unit-diffusion case by coordinate change.

pub mod borel;
pub mod coeffs;
pub mod expr;
pub mod kernels;
pub mod lamperti;
pub mod model;
pub mod quad;

pub use borel::{borel_sum, laplace_sum, pade_continue, BorelError, RationalApproximant};
pub use coeffs::{
    approximate_potential, coefficient_at, expansion_coefficients, gevrey_fit, CoefficientTable,
    GevreyEstimate, PolynomialRep,
};
pub use expr::Expr;
pub use kernels::{mehler_exact, ou_exact, solve_pde_forward, KernelEstimate};
pub use lamperti::{DiffusionCoefficient, LampertiMap};
pub use model::{
    build_measure_model, build_ou_shifted_model, drift_from_ground_state, load_model,
    potential_from_drift, potential_from_measure, regularity_certificate, ModelError, ModelSpec,
    ScalarField, SymmetricMeasure,
};
