//! Adaptive time integration for initial value problems whose output of
//! interest is a time integral `J(u) = ∫ j(t, u(t)) dt` rather than the final
//! state.
//!
//! The crate provides two local-error-driven step controllers built on
//! embedded scheme pairs (a classical norm-based one and a goal-oriented one
//! that measures the local error through the density `j`), per-step quadrature
//! accumulation of `J`, a dual-weighted-residual refinement loop for linear
//! problems as a reference method, and the analysis helpers (order fits,
//! weighted seminorms, step-size diagnostics) used to evaluate them.
//!
//! Quick start: integrate a stiff 2x2 test problem and read off the
//! quantity-of-interest error.
//!
//! ```
//! use qoi_adapt::control::{ControllerConfig, EstimatorVariant};
//! use qoi_adapt::driver::adaptive_solve;
//! use qoi_adapt::problems::{toy_problem, toy_exact_qoi};
//! use qoi_adapt::qoi::{toy_density, QuadratureRule};
//! use qoi_adapt::schemes::builtin_theta_pair;
//!
//! let problem = toy_problem(-1.0).unwrap();
//! let pair = builtin_theta_pair();
//! let density = toy_density("u2").unwrap();
//! let cfg = ControllerConfig::for_pair(1e-6, &pair, EstimatorVariant::Goal).unwrap();
//! let report = adaptive_solve(&problem, &pair, &density, &QuadratureRule::Trapezoid, &cfg).unwrap();
//! let exact = toy_exact_qoi(-1.0, "u2", 0.0, 2.0).unwrap();
//! assert!((report.j_h - exact).abs() < 1e-4);
//! ```

pub mod analysis;
pub mod control;
pub mod driver;
pub mod dwr;
pub mod error;
pub mod integrators;
pub mod linalg;
pub mod problems;
pub mod qoi;
pub mod schemes;

pub use error::{Error, Result};
