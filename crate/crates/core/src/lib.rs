//! Chebyshev-collocation Runge-Kutta integrators with spectral accuracy.
//!
//! The `s`-stage method collocates at the Chebyshev nodes of the first kind
//! mapped to `[0, 1]`. Its Butcher matrix factors through a sparse spectral
//! matrix `X_s` and a cosine matrix, so applying it reduces to a pair of
//! discrete cosine transforms.

// Negated comparisons are used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod diagnostics;
pub mod error;
pub mod problems;
pub mod solver;
pub mod tableau;
pub mod transform;

pub use diagnostics::{ReportKind, RunReport, StudyOptions};
pub use error::{Error, Result};
pub use problems::Problem;
pub use solver::{ButcherPath, Integrator, SolverConfig, StepResult, Trajectory};
pub use tableau::{ButcherTableau, SpectralFactor};
pub use transform::{TransformMode, TransformPlan};
