//! Dense complex linear algebra, seeded optimization and JSON helpers.

pub mod cmatrix;
pub mod factor;
pub mod json;
pub mod linalg;
pub mod optimize;
pub mod random;

pub use cmatrix::{c, kron, r, CMatrix, C64, I, ONE, ZERO};
pub use linalg::{min_eigenvalue, operator_norm, trace_norm};
pub use optimize::{maximize_over_unit_ball, NormEstimate, OptimizerConfig};
