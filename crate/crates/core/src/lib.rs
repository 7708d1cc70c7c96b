//! Finite-dimensional operator spaces and their applications to quantum
//! channels and linear logic.

pub mod cbmaps;
pub mod chu;
pub mod error;
pub mod exponential;
pub mod hsduality;
pub mod numerics;
pub mod opspace;
pub mod switch;
pub mod tensors;
pub mod verdict;

pub use error::{Error, Result};
pub use verdict::Verdict;
