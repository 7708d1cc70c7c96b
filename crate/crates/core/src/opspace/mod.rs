//! Finite-dimensional operator spaces given by their matrix norms.

pub mod axioms;
pub mod element;
pub mod oracle;
pub mod quotient;
pub mod space;
pub mod tensor_norm;

pub use axioms::{check_axioms, random_element, standard_spaces, AxiomReport};
pub use element::ElementMatrix;
pub use oracle::CcFamily;
pub use space::{
    column_hilbert, concrete, direct_sum_1, direct_sum_inf, dual, dual_with, matrix_space, max_quant, min_quant,
    proj_tensor, quotient_by_matrices, quotient_space, rect_matrix_space, subspace, trace_class, zero_space,
    BanachNorm, OperatorSpace,
};
pub use crate::cbmaps::{coequalizer, equalizer};
