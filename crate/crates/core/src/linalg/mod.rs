//! Dense complex linear algebra: matrices, states, and biorthonormal
//! eigensystems with eigenpath continuity.

mod eigen;
mod matrix;
mod poly;
mod qr;

pub use eigen::{
    binormalize, binormalize_with, check_separation, decompose, eig, eig_with, eigensystem, left_eigensystem,
    match_to_previous, spectral_order, EigOptions, EigenSystem, Eigenpairs,
};
pub use matrix::{ComplexMatrix, StateVector, C64, I, ONE, ZERO};
pub use poly::{characteristic_polynomial, roots as polynomial_roots};
