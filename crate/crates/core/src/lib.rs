//! Counterdiabatic driving for pseudo- and antipseudo-Hermitian Hamiltonians.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: dense complex matrices, biorthonormal eigensystems, eigenpath matching.
//! * [`symmetry`]: pseudo/antipseudo checks, spectrum pairing, left states built from rights.
//! * [`adiabatic`]: schedules, eigenvector derivatives, adiabatic metric, Berry connections, phases.
//! * [`cd`]: counterdiabatic Hamiltonians in the Hermitian, generic, pseudo and antipseudo forms.
//! * [`dynamics`]: RK4 propagation, observables and the projective phase decomposition.
//! * [`models`]: the three-level gain/loss STIRAP family with closed-form eigensystems.
//! * [`experiment`]: config-driven runs, spectrum sweeps, CSV output and plot scripts.
//!
//! Units: ħ = 1, frequencies in units of Ω₀, times in units of 1/Ω₀.

pub mod adiabatic;
pub mod cd;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod models;
pub mod par;
mod quad;
pub mod symmetry;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, EigenSystem, StateVector, C64};
pub use par::Execution;
