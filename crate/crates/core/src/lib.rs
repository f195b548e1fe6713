//! Numerical laboratory for the biorthogonal quantum geometric tensor of
//! pseudo-Hermitian two-band Hamiltonians.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: small dense complex matrices and biorthogonal eigensystems.
//! - [`models`]: q-deformed Pauli basis and the parameter families `H(lambda)`.
//! - [`reference`]: spectral and finite-difference QGT, metric, curvature and
//!   Chern number.
//! - [`dynamics`]: nonunitary evolution along quadratic ramps and the
//!   first-order adiabatic expansion.
//! - [`measurement`]: generalized expectation values and the two response
//!   schemes that recover the QGT from evolved states.
//! - [`circuit`]: state-vector simulation of the ancilla/controlled-SWAP
//!   circuit that reads out a generalized expectation value.
//! - [`expr`]: a small arithmetic expression language for user-defined models
//!   and configuration values.

pub mod circuit;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod linalg;
pub mod measurement;
pub mod models;
pub mod reference;

pub use error::{Error, Result};
pub use linalg::{BiorthogonalEigensystem, CVector, ComplexMatrix, C64};
pub use models::{Axis, HamiltonianFamily, ModelSpec, ParamPoint};
