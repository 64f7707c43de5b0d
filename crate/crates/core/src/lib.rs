//! Scattering of time-harmonic waves by 2π-periodic Dirichlet curves with
//! local perturbations.
//!
//! The crate covers the quasi-periodic cell problem with a Rayleigh
//! Dirichlet-to-Neumann boundary, detection of propagative wave numbers and
//! their mode spaces, the limiting absorption principle with its
//! orthogonality constraint, Floquet–Bloch synthesis of the Green's function,
//! supercell solves for locally perturbed curves, and numerical harnesses for
//! the uniqueness results of the inverse problem.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fem;
pub mod field;
pub mod green;
pub mod inverse;
pub mod lap;
pub mod linalg;
pub mod mesh;
pub mod modes;
pub mod perturbed;
pub mod profile;
pub mod qpsolver;
pub mod quadrature;
pub mod special;
pub mod verify;
pub mod wave;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Library version, written into output headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Pins the dense and sparse kernels to sequential execution so that repeated
/// runs are bit-identical.
pub fn init_deterministic() {
    faer::set_global_parallelism(faer::Par::Seq);
}
