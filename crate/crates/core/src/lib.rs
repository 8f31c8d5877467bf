//! Spectral Galerkin toolkit for hypocoercive kinetic generators.
//!
//! The crate discretizes Langevin-type generators `L = A + S` on a tensor
//! basis of position Fourier modes (orthonormalized against the Gibbs
//! measure `ν ∝ e^{-βV}`) and momentum Hermite functions, then
//!
//! * checks the structural identities `Π0 A Π0 = 0`, `S Π0 = Π0 S = 0`,
//!   `R² = 1`, `R S R = S`, `R A R = -A` on the assembled matrices,
//! * splits the mean-zero space as `H0 ⊕ H1 ⊕ H2` with `H1 = Ran(A₊₀)`,
//!   builds the Schur complement of the dissipated block and solves with
//!   the block inverse,
//! * evaluates the explicit resolvent bounds (abstract, Langevin,
//!   randomized HMC, Adaptive Langevin) and compares them with the exact
//!   norm `‖L⁻¹‖ = 1/σ_min(L)`,
//! * estimates the Poincaré and growth constants of the potential and runs
//!   randomized checks of the functional inequalities used along the way.
//!
//! Everything here is pure computation on `alloc`; file formats, sweeps
//! and the command line live in the `hypoco` crate.
#![no_std]
// Whenever std ends up in the build graph (tests, or a dependent enabling
// std features), its inherent float methods shadow `num_traits::Float`.
#![allow(unused_imports)]
// `!(x <= tol)` is deliberate: NaN must fail every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod basis;
pub mod constants;
mod error;
pub mod linalg;
pub mod models;
pub mod operators;
pub mod random;
pub mod schur;
pub mod sparse;
pub mod study;

pub use error::{Error, ErrorKind, Result};

pub use basis::{BasisSet, BasisSpec, CoefficientVector, Potential};
pub use operators::{ModelKind, ModelOperators, ModelSpec};

pub use schur::{BoundReport, Decomposition};
pub use sparse::{SparseOperator, SymmetryTag};
