//! Numerical laboratory for the failure of the restriction property of
//! Besov spaces and its sharpness under a summability condition on the
//! modulating function `Psi`.
//!
//! The crate is organised bottom-up:
//!
//! * [`params`] holds the exponent tuple `(N, d, p, q, s, M, L)`,
//! * [`psi`] the catalog of modulating functions and the summability test,
//! * [`sequences`] the dyadic block sequences and their rearrangement,
//! * [`atoms`] the smooth bump atoms and the synthesized counterexample field,
//! * [`norms`] finite differences, grid `L^p` quasi-norms and Besov seminorms,
//! * [`experiments`] the end-to-end runs and their CSV/JSON/SVG reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atoms;
pub mod domain;
pub mod dyadic;
pub mod error;
pub mod experiments;
pub mod norms;
pub mod params;
pub mod psi;
pub mod sequences;
pub mod sum;

pub use error::{Error, Result};
pub use params::Params;
pub use psi::{Classification, PsiDescriptor};
pub use sequences::BlockSequence;
