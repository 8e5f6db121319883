//! Synthesis, verification and classification of isoparametric scalar
//! fields in ℝⁿ, i.e. fields with `|∇u| = f(u)` and `Δu = g(u)`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod classify;
pub mod error;
pub mod fields;
pub mod flow;
pub mod moments;
pub mod par;
pub mod profile;
pub mod quad;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
