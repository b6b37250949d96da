//! A numerical laboratory for super-recurrence of linear operators on ℂⁿ.
//!
//! A vector x ≠ 0 is super-recurrent for T when λₖ·T^{nₖ}x → x along some
//! increasing sequence nₖ and some scalars λₖ; the operator is
//! super-recurrent when every open set returns to itself under some λTⁿ.
//! This crate represents structured operators, computes their spectra,
//! detects (super-)recurrence with replayable certificates, finds
//! simultaneous return times and runs the structural theorems of the theory
//! as seeded property checks.

pub mod dense;
pub mod diophantine;
pub mod error;
pub mod generators;
pub mod operator;
pub mod orbit;
pub mod recurrence;
mod serde_complex;
pub mod spectral;
pub mod vector;
pub mod verdict;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use operator::OperatorSpec;
pub use vector::VectorState;
