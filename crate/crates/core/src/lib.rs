//! Inverse moments of non-negative discrete random variates through the
//! Poisson-Charlier expansion.
//!
//! The crate is organised bottom-up:
//!
//! * [`special_numbers`]: exact Stirling numbers, alpha coefficients,
//!   harmonic numbers.
//! * [`exact_oracle`]: direct-summation ground truth.
//! * [`poisson_moments`]: inverse and shifted inverse moments of the
//!   Poisson distribution, their forward differences, and the dual-regime
//!   evaluator with its calibration.
//! * [`charlier_expansion`]: expansion polynomials and the inverse-moment estimates
//!   built from them.
//! * [`competing`]: the Stephan, Rempala and Znidaric expansions.
//! * [`cli`]: sweeps, reports and the command implementations behind the
//!   `invmom` binary.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod charlier_expansion;
pub mod cli;
pub mod competing;
pub mod dd;
pub mod error;
pub mod exact_oracle;
pub mod poisson_moments;
pub mod scalar;
pub mod special_numbers;

pub use dd::DoubleDouble;
pub use error::{Error, Result};
