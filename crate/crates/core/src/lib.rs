//! Minimal diagonally concave Bellman function for the perturbed martingale
//! transform inequality with `1 < p < 2`, its sharp constants, and finite
//! martingale pairs that certify them.
//!
//! The pipeline runs bottom-up: [`boundary`] evaluates the boundary curves,
//! [`cup`] solves for the cup foliation, [`surface`] assembles and checks the
//! candidate, [`constant`] reads off the sharp constants, and [`martingale`],
//! [`extremizer`] and [`adversary`] build explicit pairs.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod boundary;
pub mod constant;
pub mod cup;
pub mod error;
pub mod extremizer;
pub mod io;
pub mod martingale;
pub mod params;
pub mod quad;
pub mod roots;
pub mod surface;
pub mod verify;

pub use error::{Error, Result};
pub use params::ProblemParams;
