// `!(x > 0.0)` comparisons deliberately reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Combining heterogeneous anomaly detectors with a continuous item response
//! model.
//!
//! Observations play the role of test takers and detectors the role of test
//! items. The fitted latent trait of each observation is its ensemble
//! anomaly score.

pub mod combiners;
pub mod commands;
pub mod config;
pub mod detectors;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod io;
pub mod irt;
pub mod model;
pub mod neighbors;
pub mod svg;
pub mod synth;

pub use error::{Error, Result};
