//! Simulation harness: scenario files, scheme runners, Monte Carlo
//! experiments and their CSV outputs.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod parallel;
pub mod scenario_file;
pub mod schemes;

pub use error::{SimError, SimResult};
