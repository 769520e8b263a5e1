//! Channel model, interference analysis and joint optimizer for multi-cell
//! downlink systems whose base stations carry rotatable uniform linear
//! arrays. Users are in the radiating near field of their serving array and
//! in the far field of every neighbouring array.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the experiment
//! harness and the command line live in the `mixfield` companion crate.
//!
//! Layout:
//!
//! - [`config`], [`geometry`], [`steering`], [`channel`]: system parameters,
//!   placement geometry, steering vectors and channel synthesis.
//! - [`fresnel`], [`interference`]: Fresnel integrals, far/near-field
//!   cross-correlation (exact and closed form), rotation rules and the
//!   two-cell special case.
//! - [`beamforming`]: analog MRT stage, effective channels, rate evaluation,
//!   zero forcing, and the SDR + SCA digital beamformer with its internal
//!   log-barrier solver.
//! - [`pso`], [`joint`]: particle swarm rotation search and the
//!   double-layer driver.

#![no_std]
// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod beamforming;
pub mod channel;
pub mod config;
pub mod error;
pub mod fresnel;
pub mod geometry;
pub mod interference;
pub mod joint;
pub mod linalg;
pub mod pso;
pub mod steering;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
