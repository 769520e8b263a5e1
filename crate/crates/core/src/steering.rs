//! Near-field (spherical) and far-field (planar) array steering vectors.
//!
//! Both are returned as column vectors indexed by element offset
//! `n = -Ñ..=Ñ` (position `n + Ñ`), i.e. the conjugates of the row vectors
//! that multiply a transmit vector. With this ordering the correlation
//! `a^H(psi, phi) b(theta, r, phi)` carries the phase
//! `k [n^2 d^2 sin^2(phi - theta) / 2r + n d (cos(psi - phi) - cos(phi - theta))]`.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::config::SystemConfig;
use crate::geometry::element_distance_taylor;
use crate::linalg::CVector;

fn offsets(cfg: &SystemConfig) -> impl Iterator<Item = i64> {
    let half = cfg.half_span() as i64;
    -half..=half
}

/// Near-field steering vector of a point at `(theta, r)` for an array
/// rotated by `phi`, using the second-order distance expansion.
pub fn near_steering(theta: f64, r: f64, phi: f64, cfg: &SystemConfig) -> CVector {
    let k = cfg.wavenumber();
    let d = cfg.element_spacing;
    let amp = 1.0 / libm::sqrt(cfg.antenna_count as f64);
    offsets(cfg)
        .map(|n| {
            let delta = element_distance_taylor(r, theta, phi, n, d) - r;
            Complex64::from_polar(amp, k * delta)
        })
        .collect()
}

/// Far-field steering vector towards angle `psi` for an array rotated by
/// `phi`.
pub fn far_steering(psi: f64, phi: f64, cfg: &SystemConfig) -> CVector {
    let k = cfg.wavenumber();
    let d = cfg.element_spacing;
    let amp = 1.0 / libm::sqrt(cfg.antenna_count as f64);
    let c = libm::cos(psi - phi);
    offsets(cfg)
        .map(|n| Complex64::from_polar(amp, -k * n as f64 * d * c))
        .collect::<Vec<_>>()
}
