//! Planar placement geometry: base-station frames, user placements and the
//! distance/angle relations between them.
//!
//! Every base station owns a local frame whose x axis runs along the array
//! and whose y axis points along the boresight. Intra-cell angles are
//! measured from the array axis inside the serving frame, so a user at
//! intra-cell angle `theta` and range `r` sits at local `(r cos theta, r sin theta)`.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

/// Effective Rayleigh distance `upsilon * sin^2(theta) * 2 D^2 / lambda`.
pub fn effective_rayleigh_distance(
    theta: f64,
    aperture: f64,
    wavelength: f64,
    coefficient: f64,
) -> f64 {
    let s = libm::sin(theta);
    coefficient * s * s * 2.0 * aperture * aperture / wavelength
}

/// Exact distance from element `n` (offset `n d` along the array) to a point
/// at range `r` and angle `theta`, for an array rotated by `phi`.
pub fn element_distance(r: f64, theta: f64, phi: f64, n: i64, d: f64) -> f64 {
    let nd = n as f64 * d;
    libm::sqrt(r * r + nd * nd - 2.0 * r * nd * libm::cos(phi - theta))
}

/// Second-order Taylor expansion of [`element_distance`] in `n d / r`.
pub fn element_distance_taylor(r: f64, theta: f64, phi: f64, n: i64, d: f64) -> f64 {
    let nd = n as f64 * d;
    let s = libm::sin(phi - theta);
    r - nd * libm::cos(phi - theta) + nd * nd * s * s / (2.0 * r)
}

/// Orientation of a base-station frame in global coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    /// Unit vector along the array (local +x).
    pub axis: [f64; 2],
    /// Unit vector along the boresight (local +y).
    pub boresight: [f64; 2],
}

impl Frame {
    /// Array along global +x, boresight along global +y.
    pub const UP: Frame = Frame {
        axis: [1.0, 0.0],
        boresight: [0.0, 1.0],
    };
    /// Array along global +x, boresight along global -y. This is the mirror
    /// image of [`Frame::UP`], the orientation of the upper BS in a facing
    /// pair.
    pub const DOWN: Frame = Frame {
        axis: [1.0, 0.0],
        boresight: [0.0, -1.0],
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaseStation {
    pub index: usize,
    pub position: [f64; 2],
    pub frame: Frame,
    /// Admissible rotation interval `[min, max]`, radians.
    pub rotation_limits: [f64; 2],
}

impl BaseStation {
    pub fn new(index: usize, position: [f64; 2], frame: Frame, rotation_limits: [f64; 2]) -> Self {
        Self {
            index,
            position,
            frame,
            rotation_limits,
        }
    }

    /// Global position of the point at local polar coordinates `(r, theta)`.
    pub fn to_global(&self, range: f64, angle: f64) -> [f64; 2] {
        let (lx, ly) = (range * libm::cos(angle), range * libm::sin(angle));
        let Frame { axis, boresight } = self.frame;
        [
            self.position[0] + lx * axis[0] + ly * boresight[0],
            self.position[1] + lx * axis[1] + ly * boresight[1],
        ]
    }

    /// Projections of a global point onto this station's frame.
    pub fn to_local(&self, point: [f64; 2]) -> (f64, f64) {
        let dx = point[0] - self.position[0];
        let dy = point[1] - self.position[1];
        let Frame { axis, boresight } = self.frame;
        (
            dx * axis[0] + dy * axis[1],
            dx * boresight[0] + dy * boresight[1],
        )
    }

    pub fn admits(&self, phi: f64) -> bool {
        phi >= self.rotation_limits[0] && phi <= self.rotation_limits[1]
    }

    pub fn clamp_rotation(&self, phi: f64) -> f64 {
        phi.min(self.rotation_limits[1]).max(self.rotation_limits[0])
    }
}

/// Two-branch arctangent of the local projections `(dx, dy)`, with the
/// result in `(-pi/2, 3pi/2]`.
pub fn bearing_from_components(dx: f64, dy: f64) -> Result<f64> {
    if dx == 0.0 {
        return if dy > 0.0 {
            Ok(FRAC_PI_2)
        } else if dy < 0.0 {
            Ok(3.0 * FRAC_PI_2)
        } else {
            Err(Error::DegenerateGeometry { bs: usize::MAX })
        };
    }
    let base = libm::atan(dy / dx);
    Ok(if dx > 0.0 { base } else { base + PI })
}

/// Angle of a global point as seen from `bs`, measured from its array axis.
pub fn inter_cell_angle(point: [f64; 2], bs: &BaseStation) -> Result<f64> {
    let (dx, dy) = bs.to_local(point);
    bearing_from_components(dx, dy).map_err(|_| Error::DegenerateGeometry { bs: bs.index })
}

/// Euclidean distance from `bs` to a global point.
pub fn inter_cell_distance(point: [f64; 2], bs: &BaseStation) -> f64 {
    let (dx, dy) = bs.to_local(point);
    libm::hypot(dx, dy)
}

/// A scattering point attached to one user, in serving-cell polar coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Scatterer {
    pub angle: f64,
    pub range: f64,
    pub position: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserPlacement {
    pub cell: usize,
    pub user: usize,
    /// Intra-cell angle in the serving frame, radians in `(0, pi)`.
    pub angle: f64,
    pub range: f64,
    /// Global position, derived from the serving frame.
    pub position: [f64; 2],
    pub scatterers: Vec<Scatterer>,
}

impl UserPlacement {
    pub fn new(serving: &BaseStation, user: usize, angle: f64, range: f64) -> Self {
        Self {
            cell: serving.index,
            user,
            angle,
            range,
            position: serving.to_global(range, angle),
            scatterers: Vec::new(),
        }
    }

    pub fn with_scatterers(mut self, serving: &BaseStation, polar: &[(f64, f64)]) -> Self {
        self.scatterers = polar
            .iter()
            .map(|&(angle, range)| Scatterer {
                angle,
                range,
                position: serving.to_global(range, angle),
            })
            .collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.angle > 0.0 && self.angle < PI) {
            return Err(Error::AngleOutOfRange {
                cell: self.cell,
                user: self.user,
                angle: self.angle,
            });
        }
        if !(self.range > 0.0) {
            return Err(Error::Domain("user range must be positive"));
        }
        Ok(())
    }
}
