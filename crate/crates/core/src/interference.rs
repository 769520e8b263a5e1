//! Inter-cell mixed-field interference between a far-field steering vector
//! and a near-field one from the same (rotated) array.
//!
//! `rho(psi, theta, r, phi) = |a^H(psi, phi) b(theta, r, phi)|` is evaluated
//! either by direct summation or through the Fresnel closed form
//! `G(gamma1, gamma2)`. The module also carries the rotation rules derived
//! from `G` and the two-cell, one-user-per-cell rate model.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::channel::free_space_gain;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::fresnel::fresnel;
use crate::geometry::{inter_cell_angle, inter_cell_distance, BaseStation, Frame, UserPlacement};

const DEGENERATE_SIN: f64 = 1e-12;

/// Cross-correlation by direct summation over the `N` array elements.
pub fn rho_exact(psi: f64, theta: f64, r: f64, phi: f64, cfg: &SystemConfig) -> f64 {
    let k = cfg.wavenumber();
    let d = cfg.element_spacing;
    let s = libm::sin(phi - theta);
    let quad = d * d * s * s / (2.0 * r);
    let lin = d * (libm::cos(psi - phi) - libm::cos(phi - theta));
    let half = cfg.half_span() as i64;
    let sum: Complex64 = (-half..=half)
        .map(|n| {
            let nf = n as f64;
            Complex64::from_polar(1.0, k * (nf * nf * quad + nf * lin))
        })
        .sum();
    (sum.norm() / cfg.antenna_count as f64).min(1.0)
}

/// Arguments of the closed form `G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaPair {
    /// Normalized linear-phase offset.
    pub g1: f64,
    /// Normalized quadratic-phase half-width, positive.
    pub g2: f64,
}

/// Maps the geometry onto `(gamma1, gamma2)`.
///
/// Written for general spacing: with `d = lambda / 2` this is
/// `gamma1 = (cos(phi-theta) - cos(psi-phi)) sqrt(r / (d sin^2(phi-theta)))`,
/// `gamma2 = N/2 sqrt(d sin^2(phi-theta) / r)`.
pub fn gamma_params(psi: f64, theta: f64, r: f64, phi: f64, cfg: &SystemConfig) -> Result<GammaPair> {
    let s = libm::sin(phi - theta);
    if s.abs() < DEGENERATE_SIN {
        return Err(Error::VanishingQuadraticPhase);
    }
    if !(r > 0.0) {
        return Err(Error::Domain("range must be positive"));
    }
    let lambda = cfg.wavelength();
    let d = cfg.element_spacing;
    let s2 = s * s;
    let g1 = (libm::cos(phi - theta) - libm::cos(psi - phi)) * libm::sqrt(2.0 * r / (lambda * s2));
    let g2 = cfg.antenna_count as f64 / 2.0 * libm::sqrt(2.0 * d * d * s2 / (lambda * r));
    Ok(GammaPair { g1, g2 })
}

/// `|Ĉ + jŜ| / (2 gamma2)` with `Ĉ(x, y) = C(x + y) - C(x - y)`.
pub fn g_function(gamma: GammaPair) -> Result<f64> {
    let GammaPair { g1, g2 } = gamma;
    if !(g2 > 0.0) || !g1.is_finite() || !g2.is_finite() {
        return Err(Error::Domain("gamma2 must be positive and finite"));
    }
    let (cp, sp) = fresnel(g1 + g2);
    let (cm, sm) = fresnel(g1 - g2);
    Ok(libm::hypot(cp - cm, sp - sm) / (2.0 * g2))
}

/// Fresnel closed-form approximation of [`rho_exact`].
pub fn rho_approx(psi: f64, theta: f64, r: f64, phi: f64, cfg: &SystemConfig) -> Result<f64> {
    g_function(gamma_params(psi, theta, r, phi, cfg)?)
}

/// Closed form where it exists, direct summation where the quadratic phase
/// vanishes.
pub fn rho_approx_or_exact(psi: f64, theta: f64, r: f64, phi: f64, cfg: &SystemConfig) -> f64 {
    rho_approx(psi, theta, r, phi, cfg).unwrap_or_else(|_| rho_exact(psi, theta, r, phi, cfg))
}

/// Which rotation rule produced an [`optimal_rotation`] result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RotationCase {
    /// Both directions at boresight: rotation brings nothing.
    Boresight,
    /// Equal angles off boresight: turn the array so `|phi - theta| -> pi/2`.
    AlignedOffBoresight,
    /// Distinct angles: grid search on the closed form.
    Distinct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationChoice {
    pub phi: f64,
    pub case: RotationCase,
}

fn same_angle(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

/// Uniform grid of `points` values on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => alloc::vec![lo],
        _ => (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Maximizer of `sin^2(phi - theta)` over `[lo, hi]`.
fn max_sin_sq(theta: f64, lo: f64, hi: f64) -> f64 {
    let score = |phi: f64| {
        let s = libm::sin(phi - theta);
        s * s
    };
    let mut best = (lo, score(lo));
    if score(hi) > best.1 {
        best = (hi, score(hi));
    }
    // Interior peaks at theta + pi/2 + k pi.
    let k_lo = libm::ceil((lo - theta - FRAC_PI_2) / PI) as i64;
    let k_hi = libm::floor((hi - theta - FRAC_PI_2) / PI) as i64;
    for k in k_lo..=k_hi {
        let phi = theta + FRAC_PI_2 + k as f64 * PI;
        if score(phi) > best.1 {
            best = (phi, score(phi));
        }
    }
    best.0
}

/// Rotation minimizing the interference `rho(psi, theta, r, phi)` over the
/// admissible interval.
pub fn optimal_rotation(
    psi: f64,
    theta: f64,
    r: f64,
    limits: [f64; 2],
    cfg: &SystemConfig,
    grid_points: usize,
) -> Result<RotationChoice> {
    if grid_points < 2 {
        return Err(Error::Domain("rotation grid needs at least two points"));
    }
    let [lo, hi] = limits;
    if same_angle(psi, theta) && same_angle(psi, FRAC_PI_2) {
        return Ok(RotationChoice {
            phi: 0.0f64.max(lo).min(hi),
            case: RotationCase::Boresight,
        });
    }
    if same_angle(psi, theta) {
        let phi = if psi > FRAC_PI_2 {
            (psi - FRAC_PI_2).min(hi)
        } else {
            (psi - FRAC_PI_2).max(lo)
        };
        let check = max_sin_sq(theta, lo, hi);
        let s_rule = libm::sin(phi - theta);
        let s_check = libm::sin(check - theta);
        if (s_rule * s_rule - s_check * s_check).abs() > 1e-12 {
            log::warn!(
                "aligned-angle rotation rule gives {phi} but sin^2 peaks at {check} on [{lo}, {hi}]"
            );
        }
        return Ok(RotationChoice {
            phi,
            case: RotationCase::AlignedOffBoresight,
        });
    }
    let mut best = (lo, f64::INFINITY);
    for phi in linspace(lo, hi, grid_points) {
        let value = rho_approx_or_exact(psi, theta, r, phi, cfg);
        if value < best.1 {
            best = (phi, value);
        }
    }
    Ok(RotationChoice {
        phi: best.0,
        case: RotationCase::Distinct,
    })
}

/// How the cross-correlation terms of the two-cell rate are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RhoModel {
    #[default]
    Exact,
    /// Closed form, direct summation at degenerate points.
    Approx,
    /// Interference removed.
    Zero,
}

/// Two cells, one user each, with MRT analog beams and scalar power
/// control. Cell 1's station is at the origin facing up; cell 2's faces it.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoCellCase {
    pub theta_11: f64,
    pub r_11: f64,
    pub theta_21: f64,
    pub r_21: f64,
    /// Angle of user (1,1) seen from station 2.
    pub psi_21: f64,
    /// Angle of user (2,1) seen from station 1.
    pub psi_12: f64,
    pub phi_1: f64,
    pub phi_2: f64,
    pub power_budget: f64,
    pub noise_11: f64,
    pub noise_21: f64,
    /// `|beta_11|`, serving link of user (1,1).
    pub gain_11: f64,
    /// `|beta_21|`, serving link of user (2,1).
    pub gain_21: f64,
    /// `|beta~_21|`, station 2 to user (1,1).
    pub cross_gain_21: f64,
    /// `|beta~_12|`, station 1 to user (2,1).
    pub cross_gain_12: f64,
    pub config: SystemConfig,
}

impl TwoCellCase {
    /// Builds the case from polar placements, with stations at `[0, 0]` and
    /// `[0, 2 R_Ray]`.
    pub fn from_geometry(
        cfg: &SystemConfig,
        user_1: (f64, f64),
        user_2: (f64, f64),
        rotations: (f64, f64),
    ) -> Result<Self> {
        let spacing = 2.0 * cfg.boresight_rayleigh_distance();
        Self::with_spacing(cfg, spacing, user_1, user_2, rotations)
    }

    pub fn with_spacing(
        cfg: &SystemConfig,
        spacing: f64,
        (theta_11, r_11): (f64, f64),
        (theta_21, r_21): (f64, f64),
        (phi_1, phi_2): (f64, f64),
    ) -> Result<Self> {
        let bs1 = BaseStation::new(0, [0.0, 0.0], Frame::UP, [-PI, PI]);
        let bs2 = BaseStation::new(1, [0.0, spacing], Frame::DOWN, [-PI, PI]);
        let u11 = UserPlacement::new(&bs1, 0, theta_11, r_11);
        let u21 = UserPlacement::new(&bs2, 0, theta_21, r_21);
        u11.validate()?;
        u21.validate()?;
        let lambda = cfg.wavelength();
        Ok(Self {
            theta_11,
            r_11,
            theta_21,
            r_21,
            psi_21: inter_cell_angle(u11.position, &bs2)?,
            psi_12: inter_cell_angle(u21.position, &bs1)?,
            phi_1,
            phi_2,
            power_budget: cfg.power_budget,
            noise_11: cfg.noise_power,
            noise_21: cfg.noise_power,
            gain_11: free_space_gain(r_11, lambda).norm(),
            gain_21: free_space_gain(r_21, lambda).norm(),
            cross_gain_21: free_space_gain(inter_cell_distance(u11.position, &bs2), lambda).norm(),
            cross_gain_12: free_space_gain(inter_cell_distance(u21.position, &bs1), lambda).norm(),
            config: cfg.clone(),
        })
    }

    /// Interference seen by user (1,1) from station 2's beam.
    pub fn rho_into_1(&self, model: RhoModel) -> f64 {
        self.rho(model, self.psi_21, self.theta_21, self.r_21, self.phi_2)
    }

    /// Interference seen by user (2,1) from station 1's beam.
    pub fn rho_into_2(&self, model: RhoModel) -> f64 {
        self.rho(model, self.psi_12, self.theta_11, self.r_11, self.phi_1)
    }

    fn rho(&self, model: RhoModel, psi: f64, theta: f64, r: f64, phi: f64) -> f64 {
        match model {
            RhoModel::Exact => rho_exact(psi, theta, r, phi, &self.config),
            RhoModel::Approx => rho_approx_or_exact(psi, theta, r, phi, &self.config),
            RhoModel::Zero => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoCellRates {
    pub rate_1: f64,
    pub rate_2: f64,
    pub sum: f64,
}

/// Sum rate of the two users for per-user powers `p11`, `p21`.
pub fn two_cell_sum_rate(case: &TwoCellCase, p11: f64, p21: f64, model: RhoModel) -> TwoCellRates {
    let n = case.config.antenna_count as f64;
    let rho1 = case.rho_into_1(model);
    let rho2 = case.rho_into_2(model);
    let sig1 = p11 * n * case.gain_11 * case.gain_11;
    let int1 = p21 * n * case.cross_gain_21 * case.cross_gain_21 * rho1 * rho1;
    let sig2 = p21 * n * case.gain_21 * case.gain_21;
    let int2 = p11 * n * case.cross_gain_12 * case.cross_gain_12 * rho2 * rho2;
    let rate_1 = libm::log2(1.0 + sig1 / (int1 + case.noise_11));
    let rate_2 = libm::log2(1.0 + sig2 / (int2 + case.noise_21));
    TwoCellRates {
        rate_1,
        rate_2,
        sum: rate_1 + rate_2,
    }
}

/// Interference-free sum rate at the given powers.
pub fn interference_free_bound(case: &TwoCellCase, p11: f64, p21: f64) -> f64 {
    let n = case.config.antenna_count as f64;
    libm::log2(1.0 + p11 * n * case.gain_11 * case.gain_11 / case.noise_11)
        + libm::log2(1.0 + p21 * n * case.gain_21 * case.gain_21 / case.noise_21)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerAllocation {
    pub p11: f64,
    pub p21: f64,
    pub sum_rate: f64,
}

/// Exhaustive search on a `grid x grid` lattice over `[0, P]^2`; ties keep
/// the first lattice point in row-major order.
pub fn power_grid_search(case: &TwoCellCase, grid: usize, model: RhoModel) -> Result<PowerAllocation> {
    if grid < 2 {
        return Err(Error::Domain("power grid needs at least two points"));
    }
    // The rho terms do not depend on power: evaluate them once.
    let rho1 = case.rho_into_1(model);
    let rho2 = case.rho_into_2(model);
    let n = case.config.antenna_count as f64;
    let levels = linspace(0.0, case.power_budget, grid);
    let mut best = PowerAllocation {
        p11: 0.0,
        p21: 0.0,
        sum_rate: f64::NEG_INFINITY,
    };
    for &p11 in &levels {
        for &p21 in &levels {
            let sig1 = p11 * n * case.gain_11 * case.gain_11;
            let int1 = p21 * n * case.cross_gain_21 * case.cross_gain_21 * rho1 * rho1;
            let sig2 = p21 * n * case.gain_21 * case.gain_21;
            let int2 = p11 * n * case.cross_gain_12 * case.cross_gain_12 * rho2 * rho2;
            let sum = libm::log2(1.0 + sig1 / (int1 + case.noise_11))
                + libm::log2(1.0 + sig2 / (int2 + case.noise_21));
            if sum > best.sum_rate {
                best = PowerAllocation { p11, p21, sum_rate: sum };
            }
        }
    }
    Ok(best)
}
