//! Global physical parameters.

use alloc::format;

use crate::error::{Error, Result};
use crate::SPEED_OF_LIGHT;

/// Reflection loss applied to every scattered path, dB.
pub const NLOS_REFLECTION_LOSS_DB: f64 = 13.0;

/// Default effective Rayleigh-distance correction factor.
pub const DEFAULT_RAYLEIGH_COEFFICIENT: f64 = 0.367;

/// Converts a power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    libm::pow(10.0, (dbm - 30.0) / 10.0)
}

/// Converts a power in watts to dBm.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * libm::log10(watts) + 30.0
}

/// Physical and link-budget parameters shared by every cell.
///
/// All internal math is in SI units and watts; dBm only appears at
/// ingestion through [`dbm_to_watts`].
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub carrier_frequency: f64,
    /// Antennas per array, `N = 2 * half_span + 1`.
    pub antenna_count: usize,
    /// Inter-element spacing in meters.
    pub element_spacing: f64,
    pub cell_count: usize,
    pub users_per_cell: usize,
    /// Per-BS transmit power budget, W.
    pub power_budget: f64,
    /// Receiver noise power, W.
    pub noise_power: f64,
    pub nlos_path_count: usize,
    pub rayleigh_coefficient: f64,
    pub rng_seed: u64,
}

impl SystemConfig {
    /// 28 GHz, `N = 129`, half-wavelength spacing, two cells of three users,
    /// 30 dBm budget, -80 dBm noise, three scattered paths.
    pub fn reference() -> Self {
        let carrier_frequency = 28e9;
        Self {
            carrier_frequency,
            antenna_count: 129,
            element_spacing: SPEED_OF_LIGHT / carrier_frequency / 2.0,
            cell_count: 2,
            users_per_cell: 3,
            power_budget: dbm_to_watts(30.0),
            noise_power: dbm_to_watts(-80.0),
            nlos_path_count: 3,
            rayleigh_coefficient: DEFAULT_RAYLEIGH_COEFFICIENT,
            rng_seed: 0,
        }
    }

    /// Same as [`reference`](Self::reference) with a different array size,
    /// keeping half-wavelength spacing.
    pub fn with_antennas(mut self, antenna_count: usize) -> Self {
        self.antenna_count = antenna_count;
        self
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * core::f64::consts::PI / self.wavelength()
    }

    /// `Ñ` such that `N = 2Ñ + 1`.
    pub fn half_span(&self) -> usize {
        self.antenna_count / 2
    }

    /// Physical aperture `(N - 1) d`.
    pub fn aperture(&self) -> f64 {
        (self.antenna_count - 1) as f64 * self.element_spacing
    }

    /// Effective Rayleigh distance at boresight, the radius used to size
    /// cells and user regions.
    pub fn boresight_rayleigh_distance(&self) -> f64 {
        crate::geometry::effective_rayleigh_distance(
            core::f64::consts::FRAC_PI_2,
            self.aperture(),
            self.wavelength(),
            self.rayleigh_coefficient,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.antenna_count;
        if n < 3 || n.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "antenna count must be odd and >= 3, got {n}"
            )));
        }
        if !(self.carrier_frequency > 0.0 && self.carrier_frequency.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "carrier frequency must be positive, got {}",
                self.carrier_frequency
            )));
        }
        if !(self.element_spacing > 0.0) {
            return Err(Error::InvalidConfig("element spacing must be positive".into()));
        }
        if self.cell_count == 0 || self.users_per_cell == 0 {
            return Err(Error::InvalidConfig(
                "cell count and users per cell must be positive".into(),
            ));
        }
        if !(self.power_budget > 0.0) || !(self.noise_power > 0.0) {
            return Err(Error::InvalidConfig(
                "power budget and noise power must be positive".into(),
            ));
        }
        if !(self.rayleigh_coefficient > 0.0 && self.rayleigh_coefficient <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "Rayleigh coefficient must lie in (0, 1], got {}",
                self.rayleigh_coefficient
            )));
        }
        Ok(())
    }
}
