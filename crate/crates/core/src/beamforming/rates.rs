use alloc::format;
use alloc::vec::Vec;

use super::{BeamformerSet, CovarianceSet, DigitalBeamformer, EffectiveChannels};
use crate::channel::{ChannelSet, UserLayout};
use crate::error::{Error, Result};
use crate::linalg::{inner, CMatrix};

/// Which interference classes enter the SINR denominator. Reports always
/// store both terms; the mask only decides which of them count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterferenceMask {
    pub intra: bool,
    pub inter: bool,
}

impl InterferenceMask {
    pub const FULL: Self = Self { intra: true, inter: true };
    /// Intra-cell (near-field) interference only.
    pub const INTRA_ONLY: Self = Self { intra: true, inter: false };
    /// Inter-cell (mixed-field) interference only.
    pub const INTER_ONLY: Self = Self { intra: false, inter: true };
    pub const NONE: Self = Self { intra: false, inter: false };

    /// Whether stream `(source, stream)` interferes with user `(cell, user)`.
    pub fn counts(&self, source: usize, stream: usize, cell: usize, user: usize) -> bool {
        if source == cell {
            self.intra && stream != user
        } else {
            self.inter
        }
    }
}

impl Default for InterferenceMask {
    fn default() -> Self {
        Self::FULL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserRate {
    pub cell: usize,
    pub user: usize,
    pub signal: f64,
    pub intra: f64,
    pub inter: f64,
    pub noise: f64,
    pub sinr: f64,
    /// bps/Hz.
    pub rate: f64,
}

/// Per-user SINR decomposition and rates.
#[derive(Debug, Clone, PartialEq)]
pub struct SumRateReport {
    pub users: Vec<UserRate>,
    pub cell_rates: Vec<f64>,
    pub sum_rate: f64,
    pub mask: InterferenceMask,
}

impl SumRateReport {
    pub fn rates(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.rate).collect()
    }
}

fn build_report(
    layout: &UserLayout,
    noise: f64,
    mask: InterferenceMask,
    power: impl Fn(usize, usize, usize) -> f64,
) -> SumRateReport {
    let mut users = Vec::with_capacity(layout.total());
    let mut cell_rates = alloc::vec![0.0; layout.cells()];
    for u in 0..layout.total() {
        let (m, k) = layout.locate(u);
        let mut signal = 0.0;
        let mut intra = 0.0;
        let mut inter = 0.0;
        for i in 0..layout.cells() {
            for j in 0..layout.users_in(i) {
                let p = power(i, u, j);
                if i != m {
                    inter += p;
                } else if j == k {
                    signal = p;
                } else {
                    intra += p;
                }
            }
        }
        let mut denom = noise;
        if mask.intra {
            denom += intra;
        }
        if mask.inter {
            denom += inter;
        }
        let sinr = signal / denom;
        let rate = libm::log2(1.0 + sinr);
        cell_rates[m] += rate;
        users.push(UserRate {
            cell: m,
            user: k,
            signal,
            intra,
            inter,
            noise,
            sinr,
            rate,
        });
    }
    let sum_rate = cell_rates.iter().sum();
    SumRateReport {
        users,
        cell_rates,
        sum_rate,
        mask,
    }
}

fn check_digital(layout: &UserLayout, digital: &[DigitalBeamformer]) -> Result<()> {
    if digital.len() != layout.cells() {
        return Err(Error::DimensionMismatch(format!(
            "{} digital beamformers for {} cells",
            digital.len(),
            layout.cells()
        )));
    }
    for (i, d) in digital.iter().enumerate() {
        let k = layout.users_in(i);
        if d.matrix.rows() != k || d.matrix.cols() != k {
            return Err(Error::DimensionMismatch(format!(
                "digital beamformer {i} is {} x {}, expected {k} x {k}",
                d.matrix.rows(),
                d.matrix.cols()
            )));
        }
    }
    Ok(())
}

/// Rates from effective channels and digital precoders.
pub fn compute_rates(
    eff: &EffectiveChannels,
    digital: &[DigitalBeamformer],
    noise: f64,
    mask: InterferenceMask,
) -> Result<SumRateReport> {
    check_digital(&eff.layout, digital)?;
    let columns: Vec<Vec<_>> = digital
        .iter()
        .map(|d| (0..d.users()).map(|j| d.column(j)).collect())
        .collect();
    Ok(build_report(&eff.layout, noise, mask, |i, u, j| {
        inner(eff.by_index(i, u), &columns[i][j]).norm_sqr()
    }))
}

/// Rates from the raw `N`-element channels and the full hybrid precoder
/// `F_A F_D`; matches [`compute_rates`] on the same beamformers.
pub fn compute_rates_raw(channels: &ChannelSet, beams: &BeamformerSet, noise: f64) -> Result<SumRateReport> {
    check_digital(&channels.layout, &beams.digital)?;
    if beams.analog.len() != channels.cells() {
        return Err(Error::DimensionMismatch(format!(
            "{} analog beamformers for {} cells",
            beams.analog.len(),
            channels.cells()
        )));
    }
    let total = channels.layout.total();
    let transmit: Vec<Vec<_>> = beams
        .analog
        .iter()
        .zip(&beams.digital)
        .map(|(fa, fd)| {
            if fa.matrix.cols() != fd.matrix.rows() || fa.matrix.rows() != channels.antennas {
                return Err(Error::DimensionMismatch(format!(
                    "analog {} x {} does not match digital {} x {}",
                    fa.matrix.rows(),
                    fa.matrix.cols(),
                    fd.matrix.rows(),
                    fd.matrix.cols()
                )));
            }
            Ok((0..fd.users()).map(|j| fa.matrix.mul_vec(&fd.column(j))).collect())
        })
        .collect::<Result<_>>()?;
    Ok(build_report(&channels.layout, noise, InterferenceMask::FULL, |i, u, j| {
        inner(&channels.links[i * total + u].coefficients, &transmit[i][j]).norm_sqr()
    }))
}

/// Rates of the lifted problem, `Tr(H W)` in place of `|h^H f|^2`.
pub fn covariance_rates(
    eff: &EffectiveChannels,
    cov: &CovarianceSet,
    noise: f64,
    mask: InterferenceMask,
) -> Result<SumRateReport> {
    let layout = &eff.layout;
    if cov.blocks.len() != layout.total() {
        return Err(Error::DimensionMismatch(format!(
            "{} covariance blocks for {} users",
            cov.blocks.len(),
            layout.total()
        )));
    }
    Ok(build_report(layout, noise, mask, |i, u, j| {
        quadratic_form(&cov.blocks[layout.index(i, j)], eff.by_index(i, u))
    }))
}

/// `v^H A v` for Hermitian `A`.
pub(crate) fn quadratic_form(a: &CMatrix, v: &[num_complex::Complex64]) -> f64 {
    inner(v, &a.mul_vec(v)).re
}

/// Transmit power `||F_A F_D||_F^2` of every cell.
pub fn cell_powers(eff: &EffectiveChannels, digital: &[DigitalBeamformer]) -> Vec<f64> {
    digital
        .iter()
        .zip(&eff.grams)
        .map(|(d, q)| (0..d.users()).map(|j| quadratic_form(q, &d.column(j))).sum())
        .collect()
}
