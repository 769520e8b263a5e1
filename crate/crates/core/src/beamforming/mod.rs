//! Two-stage hybrid beamforming: analog MRT per cell, then a digital
//! precoder on the resulting `K x K` effective channels.

mod analog;
mod extract;
mod rates;
mod sca;
mod sdr;
mod zf;

pub use analog::{analog_mrt, effective_channels, AnalogBeamformer, EffectiveChannels};
pub use extract::{extract_rank_one, ExtractionPath};
pub use rates::{
    cell_powers, compute_rates, compute_rates_raw, covariance_rates, InterferenceMask, SumRateReport,
    UserRate,
};
pub use sca::{
    feasible_rescale, linearization, sca_digital, zf_or_mrt, ScaFailure, ScaInit, ScaOptions, ScaOutcome, ScaTraceRow,
    SolutionSource,
};
pub use sdr::{solve_relaxed_subproblem, KktReport, SolverOptions, Subproblem, SubproblemSolution};
pub use zf::{zf_all_cells, zf_digital, ZfOutcome};

use alloc::vec::Vec;

use crate::linalg::{CMatrix, CVector};

/// Digital precoder of one cell, `K x K`; column `k` feeds user `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitalBeamformer {
    pub matrix: CMatrix,
}

impl DigitalBeamformer {
    pub fn from_columns(columns: &[CVector]) -> Self {
        Self {
            matrix: CMatrix::from_columns(columns),
        }
    }

    pub fn column(&self, k: usize) -> CVector {
        self.matrix.column(k)
    }

    pub fn users(&self) -> usize {
        self.matrix.cols()
    }

    /// Lifts every column to its covariance `f f^H`.
    pub fn covariances(&self) -> Vec<CMatrix> {
        (0..self.users()).map(|k| CMatrix::outer(&self.column(k))).collect()
    }
}

/// Analog and digital stages of every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    pub analog: Vec<AnalogBeamformer>,
    pub digital: Vec<DigitalBeamformer>,
}

/// One Hermitian PSD block `W_{m,k}` per user, in global user order.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSet {
    pub blocks: Vec<CMatrix>,
}

impl CovarianceSet {
    pub fn from_digital(digital: &[DigitalBeamformer]) -> Self {
        Self {
            blocks: digital.iter().flat_map(|d| d.covariances()).collect(),
        }
    }
}
