use alloc::vec::Vec;

use num_complex::Complex64;

use super::rates::quadratic_form;
use super::{DigitalBeamformer, EffectiveChannels};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, inverse, CMatrix};

const CONDITION_LIMIT: f64 = 1e10;
const LOADING: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct ZfOutcome {
    pub beamformer: DigitalBeamformer,
    /// Diagonal loading was applied because the channel was near singular.
    pub regularized: bool,
    /// 2-norm condition number of the effective channel matrix.
    pub condition: f64,
}

/// Zero-forcing precoder for cell `m`: `F_D` inverts the matrix of
/// effective channels, with columns scaled so every stream radiates
/// `P / K` after the analog stage.
pub fn zf_digital(eff: &EffectiveChannels, m: usize, power_budget: f64) -> Result<ZfOutcome> {
    let a = eff.serving_matrix(m);
    let k = a.rows();
    if !a.is_finite() || a.frobenius_norm_sqr() == 0.0 {
        return Err(Error::ZfInfeasible { cell: m });
    }
    let gram = a.adjoint().mul(&a);
    let eig = hermitian_eigen(&gram);
    let condition = if eig.min_value() > 0.0 {
        libm::sqrt(eig.max_value() / eig.min_value())
    } else {
        f64::INFINITY
    };
    let direct = if condition < CONDITION_LIMIT { inverse(&a) } else { None };
    let (mut f, regularized) = match direct {
        Some(f) => (f, false),
        None => {
            let eps = LOADING * gram.trace().re / k as f64;
            let loaded = a.mul(&a.adjoint()).add(&CMatrix::identity(k).scale(eps));
            let inv = inverse(&loaded).ok_or(Error::ZfInfeasible { cell: m })?;
            log::debug!("cell {m}: ZF regularized, condition number {condition:e}");
            (a.adjoint().mul(&inv), true)
        }
    };
    let q = &eff.grams[m];
    let per_stream = power_budget / k as f64;
    for j in 0..k {
        let col = f.column(j);
        let p = quadratic_form(q, &col);
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::ZfInfeasible { cell: m });
        }
        let s = libm::sqrt(per_stream / p);
        let scaled: Vec<Complex64> = col.iter().map(|z| z * s).collect();
        f.set_column(j, &scaled);
    }
    Ok(ZfOutcome {
        beamformer: DigitalBeamformer { matrix: f },
        regularized,
        condition,
    })
}

pub fn zf_all_cells(eff: &EffectiveChannels, power_budget: f64) -> Result<Vec<ZfOutcome>> {
    (0..eff.cells()).map(|m| zf_digital(eff, m, power_budget)).collect()
}
