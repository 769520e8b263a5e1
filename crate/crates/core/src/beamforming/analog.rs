use alloc::format;
use alloc::vec::Vec;

use crate::channel::{ChannelSet, Scenario, UserLayout};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::steering::near_steering;

/// Unit-modulus `N x K` analog beamformer of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogBeamformer {
    pub matrix: CMatrix,
}

/// Column `k` of cell `m` is `sqrt(N) b(theta_mk, r_mk, phi_m)`: a matched
/// filter on the line-of-sight near-field path of each served user.
pub fn analog_mrt(scenario: &Scenario, rotations: &[f64]) -> Result<Vec<AnalogBeamformer>> {
    scenario.check_rotations(rotations)?;
    let cfg = &scenario.config;
    let sqrt_n = libm::sqrt(cfg.antenna_count as f64);
    Ok((0..scenario.cell_count())
        .map(|m| {
            let columns: Vec<CVector> = (0..scenario.users_in(m))
                .map(|k| {
                    let u = scenario.user(m, k);
                    near_steering(u.angle, u.range, rotations[m], cfg)
                        .into_iter()
                        .map(|z| z * sqrt_n)
                        .collect()
                })
                .collect();
            AnalogBeamformer {
                matrix: CMatrix::from_columns(&columns),
            }
        })
        .collect())
}

/// Effective channels `h_bar_{i,u} = F_{A,i}^H h_{i,u}` and the analog Gram
/// matrices `F_{A,i}^H F_{A,i}` that carry the power constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannels {
    pub layout: UserLayout,
    /// Indexed by `source * U + u`; length `K_source`.
    pub vectors: Vec<CVector>,
    pub grams: Vec<CMatrix>,
}

impl EffectiveChannels {
    pub fn cells(&self) -> usize {
        self.layout.cells()
    }

    pub fn get(&self, source: usize, cell: usize, user: usize) -> &CVector {
        &self.vectors[source * self.layout.total() + self.layout.index(cell, user)]
    }

    /// Channel from `source` to the user at global position `u`.
    pub fn by_index(&self, source: usize, u: usize) -> &CVector {
        &self.vectors[source * self.layout.total() + u]
    }

    /// Rows `h_bar_{m,m,k}^H` of cell `m`'s own users.
    pub fn serving_matrix(&self, m: usize) -> CMatrix {
        let k = self.layout.users_in(m);
        CMatrix::from_fn(k, self.grams[m].cols(), |row, col| self.get(m, m, row)[col].conj())
    }

    /// Builds effective channels directly, e.g. for tests. The Gram
    /// matrices default to `N I` (unit-modulus, orthogonal columns).
    pub fn from_parts(layout: UserLayout, vectors: Vec<CVector>, grams: Vec<CMatrix>) -> Result<Self> {
        let total = layout.total();
        if vectors.len() != layout.cells() * total || grams.len() != layout.cells() {
            return Err(Error::DimensionMismatch(format!(
                "{} vectors and {} grams for {} cells / {} users",
                vectors.len(),
                grams.len(),
                layout.cells(),
                total
            )));
        }
        for (i, g) in grams.iter().enumerate() {
            let k = layout.users_in(i);
            if g.rows() != k || g.cols() != k {
                return Err(Error::DimensionMismatch(format!("gram {i} is not {k} x {k}")));
            }
            if vectors[i * total..(i + 1) * total].iter().any(|v| v.len() != k) {
                return Err(Error::DimensionMismatch(format!("cell {i} effective channels need length {k}")));
            }
        }
        Ok(Self { layout, vectors, grams })
    }
}

pub fn effective_channels(channels: &ChannelSet, analog: &[AnalogBeamformer]) -> Result<EffectiveChannels> {
    let m_count = channels.cells();
    if analog.len() != m_count {
        return Err(Error::DimensionMismatch(format!(
            "{} analog beamformers for {} cells",
            analog.len(),
            m_count
        )));
    }
    for (i, fa) in analog.iter().enumerate() {
        if fa.matrix.rows() != channels.antennas || fa.matrix.cols() != channels.layout.users_in(i) {
            return Err(Error::DimensionMismatch(format!(
                "analog beamformer {i} is {} x {}",
                fa.matrix.rows(),
                fa.matrix.cols()
            )));
        }
    }
    let total = channels.layout.total();
    let mut vectors = Vec::with_capacity(m_count * total);
    for (i, fa) in analog.iter().enumerate() {
        for u in 0..total {
            vectors.push(fa.matrix.adjoint_mul_vec(&channels.links[i * total + u].coefficients));
        }
    }
    let grams = analog.iter().map(|fa| fa.matrix.adjoint().mul(&fa.matrix)).collect();
    Ok(EffectiveChannels {
        layout: channels.layout.clone(),
        vectors,
        grams,
    })
}

