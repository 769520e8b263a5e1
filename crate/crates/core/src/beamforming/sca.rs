use alloc::vec::Vec;
use core::f64::consts::LN_2;
use core::fmt;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::extract::{extract_rank_one, ExtractionPath};
use super::rates::{cell_powers, compute_rates, covariance_rates, quadratic_form};
use super::sdr::{solve_relaxed_subproblem, SolverOptions, Subproblem};
use super::zf::zf_digital;
use super::{CovarianceSet, DigitalBeamformer, EffectiveChannels, InterferenceMask, SumRateReport};
use crate::error::Error;
use crate::linalg::{CMatrix, CVector};

/// Starting point of the successive approximation.
#[derive(Debug, Clone, PartialEq)]
pub enum ScaInit {
    /// Zero forcing at full power, MRT with equal power where ZF fails.
    Zf,
    /// A previous solution, rescaled into the power budget if needed.
    Covariances(CovarianceSet),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaOptions {
    pub max_iters: usize,
    /// Stop once the sum-rate gains less than this (bps/Hz).
    pub tol: f64,
    pub solver: SolverOptions,
    pub init: ScaInit,
    pub mask: InterferenceMask,
    pub extraction_samples: usize,
    pub extraction_seed: u64,
}

impl Default for ScaOptions {
    fn default() -> Self {
        Self {
            max_iters: 30,
            tol: 1e-4,
            solver: SolverOptions::default(),
            init: ScaInit::Zf,
            mask: InterferenceMask::FULL,
            extraction_samples: 200,
            extraction_seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaTraceRow {
    pub iter: usize,
    /// Optimal value of the convex surrogate, bits (negated rate scale).
    pub surrogate_obj: f64,
    /// Lifted sum-rate at the new iterate.
    pub true_sum_rate: f64,
    pub max_kkt_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionSource {
    /// Rank-one extraction of the final iterate.
    Sca,
    /// The zero-forcing start point scored higher after extraction.
    Initial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaOutcome {
    /// Final lifted iterate.
    pub covariances: CovarianceSet,
    pub digital: Vec<DigitalBeamformer>,
    /// Rates of `digital` under the options' interference mask.
    pub report: SumRateReport,
    /// Lifted sum-rate per iterate, starting with the initial point.
    pub trajectory: Vec<f64>,
    pub trace: Vec<ScaTraceRow>,
    pub iterations: usize,
    pub source: SolutionSource,
    pub converged: bool,
    pub randomized_blocks: usize,
}

/// Inner solver failure, with the last iterate known to be feasible.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaFailure {
    pub error: Error,
    pub last_feasible: CovarianceSet,
    pub trajectory: Vec<f64>,
}

impl fmt::Display for ScaFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SCA stopped after {} iterates: {}", self.trajectory.len(), self.error)
    }
}

impl From<ScaFailure> for Error {
    fn from(f: ScaFailure) -> Self {
        f.error
    }
}

/// Gradient term of the concave part at `cov`: `C_v = (1 / ln 2) sum_u
/// H_{v,u} / a_u` over the users `u` that stream `v` interferes with.
pub fn linearization(eff: &EffectiveChannels, cov: &CovarianceSet, noise: f64, mask: InterferenceMask) -> Vec<CMatrix> {
    let layout = &eff.layout;
    let total = layout.total();
    let interference: Vec<f64> = (0..total)
        .map(|u| {
            let (m, k) = layout.locate(u);
            let mut a = noise;
            for i in 0..layout.cells() {
                for j in 0..layout.users_in(i) {
                    if mask.counts(i, j, m, k) {
                        a += quadratic_form(&cov.blocks[layout.index(i, j)], eff.by_index(i, u));
                    }
                }
            }
            a
        })
        .collect();
    (0..total)
        .map(|v| {
            let (i, j) = layout.locate(v);
            let size = layout.users_in(i);
            let mut c = CMatrix::zeros(size, size);
            for (u, level) in interference.iter().enumerate() {
                let (m, k) = layout.locate(u);
                if mask.counts(i, j, m, k) {
                    c = c.add(&CMatrix::outer(eff.by_index(i, u)).scale(1.0 / (LN_2 * level)));
                }
            }
            c
        })
        .collect()
}

/// Scales each cell's blocks down (never up) onto the power budget.
pub fn feasible_rescale(eff: &EffectiveChannels, cov: &CovarianceSet, power_budget: f64) -> CovarianceSet {
    let layout = &eff.layout;
    let mut blocks = cov.blocks.clone();
    for m in 0..layout.cells() {
        let p: f64 = (0..layout.users_in(m))
            .map(|k| eff.grams[m].trace_product_re(&blocks[layout.index(m, k)]))
            .sum();
        if p > power_budget {
            let s = power_budget / p;
            for k in 0..layout.users_in(m) {
                let idx = layout.index(m, k);
                blocks[idx] = blocks[idx].scale(s);
            }
        }
    }
    CovarianceSet { blocks }
}

fn scale_to_power(q: &CMatrix, v: &[Complex64], power: f64) -> CVector {
    let p = quadratic_form(q, v);
    if p > 0.0 {
        let s = libm::sqrt(power / p);
        v.iter().map(|z| z * s).collect()
    } else {
        v.to_vec()
    }
}

/// Zero forcing per cell; MRT with equal power where ZF is infeasible.
pub fn zf_or_mrt(eff: &EffectiveChannels, power_budget: f64) -> Vec<DigitalBeamformer> {
    (0..eff.cells())
        .map(|m| match zf_digital(eff, m, power_budget) {
            Ok(z) => z.beamformer,
            Err(_) => {
                let k = eff.layout.users_in(m);
                let cols: Vec<CVector> = (0..k)
                    .map(|j| scale_to_power(&eff.grams[m], eff.get(m, m, j), power_budget / k as f64))
                    .collect();
                DigitalBeamformer::from_columns(&cols)
            }
        })
        .collect()
}

fn fit_power(eff: &EffectiveChannels, digital: &mut [DigitalBeamformer], power_budget: f64) {
    let powers = cell_powers(eff, digital);
    for (d, p) in digital.iter_mut().zip(powers) {
        if p > power_budget {
            d.matrix = d.matrix.scale(libm::sqrt(power_budget / p));
        }
    }
}

fn lifted_rate(eff: &EffectiveChannels, cov: &CovarianceSet, noise: f64, mask: InterferenceMask) -> f64 {
    covariance_rates(eff, cov, noise, mask).map(|r| r.sum_rate).unwrap_or(f64::NEG_INFINITY)
}

fn digital_rate(eff: &EffectiveChannels, digital: &[DigitalBeamformer], noise: f64, mask: InterferenceMask) -> f64 {
    compute_rates(eff, digital, noise, mask).map(|r| r.sum_rate).unwrap_or(f64::NEG_INFINITY)
}

/// SDR + SCA digital beamforming for all cells jointly.
///
/// Each iteration linearizes the concave part of the sum-rate at the
/// current point and solves the convex relaxation; the lifted sum-rate
/// never decreases. The final iterate is reduced to rank one and compared
/// with the zero-forcing start, keeping the better of the two.
pub fn sca_digital(
    eff: &EffectiveChannels,
    noise: f64,
    power_budget: f64,
    options: &ScaOptions,
) -> core::result::Result<ScaOutcome, ScaFailure> {
    let mask = options.mask;
    let initial_digital = zf_or_mrt(eff, power_budget);
    let mut cov = match &options.init {
        ScaInit::Zf => CovarianceSet::from_digital(&initial_digital),
        ScaInit::Covariances(w) => feasible_rescale(eff, w, power_budget),
    };
    let mut rate = lifted_rate(eff, &cov, noise, mask);
    let mut trajectory = alloc::vec![rate];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for iter in 1..=options.max_iters {
        let linear = linearization(eff, &cov, noise, mask);
        let problem = Subproblem {
            channels: eff,
            noise,
            power_budget,
            mask,
            linear,
        };
        let solution = match solve_relaxed_subproblem(&problem, &options.solver) {
            Ok(s) => s,
            Err(error) => {
                return Err(ScaFailure {
                    error,
                    last_feasible: cov,
                    trajectory,
                })
            }
        };
        iterations = iter;
        // Constant terms of the surrogate at the linearization point.
        let offset: f64 = {
            let a: f64 = (0..eff.layout.total())
                .map(|u| {
                    let (m, k) = eff.layout.locate(u);
                    let mut a = noise;
                    for i in 0..eff.cells() {
                        for j in 0..eff.layout.users_in(i) {
                            if mask.counts(i, j, m, k) {
                                a += quadratic_form(&cov.blocks[eff.layout.index(i, j)], eff.by_index(i, u));
                            }
                        }
                    }
                    libm::log2(a)
                })
                .sum();
            let lin: f64 = problem.linear.iter().zip(&cov.blocks).map(|(c, w)| c.trace_product_re(w)).sum();
            a - lin
        };
        let next = feasible_rescale(eff, &solution.covariances, power_budget);
        let next_rate = lifted_rate(eff, &next, noise, mask);
        trace.push(ScaTraceRow {
            iter,
            surrogate_obj: solution.objective + offset,
            true_sum_rate: next_rate,
            max_kkt_residual: solution.kkt.max_residual(),
        });
        let gain = next_rate - rate;
        if gain >= 0.0 {
            cov = next;
            rate = next_rate;
            trajectory.push(rate);
        }
        if gain < options.tol {
            converged = true;
            break;
        }
    }

    let (extracted, randomized_blocks) = extract_all(eff, &cov, noise, power_budget, options);
    let extracted_rate = digital_rate(eff, &extracted, noise, mask);
    let initial_rate = digital_rate(eff, &initial_digital, noise, mask);
    let (digital, source) = if extracted_rate >= initial_rate {
        (extracted, SolutionSource::Sca)
    } else {
        (initial_digital, SolutionSource::Initial)
    };
    let report = compute_rates(eff, &digital, noise, mask).map_err(|error| ScaFailure {
        error,
        last_feasible: cov.clone(),
        trajectory: trajectory.clone(),
    })?;
    Ok(ScaOutcome {
        covariances: cov,
        digital,
        report,
        trajectory,
        trace,
        iterations,
        source,
        converged,
        randomized_blocks,
    })
}

fn extract_all(
    eff: &EffectiveChannels,
    cov: &CovarianceSet,
    noise: f64,
    power_budget: f64,
    options: &ScaOptions,
) -> (Vec<DigitalBeamformer>, usize) {
    let layout = &eff.layout;
    let mut rng = ChaCha8Rng::seed_from_u64(options.extraction_seed);
    // Principal vectors first, so randomized candidates are scored against
    // a complete precoder.
    let mut columns: Vec<Vec<CVector>> = (0..layout.cells())
        .map(|m| {
            (0..layout.users_in(m))
                .map(|k| {
                    let mut none = ChaCha8Rng::seed_from_u64(0);
                    extract_rank_one(&cov.blocks[layout.index(m, k)], 0, &mut none, |_| 0.0).0
                })
                .collect()
        })
        .collect();
    let mut randomized = 0;
    for m in 0..layout.cells() {
        for k in 0..layout.users_in(m) {
            let w = &cov.blocks[layout.index(m, k)];
            let snapshot = columns.clone();
            let (v, path) = extract_rank_one(w, options.extraction_samples, &mut rng, |cand| {
                let mut trial = snapshot.clone();
                trial[m][k] = cand.clone();
                let mut digital: Vec<DigitalBeamformer> =
                    trial.iter().map(|c| DigitalBeamformer::from_columns(c)).collect();
                fit_power(eff, &mut digital, power_budget);
                digital_rate(eff, &digital, noise, options.mask)
            });
            if let ExtractionPath::Randomized { .. } = path {
                randomized += 1;
            }
            columns[m][k] = v;
        }
    }
    let mut digital: Vec<DigitalBeamformer> = columns.iter().map(|c| DigitalBeamformer::from_columns(c)).collect();
    fit_power(eff, &mut digital, power_budget);
    (digital, randomized)
}
