//! Double-layer optimizer: particle swarm over the rotation vector outside,
//! SDR + SCA digital beamforming inside.
//!
//! Fitness is evaluated at positions rounded to a grid of `quantum`
//! radians, so it is a deterministic function of the rounded rotation and
//! repeated positions are served from a cache. One particle always starts
//! at `phi = 0`, so the joint result is never below the fixed-array
//! design computed the same way.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::beamforming::{
    analog_mrt, compute_rates, effective_channels, sca_digital, zf_or_mrt, AnalogBeamformer, BeamformerSet,
    CovarianceSet, EffectiveChannels, InterferenceMask, ScaInit, ScaOptions, ScaOutcome, SumRateReport,
};
use crate::channel::{build_channels, Scenario};
use crate::error::{Error, Result};
use crate::pso::{clamp_to_box, pso_optimize, BatchFitness, PsoConfig, PsoOutcome};

/// Runs independent jobs, possibly in parallel. Results come back in input
/// order.
pub trait Executor: Sync {
    fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send;
}

/// Runs jobs one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl Executor for Serial {
    fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        items.into_iter().map(f).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointOptions {
    pub pso: PsoConfig,
    /// Inner optimizer. Its mask defines the fitness; see [`joint_optimize`].
    pub sca: ScaOptions,
    /// Start each particle's inner solve from its previous covariances.
    /// Iteration 0 always starts from zero forcing.
    pub warm_start: bool,
    /// Rotation grid, radians.
    pub quantum: f64,
    /// Extra initial positions after the `phi = 0` particle.
    pub extra_seeds: Vec<Vec<f64>>,
}

impl Default for JointOptions {
    fn default() -> Self {
        Self {
            pso: PsoConfig::default(),
            sca: ScaOptions::default(),
            warm_start: true,
            quantum: 1e-4,
            extra_seeds: Vec::new(),
        }
    }
}

/// Inner-layer result at one rotation vector.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    pub rotations: Vec<f64>,
    pub analog: Vec<AnalogBeamformer>,
    pub effective: EffectiveChannels,
    pub sca: ScaOutcome,
}

impl InnerSolution {
    pub fn sum_rate(&self) -> f64 {
        self.sca.report.sum_rate
    }

    pub fn beamformers(&self) -> BeamformerSet {
        BeamformerSet {
            analog: self.analog.clone(),
            digital: self.sca.digital.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointOutcome {
    pub rotations: Vec<f64>,
    pub beamformers: BeamformerSet,
    /// Full-SINR rates of `beamformers`.
    pub report: SumRateReport,
    /// Inner solution reported at `rotations`.
    pub inner: InnerSolution,
    pub pso: PsoOutcome,
    /// Inner solves actually run (cache misses).
    pub solves: usize,
    /// Inner solves that failed and scored negative infinity.
    pub failures: usize,
}

/// Analog MRT, effective channels and SCA at one rotation vector.
pub fn solve_inner(scenario: &Scenario, rotations: &[f64], sca: &ScaOptions) -> Result<InnerSolution> {
    let channels = build_channels(scenario, rotations)?;
    let analog = analog_mrt(scenario, rotations)?;
    let effective = effective_channels(&channels, &analog)?;
    let cfg = &scenario.config;
    let outcome = sca_digital(&effective, cfg.noise_power, cfg.power_budget, sca)?;
    Ok(InnerSolution {
        rotations: rotations.to_vec(),
        analog,
        effective,
        sca: outcome,
    })
}

/// Zero forcing (MRT where ZF is infeasible) at full power for every cell.
pub fn zf_solution(
    scenario: &Scenario,
    rotations: &[f64],
    mask: InterferenceMask,
) -> Result<(BeamformerSet, SumRateReport)> {
    let channels = build_channels(scenario, rotations)?;
    let analog = analog_mrt(scenario, rotations)?;
    let eff = effective_channels(&channels, &analog)?;
    let digital = zf_or_mrt(&eff, scenario.config.power_budget);
    let report = compute_rates(&eff, &digital, scenario.config.noise_power, mask)?;
    Ok((BeamformerSet { analog, digital }, report))
}

/// Rounds to the `quantum` grid, then clamps into the box.
pub fn quantize(rotations: &[f64], limits: &[[f64; 2]], quantum: f64) -> Vec<f64> {
    let mut q: Vec<f64> = rotations.iter().map(|v| libm::round(v / quantum) * quantum).collect();
    clamp_to_box(&mut q, limits);
    q
}

fn cache_key(q: &[f64]) -> Vec<u64> {
    q.iter().map(|v| (v + 0.0).to_bits()).collect()
}

fn check_quantum(quantum: f64) -> Result<()> {
    if quantum > 0.0 && quantum.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(alloc::format!("rotation quantum {quantum} must be positive")))
    }
}

struct JointFitness<'a, E: Executor> {
    scenario: &'a Scenario,
    options: &'a JointOptions,
    limits: Vec<[f64; 2]>,
    executor: &'a E,
    cache: BTreeMap<Vec<u64>, Option<InnerSolution>>,
    warm: Vec<Option<CovarianceSet>>,
    solves: usize,
    failures: usize,
}

impl<E: Executor> BatchFitness for JointFitness<'_, E> {
    fn evaluate(&mut self, iteration: usize, positions: &[Vec<f64>]) -> Vec<f64> {
        let rounded: Vec<Vec<f64>> = positions
            .iter()
            .map(|p| quantize(p, &self.limits, self.options.quantum))
            .collect();
        let keys: Vec<Vec<u64>> = rounded.iter().map(|q| cache_key(q)).collect();
        let mut pending = BTreeMap::new();
        let mut jobs = Vec::new();
        for (s, (q, key)) in rounded.iter().zip(&keys).enumerate() {
            if self.cache.contains_key(key) || pending.contains_key(key) {
                continue;
            }
            pending.insert(key.clone(), s);
            let init = match (&self.warm[s], self.options.warm_start && iteration > 0) {
                (Some(cov), true) => ScaInit::Covariances(cov.clone()),
                _ => ScaInit::Zf,
            };
            jobs.push((s, q.clone(), init));
        }
        let scenario = self.scenario;
        let base = &self.options.sca;
        let results = self.executor.map(jobs, |(s, q, init)| {
            let sca = ScaOptions { init, ..base.clone() };
            (s, solve_inner(scenario, &q, &sca))
        });
        for (s, result) in results {
            self.solves += 1;
            let entry = match result {
                Ok(sol) => Some(sol),
                Err(e) => {
                    log::warn!("inner solve failed at {:?}: {}", rounded[s], e);
                    self.failures += 1;
                    None
                }
            };
            self.cache.insert(keys[s].clone(), entry);
        }
        keys.iter()
            .enumerate()
            .map(|(s, key)| match &self.cache[key] {
                Some(sol) => {
                    self.warm[s] = Some(sol.sca.covariances.clone());
                    sol.sum_rate()
                }
                None => f64::NEG_INFINITY,
            })
            .collect()
    }
}

/// Joint rotation and beamforming design.
///
/// The fitness of a particle is the sum-rate of the inner solution under
/// `options.sca.mask`. With a partial mask the search only sees one class
/// of interference; the returned beamformers are then recomputed at the
/// chosen rotations with the full SINR, which is also what the report
/// holds.
pub fn joint_optimize<E: Executor>(scenario: &Scenario, options: &JointOptions, executor: &E) -> Result<JointOutcome> {
    check_quantum(options.quantum)?;
    let limits = scenario.rotation_limits();
    let mut seeds = Vec::with_capacity(1 + options.extra_seeds.len());
    seeds.push(alloc::vec![0.0; limits.len()]);
    seeds.extend(options.extra_seeds.iter().cloned());
    let mut fitness = JointFitness {
        scenario,
        options,
        limits: limits.clone(),
        executor,
        cache: BTreeMap::new(),
        warm: alloc::vec![None; options.pso.swarm_size],
        solves: 0,
        failures: 0,
    };
    let pso = pso_optimize(&mut fitness, &limits, &options.pso, &seeds)?;
    let rotations = quantize(&pso.best_position, &limits, options.quantum);
    let cached = fitness.cache.remove(&cache_key(&rotations)).flatten();
    let (solves, failures) = (fitness.solves, fitness.failures);
    let inner = match cached {
        Some(sol) if options.sca.mask == InterferenceMask::FULL => sol,
        _ => {
            let full = ScaOptions {
                mask: InterferenceMask::FULL,
                init: ScaInit::Zf,
                ..options.sca.clone()
            };
            solve_inner(scenario, &rotations, &full)?
        }
    };
    Ok(JointOutcome {
        rotations,
        beamformers: inner.beamformers(),
        report: inner.sca.report.clone(),
        inner,
        pso,
        solves,
        failures,
    })
}

/// Rotation search with zero-forcing fitness: the best rotations for a
/// ZF (or MRT fallback) digital stage.
pub fn zf_rotation_search<E: Executor>(
    scenario: &Scenario,
    pso: &PsoConfig,
    quantum: f64,
    executor: &E,
) -> Result<(Vec<f64>, BeamformerSet, SumRateReport, PsoOutcome)> {
    check_quantum(quantum)?;
    let limits = scenario.rotation_limits();
    let mut fitness = ZfFitness {
        scenario,
        limits: limits.clone(),
        quantum,
        executor,
    };
    let seeds = [alloc::vec![0.0; limits.len()]];
    let outcome = pso_optimize(&mut fitness, &limits, pso, &seeds)?;
    let rotations = quantize(&outcome.best_position, &limits, quantum);
    let (beams, report) = zf_solution(scenario, &rotations, InterferenceMask::FULL)?;
    Ok((rotations, beams, report, outcome))
}

struct ZfFitness<'a, E: Executor> {
    scenario: &'a Scenario,
    limits: Vec<[f64; 2]>,
    quantum: f64,
    executor: &'a E,
}

impl<E: Executor> BatchFitness for ZfFitness<'_, E> {
    fn evaluate(&mut self, _iteration: usize, positions: &[Vec<f64>]) -> Vec<f64> {
        let rounded: Vec<Vec<f64>> = positions.iter().map(|p| quantize(p, &self.limits, self.quantum)).collect();
        let scenario = self.scenario;
        self.executor.map(rounded, |q| match zf_solution(scenario, &q, InterferenceMask::FULL) {
            Ok((_, r)) => r.sum_rate,
            Err(e) => {
                log::warn!("zero-forcing fitness failed at {q:?}: {e}");
                f64::NEG_INFINITY
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_rounds_then_clamps() {
        let lim = [[-0.5, 0.5], [-0.5, 0.5]];
        assert_eq!(quantize(&[0.123_44, -0.7], &lim, 1e-3), alloc::vec![0.123, -0.5]);
        let q = quantize(&[-0.000_04, 0.0], &lim, 1e-4);
        assert_eq!(cache_key(&q), cache_key(&[0.0, 0.0]));
    }

    #[test]
    fn serial_executor_keeps_order() {
        let out = Serial.map((0..5).collect(), |x: i32| x * x);
        assert_eq!(out, alloc::vec![0, 1, 4, 9, 16]);
    }
}
