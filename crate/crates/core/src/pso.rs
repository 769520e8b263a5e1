//! Particle swarm search over a box of rotation vectors.
//!
//! Velocities follow `v <- w v + c1 tau1 (p - x) + c2 tau2 (g - x)` with
//! scalar `tau1, tau2 ~ U[0, 1]` per particle and iteration, and positions
//! are clamped back into the box after every move. The inertia weight
//! decays linearly from `inertia_max` to `inertia_min`.
//!
//! Each particle draws from its own ChaCha stream derived from the master
//! seed, and fitness values are requested one whole swarm at a time, so an
//! evaluator may score a batch in parallel without changing any number.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub iterations: usize,
    /// Individual learning factor.
    pub c1: f64,
    /// Global learning factor.
    pub c2: f64,
    pub inertia_min: f64,
    pub inertia_max: f64,
    pub seed: u64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            swarm_size: 50,
            iterations: 50,
            c1: 1.4,
            c2: 1.4,
            inertia_min: 0.4,
            inertia_max: 0.9,
            seed: 0,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.swarm_size == 0 || self.iterations == 0 {
            return Err(Error::InvalidConfig(format!(
                "swarm size {} and iteration count {} must be positive",
                self.swarm_size, self.iterations
            )));
        }
        if !(self.inertia_min > 0.0 && self.inertia_min <= self.inertia_max && self.inertia_max.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "inertia bounds [{}, {}] must satisfy 0 < min <= max",
                self.inertia_min, self.inertia_max
            )));
        }
        if !(self.c1 >= 0.0 && self.c2 >= 0.0 && self.c1.is_finite() && self.c2.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning factors {} and {} must be finite and non-negative",
                self.c1, self.c2
            )));
        }
        Ok(())
    }

    /// Inertia weight for update `t` of `iterations` (1-based).
    pub fn inertia(&self, t: usize) -> f64 {
        self.inertia_max - (self.inertia_max - self.inertia_min) * t as f64 / self.iterations as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub best_position: Vec<f64>,
    /// bps/Hz for the rotation search.
    pub best_fitness: f64,
}

/// Scores a whole swarm at once.
pub trait BatchFitness {
    /// `iteration` is 0 for the initial swarm. Non-finite scores count as
    /// negative infinity.
    fn evaluate(&mut self, iteration: usize, positions: &[Vec<f64>]) -> Vec<f64>;
}

/// Adapts a plain function, evaluated one position at a time.
pub struct PointFitness<F>(pub F);

impl<F: FnMut(&[f64]) -> f64> BatchFitness for PointFitness<F> {
    fn evaluate(&mut self, _iteration: usize, positions: &[Vec<f64>]) -> Vec<f64> {
        positions.iter().map(|p| (self.0)(p)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoTraceRow {
    pub iter: usize,
    pub best_fitness: f64,
    /// Mean over particles with a finite score at this iteration.
    pub mean_fitness: f64,
    pub best_position: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoOutcome {
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    /// Global-best fitness after the initial swarm and after each update.
    pub trajectory: Vec<f64>,
    pub trace: Vec<PsoTraceRow>,
    pub particles: Vec<Particle>,
    pub evaluations: usize,
}

/// Clamps every coordinate into its interval.
pub fn clamp_to_box(x: &mut [f64], limits: &[[f64; 2]]) {
    for (v, &[lo, hi]) in x.iter_mut().zip(limits) {
        *v = v.max(lo).min(hi);
    }
}

fn score(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Maximizes `fitness` over the box `limits`.
///
/// `seeds` replace the random initial positions of the first particles
/// (clamped into the box), which guarantees the result is at least as good
/// as every seed.
pub fn pso_optimize<F: BatchFitness + ?Sized>(
    fitness: &mut F,
    limits: &[[f64; 2]],
    cfg: &PsoConfig,
    seeds: &[Vec<f64>],
) -> Result<PsoOutcome> {
    cfg.validate()?;
    let dims = limits.len();
    if dims == 0 {
        return Err(Error::InvalidConfig("empty search box".into()));
    }
    for (d, &[lo, hi]) in limits.iter().enumerate() {
        if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidConfig(format!("bad interval [{lo}, {hi}] on axis {d}")));
        }
    }
    if seeds.len() > cfg.swarm_size {
        return Err(Error::InvalidConfig(format!(
            "{} seeds for a swarm of {}",
            seeds.len(),
            cfg.swarm_size
        )));
    }
    if let Some(s) = seeds.iter().find(|s| s.len() != dims) {
        return Err(Error::DimensionMismatch(format!("seed of length {} in a {dims}-D box", s.len())));
    }

    let ranges: Vec<f64> = limits.iter().map(|&[lo, hi]| hi - lo).collect();
    let mut rngs: Vec<ChaCha8Rng> = (0..cfg.swarm_size)
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(s as u64);
            rng
        })
        .collect();

    let mut particles: Vec<Particle> = rngs
        .iter_mut()
        .enumerate()
        .map(|(s, rng)| {
            let mut position: Vec<f64> = limits.iter().map(|&[lo, hi]| lo + (hi - lo) * rng.gen::<f64>()).collect();
            let velocity: Vec<f64> = ranges.iter().map(|r| 0.25 * r * (2.0 * rng.gen::<f64>() - 1.0)).collect();
            if let Some(seed) = seeds.get(s) {
                position.clone_from(seed);
                clamp_to_box(&mut position, limits);
            }
            Particle {
                best_position: position.clone(),
                position,
                velocity,
                best_fitness: f64::NEG_INFINITY,
            }
        })
        .collect();

    let mut evaluations = 0;
    let mut best: Option<(usize, f64)> = None;
    let mut best_position = particles[0].position.clone();
    let mut trajectory = Vec::with_capacity(cfg.iterations + 1);
    let mut trace = Vec::with_capacity(cfg.iterations + 1);

    for t in 0..=cfg.iterations {
        if t > 0 {
            let w = cfg.inertia(t);
            for (p, rng) in particles.iter_mut().zip(rngs.iter_mut()) {
                let tau1: f64 = rng.gen();
                let tau2: f64 = rng.gen();
                for d in 0..dims {
                    let cap = 0.5 * ranges[d];
                    let v = w * p.velocity[d]
                        + cfg.c1 * tau1 * (p.best_position[d] - p.position[d])
                        + cfg.c2 * tau2 * (best_position[d] - p.position[d]);
                    p.velocity[d] = v.max(-cap).min(cap);
                    p.position[d] += p.velocity[d];
                }
                clamp_to_box(&mut p.position, limits);
            }
        }
        let positions: Vec<Vec<f64>> = particles.iter().map(|p| p.position.clone()).collect();
        let scores = fitness.evaluate(t, &positions);
        if scores.len() != positions.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} scores for {} particles",
                scores.len(),
                positions.len()
            )));
        }
        evaluations += scores.len();
        let mut finite_sum = 0.0;
        let mut finite_count = 0usize;
        for (s, (p, &raw)) in particles.iter_mut().zip(&scores).enumerate() {
            let f = score(raw);
            if f.is_finite() {
                finite_sum += f;
                finite_count += 1;
            }
            if f > p.best_fitness {
                p.best_fitness = f;
                p.best_position.clone_from(&p.position);
            }
            // Strict comparison: the lowest index wins ties.
            if best.is_none_or(|(_, b)| f > b) {
                best = Some((s, f));
                best_position.clone_from(&p.position);
            }
        }
        let best_fitness = best.map_or(f64::NEG_INFINITY, |(_, b)| b);
        trajectory.push(best_fitness);
        trace.push(PsoTraceRow {
            iter: t,
            best_fitness,
            mean_fitness: if finite_count > 0 {
                finite_sum / finite_count as f64
            } else {
                f64::NEG_INFINITY
            },
            best_position: best_position.clone(),
        });
    }

    Ok(PsoOutcome {
        best_fitness: best.map_or(f64::NEG_INFINITY, |(_, b)| b),
        best_position,
        trajectory,
        trace,
        particles,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn toy(x: &[f64]) -> f64 {
        -x.iter().map(|v| (v - 0.1) * (v - 0.1)).sum::<f64>()
    }

    fn limits(m: usize) -> Vec<[f64; 2]> {
        alloc::vec![[-PI / 6.0, PI / 6.0]; m]
    }

    #[test]
    fn recovers_toy_optimum() {
        for m in 1..=3 {
            let cfg = PsoConfig { seed: m as u64, ..PsoConfig::default() };
            let out = pso_optimize(&mut PointFitness(toy), &limits(m), &cfg, &[]).unwrap();
            for v in &out.best_position {
                assert!((v - 0.1).abs() < 1e-2, "{:?}", out.best_position);
            }
            assert_eq!(out.trajectory.len(), cfg.iterations + 1);
            assert_eq!(out.evaluations, cfg.swarm_size * (cfg.iterations + 1));
        }
    }

    #[test]
    fn trajectory_never_decreases() {
        // A rugged fitness makes the swarm wander.
        let rugged = |x: &[f64]| x.iter().map(|v| libm::sin(40.0 * v) - v * v).sum::<f64>();
        let cfg = PsoConfig { swarm_size: 7, iterations: 40, seed: 3, ..PsoConfig::default() };
        let out = pso_optimize(&mut PointFitness(rugged), &limits(2), &cfg, &[]).unwrap();
        for w in out.trajectory.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert_eq!(out.best_fitness, *out.trajectory.last().unwrap());
        assert_eq!(out.best_fitness, rugged(&out.best_position));
    }

    #[test]
    fn positions_stay_in_the_box() {
        let lim = [[-0.3, 0.1], [0.0, 0.0], [0.2, 0.5]];
        let mut seen = Vec::new();
        let mut f = PointFitness(|x: &[f64]| {
            seen.push(x.to_vec());
            x[0] * 100.0 - x[2] * 100.0
        });
        let cfg = PsoConfig { swarm_size: 5, iterations: 20, ..PsoConfig::default() };
        pso_optimize(&mut f, &lim, &cfg, &[]).unwrap();
        for x in &seen {
            for (v, &[lo, hi]) in x.iter().zip(&lim) {
                assert!(*v >= lo && *v <= hi);
            }
        }
    }

    #[test]
    fn seeded_optimum_is_kept() {
        let seed = alloc::vec![0.1, 0.1];
        let target = toy(&seed);
        let cfg = PsoConfig { swarm_size: 4, iterations: 10, ..PsoConfig::default() };
        let out = pso_optimize(&mut PointFitness(toy), &limits(2), &cfg, core::slice::from_ref(&seed)).unwrap();
        for f in &out.trajectory {
            assert!(*f >= target);
        }
        assert_eq!(out.best_position, seed);
    }

    #[test]
    fn same_seed_same_run() {
        let cfg = PsoConfig { swarm_size: 9, iterations: 15, seed: 11, ..PsoConfig::default() };
        let a = pso_optimize(&mut PointFitness(toy), &limits(2), &cfg, &[]).unwrap();
        let b = pso_optimize(&mut PointFitness(toy), &limits(2), &cfg, &[]).unwrap();
        assert_eq!(a, b);
        let c = pso_optimize(&mut PointFitness(toy), &limits(2), &PsoConfig { seed: 12, ..cfg }, &[]).unwrap();
        assert_ne!(a.trace, c.trace);
    }

    #[test]
    fn nan_scores_never_win() {
        let mut f = PointFitness(|x: &[f64]| if x[0] > 0.0 { f64::NAN } else { x[0] });
        let cfg = PsoConfig { swarm_size: 6, iterations: 5, ..PsoConfig::default() };
        let out = pso_optimize(&mut f, &limits(1), &cfg, &[]).unwrap();
        assert!(out.best_fitness.is_finite() && out.best_position[0] <= 0.0);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            PsoConfig { swarm_size: 0, ..PsoConfig::default() },
            PsoConfig { iterations: 0, ..PsoConfig::default() },
            PsoConfig { inertia_min: 0.0, ..PsoConfig::default() },
            PsoConfig { inertia_min: 0.95, ..PsoConfig::default() },
        ];
        for cfg in &bad {
            assert!(pso_optimize(&mut PointFitness(toy), &limits(1), cfg, &[]).is_err());
        }
        let cfg = PsoConfig::default();
        assert!(pso_optimize(&mut PointFitness(toy), &[[0.2, 0.1]], &cfg, &[]).is_err());
        assert!(pso_optimize(&mut PointFitness(toy), &limits(2), &cfg, &[alloc::vec![0.0]]).is_err());
    }

    #[test]
    fn inertia_decays_to_the_lower_bound() {
        let cfg = PsoConfig::default();
        assert!((cfg.inertia(0) - 0.9).abs() < 1e-15);
        assert!((cfg.inertia(cfg.iterations) - 0.4).abs() < 1e-15);
    }
}
