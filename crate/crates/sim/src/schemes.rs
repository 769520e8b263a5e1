//! Benchmark schemes, each mapping one drop to a rate report.

use std::fmt;
use std::str::FromStr;

use mixfield_core::beamforming::{BeamformerSet, InterferenceMask, ScaInit, ScaTraceRow, SumRateReport, UserRate};
use mixfield_core::channel::Scenario;
use mixfield_core::interference::linspace;
use mixfield_core::joint::{joint_optimize, solve_inner, zf_rotation_search, zf_solution, Executor, JointOptions};
use mixfield_core::pso::PsoTraceRow;
use mixfield_core::Error;

use crate::error::{SimError, SimResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// Joint rotation and SDR/SCA beamforming.
    RaBf,
    /// No rotation, SDR/SCA beamforming.
    FaBf,
    /// No rotation, zero forcing.
    FaZf,
    /// Rotation searched with zero forcing as fitness.
    RaZf,
    /// Exhaustive rotation grid with zero forcing.
    DiscreteRaZf,
    /// Interference-free bound, valid for every rotation and precoder.
    UpperBound,
    /// Rotation chosen against intra-cell (near-field) interference only.
    NearFieldOnly,
    /// Rotation chosen against inter-cell (mixed-field) interference only.
    MixedFieldOnly,
}

impl Scheme {
    pub const ALL: [Scheme; 8] = [
        Scheme::RaBf,
        Scheme::FaBf,
        Scheme::FaZf,
        Scheme::RaZf,
        Scheme::DiscreteRaZf,
        Scheme::UpperBound,
        Scheme::NearFieldOnly,
        Scheme::MixedFieldOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::RaBf => "RA+BF",
            Scheme::FaBf => "FA+BF",
            Scheme::FaZf => "FA+ZF",
            Scheme::RaZf => "RA+ZF",
            Scheme::DiscreteRaZf => "DiscreteRA+ZF",
            Scheme::UpperBound => "UpperBound",
            Scheme::NearFieldOnly => "RA+BF-NF",
            Scheme::MixedFieldOnly => "RA+BF-MF",
        }
    }

    /// File-name friendly form.
    pub fn slug(self) -> &'static str {
        match self {
            Scheme::RaBf => "ra_bf",
            Scheme::FaBf => "fa_bf",
            Scheme::FaZf => "fa_zf",
            Scheme::RaZf => "ra_zf",
            Scheme::DiscreteRaZf => "discrete_ra_zf",
            Scheme::UpperBound => "upper_bound",
            Scheme::NearFieldOnly => "ra_bf_nf",
            Scheme::MixedFieldOnly => "ra_bf_mf",
        }
    }

    fn joint_mask(self) -> Option<InterferenceMask> {
        match self {
            Scheme::RaBf => Some(InterferenceMask::FULL),
            Scheme::NearFieldOnly => Some(InterferenceMask::INTRA_ONLY),
            Scheme::MixedFieldOnly => Some(InterferenceMask::INTER_ONLY),
            _ => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = SimError;

    fn from_str(s: &str) -> SimResult<Self> {
        let t = s.trim();
        Scheme::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(t) || x.slug().eq_ignore_ascii_case(t))
            .ok_or_else(|| {
                let known: Vec<&str> = Scheme::ALL.iter().map(|x| x.name()).collect();
                SimError::Spec(format!("unknown scheme {t:?}; known: {}", known.join(", ")))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeSettings {
    pub joint: JointOptions,
    /// Grid points per axis of the exhaustive search.
    pub discrete_points: usize,
    pub max_discrete_cells: usize,
}

impl Default for SchemeSettings {
    fn default() -> Self {
        Self {
            joint: JointOptions::default(),
            discrete_points: 100,
            max_discrete_cells: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeResult {
    pub scheme: Scheme,
    pub rotations: Vec<f64>,
    /// Absent for the bound, which is not achieved by a precoder.
    pub beamformers: Option<BeamformerSet>,
    pub report: SumRateReport,
    pub pso_trace: Vec<PsoTraceRow>,
    pub sca_trace: Vec<ScaTraceRow>,
}

/// Runs one scheme on one drop. `extra_seed` adds a starting particle to
/// the rotation searches of the SDR/SCA schemes.
pub fn run_scheme<E: Executor>(
    scheme: Scheme,
    scenario: &Scenario,
    settings: &SchemeSettings,
    executor: &E,
    extra_seed: Option<&[f64]>,
) -> SimResult<SchemeResult> {
    let zeros = vec![0.0; scenario.cell_count()];
    let joint = &settings.joint;
    let result = |rotations: Vec<f64>, beams: Option<BeamformerSet>, report: SumRateReport| SchemeResult {
        scheme,
        rotations,
        beamformers: beams,
        report,
        pso_trace: Vec::new(),
        sca_trace: Vec::new(),
    };
    match scheme {
        Scheme::RaBf | Scheme::NearFieldOnly | Scheme::MixedFieldOnly => {
            let mut options = joint.clone();
            options.sca.mask = scheme.joint_mask().expect("joint schemes carry a mask");
            if let Some(seed) = extra_seed {
                options.extra_seeds.push(seed.to_vec());
            }
            let out = joint_optimize(scenario, &options, executor)?;
            Ok(SchemeResult {
                scheme,
                rotations: out.rotations,
                beamformers: Some(out.beamformers),
                report: out.report,
                pso_trace: out.pso.trace,
                sca_trace: out.inner.sca.trace,
            })
        }
        Scheme::FaBf => {
            let mut sca = joint.sca.clone();
            sca.mask = InterferenceMask::FULL;
            sca.init = ScaInit::Zf;
            let inner = solve_inner(scenario, &zeros, &sca)?;
            Ok(SchemeResult {
                sca_trace: inner.sca.trace.clone(),
                ..result(zeros, Some(inner.beamformers()), inner.sca.report.clone())
            })
        }
        Scheme::FaZf => {
            let (beams, report) = zf_solution(scenario, &zeros, InterferenceMask::FULL)?;
            Ok(result(zeros, Some(beams), report))
        }
        Scheme::RaZf => {
            let (rotations, beams, report, pso) = zf_rotation_search(scenario, &joint.pso, joint.quantum, executor)?;
            Ok(SchemeResult {
                pso_trace: pso.trace,
                ..result(rotations, Some(beams), report)
            })
        }
        Scheme::DiscreteRaZf => {
            let rotations = discrete_search(scenario, settings, executor)?;
            let (beams, report) = zf_solution(scenario, &rotations, InterferenceMask::FULL)?;
            Ok(result(rotations, Some(beams), report))
        }
        Scheme::UpperBound => Ok(result(zeros, None, interference_free_bound(scenario))),
    }
}

/// Best zero-forcing rotation on a uniform grid of `discrete_points` per
/// axis. Ties go to the first grid point in row-major order.
pub fn discrete_search<E: Executor>(scenario: &Scenario, settings: &SchemeSettings, executor: &E) -> SimResult<Vec<f64>> {
    let cells = scenario.cell_count();
    if cells > settings.max_discrete_cells {
        return Err(Error::EnumerationTooLarge {
            cells,
            max: settings.max_discrete_cells,
        }
        .into());
    }
    let p = settings.discrete_points;
    if p == 0 {
        return Err(SimError::Spec("discrete rotation grid needs at least one point".into()));
    }
    let axes: Vec<Vec<f64>> = scenario.rotation_limits().iter().map(|&[lo, hi]| linspace(lo, hi, p)).collect();
    let total = p.pow(cells as u32);
    let point = |mut idx: usize| -> Vec<f64> {
        let mut rot = vec![0.0; cells];
        for m in (0..cells).rev() {
            rot[m] = axes[m][idx % p];
            idx /= p;
        }
        rot
    };
    let scores = executor.map((0..total).collect(), |idx| {
        zf_solution(scenario, &point(idx), InterferenceMask::FULL)
            .map(|(_, r)| r.sum_rate)
            .unwrap_or(f64::NEG_INFINITY)
    });
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    Ok(point(best))
}

/// Per-user rates with all interference removed and every user's gain
/// replaced by the rotation-free bound `(sqrt(N)|beta| + sqrt(N/L) sum_l
/// |beta_l|)^2 / sigma^2` on `||h||^2 / sigma^2`, with the cell budget
/// water-filled across users. No rotation or precoder can beat it.
pub fn interference_free_bound(scenario: &Scenario) -> SumRateReport {
    let cfg = &scenario.config;
    let n = cfg.antenna_count as f64;
    let noise = cfg.noise_power;
    let mut users = Vec::with_capacity(scenario.layout.total());
    let mut cell_rates = Vec::with_capacity(scenario.cell_count());
    for m in 0..scenario.cell_count() {
        let gains: Vec<f64> = (0..scenario.users_in(m))
            .map(|k| {
                let g = scenario.link_gains(m, m, k);
                let mut amp = n.sqrt() * g.los.norm();
                if !g.nlos.is_empty() {
                    let scale = (n / g.nlos.len() as f64).sqrt();
                    amp += scale * g.nlos.iter().map(|b| b.norm()).sum::<f64>();
                }
                amp * amp / noise
            })
            .collect();
        let powers = water_fill(&gains, cfg.power_budget);
        let mut cell = 0.0;
        for (k, (&g, &p)) in gains.iter().zip(&powers).enumerate() {
            let sinr = p * g;
            let rate = (1.0 + sinr).log2();
            cell += rate;
            users.push(UserRate {
                cell: m,
                user: k,
                signal: sinr * noise,
                intra: 0.0,
                inter: 0.0,
                noise,
                sinr,
                rate,
            });
        }
        cell_rates.push(cell);
    }
    SumRateReport {
        sum_rate: cell_rates.iter().sum(),
        users,
        cell_rates,
        mask: InterferenceMask::NONE,
    }
}

/// Maximizes `sum log(1 + p_k g_k)` subject to `sum p_k = budget`.
pub fn water_fill(gains: &[f64], budget: f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..gains.len()).filter(|&k| gains[k] > 0.0).collect();
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]));
    let mut level = 0.0;
    for active in (1..=order.len()).rev() {
        let inv_sum: f64 = order[..active].iter().map(|&k| 1.0 / gains[k]).sum();
        let mu = (budget + inv_sum) / active as f64;
        if mu > 1.0 / gains[order[active - 1]] {
            level = mu;
            break;
        }
    }
    gains
        .iter()
        .map(|&g| if g > 0.0 { (level - 1.0 / g).max(0.0) } else { 0.0 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_parse_back() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
            assert_eq!(s.slug().parse::<Scheme>().unwrap(), s);
        }
        assert_eq!("ra+bf".parse::<Scheme>().unwrap(), Scheme::RaBf);
        assert!("RA+XX".parse::<Scheme>().is_err());
    }

    #[test]
    fn water_filling_spends_the_budget_on_a_common_level() {
        let g = [10.0, 1.0, 0.01, 0.0];
        let p = water_fill(&g, 2.0);
        assert!((p.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        assert_eq!(p[2], 0.0);
        assert_eq!(p[3], 0.0);
        assert!((p[0] + 1.0 / g[0] - (p[1] + 1.0 / g[1])).abs() < 1e-12);
        // Any other split of the same budget does worse.
        let value = |p: &[f64]| p.iter().zip(&g).map(|(p, g)| (1.0 + p * g).ln()).sum::<f64>();
        for shift in [-0.3, -0.01, 0.01, 0.3] {
            let q = [p[0] + shift, p[1] - shift, 0.0, 0.0];
            if q.iter().all(|v| *v >= 0.0) {
                assert!(value(&q) <= value(&p));
            }
        }
    }

    #[test]
    fn water_filling_single_user_takes_everything() {
        assert_eq!(water_fill(&[3.0], 5.0), vec![5.0]);
        assert_eq!(water_fill(&[0.0, 0.0], 5.0), vec![0.0, 0.0]);
    }
}
