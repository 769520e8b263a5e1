//! Monte Carlo experiments: sweeps × drops × schemes, aggregated into CSV.
//!
//! Every drop draws its scenario from a ChaCha stream keyed on
//! `(seed, drop)`, so all sweep points and schemes see the same users and
//! path gains. Rotation searches get a stream keyed on the sweep point as
//! well. Jobs run on the rayon pool and are collected in input order, so the
//! worker count never changes a number.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use mixfield_core::beamforming::{analog_mrt, compute_rates, effective_channels, DigitalBeamformer, InterferenceMask};
use mixfield_core::channel::{build_channels, Scenario};
use mixfield_core::config::SystemConfig;
use mixfield_core::interference::{linspace, rho_approx, rho_exact};
use mixfield_core::linalg::CMatrix;
use mixfield_core::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};
use crate::parallel::{build_pool, RayonExecutor};
use crate::scenario_file::{FixedUser, ScenarioFile};
use crate::schemes::{run_scheme, Scheme, SchemeResult, SchemeSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    PowerSweep,
    FresnelVerify,
    Tradeoff3User,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::PowerSweep, Preset::FresnelVerify, Preset::Tradeoff3User];

    pub fn name(self) -> &'static str {
        match self {
            Preset::PowerSweep => "power_sweep",
            Preset::FresnelVerify => "fresnel_verify",
            Preset::Tradeoff3User => "tradeoff_3user",
        }
    }

    /// Monte Carlo specification of a `simulate` preset. `small` trades
    /// array size, drop count and swarm budget for runtime.
    pub fn simulation(self, small: bool) -> SimResult<ExperimentSpec> {
        let mut scenario = ScenarioFile::default();
        if small {
            scenario.system.antennas = 65;
            scenario.optimizer.swarm = 10;
            scenario.optimizer.pso_iterations = 10;
        } else {
            scenario.optimizer.swarm = 20;
            scenario.optimizer.pso_iterations = 20;
        }
        let (sweeps, schemes, drops) = match self {
            Preset::PowerSweep => (
                vec![Sweep {
                    variable: SweepVariable::PowerDbm,
                    values: (0..7).map(|i| 10.0 + 5.0 * i as f64).collect(),
                }],
                vec![
                    Scheme::RaBf,
                    Scheme::FaBf,
                    Scheme::FaZf,
                    Scheme::RaZf,
                    Scheme::DiscreteRaZf,
                    Scheme::UpperBound,
                ],
                if small { 5 } else { 20 },
            ),
            Preset::Tradeoff3User => {
                scenario.system.nlos_paths = 0;
                scenario.users = vec![
                    FixedUser { cell: 0, angle_deg: 72.0, range_frac: 0.3 },
                    FixedUser { cell: 0, angle_deg: 90.0, range_frac: 0.3 },
                    FixedUser { cell: 1, angle_deg: 72.0, range_frac: 0.3 },
                ];
                let angle_points = if small { 13 } else { 25 };
                let range_points = if small { 10 } else { 19 };
                (
                    vec![
                        Sweep {
                            variable: SweepVariable::U12AngleDeg,
                            values: grid(60.0, 120.0, angle_points),
                        },
                        Sweep {
                            variable: SweepVariable::U12RangeFrac,
                            values: grid(0.1, 1.0, range_points),
                        },
                    ],
                    vec![Scheme::RaBf, Scheme::NearFieldOnly, Scheme::MixedFieldOnly],
                    1,
                )
            }
            Preset::FresnelVerify => {
                return Err(SimError::Spec("fresnel_verify is an analysis preset; use `analyze`".into()))
            }
        };
        Ok(ExperimentSpec {
            name: self.name().into(),
            scenario,
            sweeps,
            schemes,
            drops,
            out_dir: PathBuf::from("results").join(self.name()),
            seed: 0,
            seed_joint_with_zf: true,
        })
    }
}

impl FromStr for Preset {
    type Err = SimError;

    fn from_str(s: &str) -> SimResult<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s.trim())
            .ok_or_else(|| SimError::Spec(format!("unknown preset {s:?}")))
    }
}

fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    (0..points)
        .map(|i| {
            let v = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            (v * 1e9).round() / 1e9
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// A single evaluation of the scenario as given.
    None,
    PowerDbm,
    Antennas,
    UsersPerCell,
    /// Angle of the second fixed user of cell 0.
    U12AngleDeg,
    /// Range (fraction of the Rayleigh distance) of the second fixed user of
    /// cell 0.
    U12RangeFrac,
}

impl SweepVariable {
    pub const ALL: [SweepVariable; 6] = [
        SweepVariable::None,
        SweepVariable::PowerDbm,
        SweepVariable::Antennas,
        SweepVariable::UsersPerCell,
        SweepVariable::U12AngleDeg,
        SweepVariable::U12RangeFrac,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::None => "none",
            SweepVariable::PowerDbm => "power_dbm",
            SweepVariable::Antennas => "antennas",
            SweepVariable::UsersPerCell => "users_per_cell",
            SweepVariable::U12AngleDeg => "u12_angle_deg",
            SweepVariable::U12RangeFrac => "u12_range_frac",
        }
    }

    /// Writes `value` into a copy of the scenario.
    pub fn apply(self, base: &ScenarioFile, value: f64) -> SimResult<ScenarioFile> {
        let mut f = base.clone();
        let count = |v: f64| -> SimResult<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(SimError::Spec(format!("{} needs a positive integer, got {v}", self.name())))
            }
        };
        match self {
            SweepVariable::None => {}
            SweepVariable::PowerDbm => f.system.power_dbm = value,
            SweepVariable::Antennas => f.system.antennas = count(value)?,
            SweepVariable::UsersPerCell => {
                if !f.users.is_empty() {
                    return Err(SimError::Spec("users_per_cell cannot be swept with fixed users".into()));
                }
                f.system.users_per_cell = count(value)?;
            }
            SweepVariable::U12AngleDeg | SweepVariable::U12RangeFrac => {
                let u = f
                    .users
                    .iter_mut()
                    .filter(|u| u.cell == 0)
                    .nth(1)
                    .ok_or_else(|| SimError::Spec(format!("{} needs a second fixed user in cell 0", self.name())))?;
                if self == SweepVariable::U12AngleDeg {
                    u.angle_deg = value;
                } else {
                    u.range_frac = value;
                }
            }
        }
        f.validate()?;
        Ok(f)
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepVariable {
    type Err = SimError;

    fn from_str(s: &str) -> SimResult<Self> {
        SweepVariable::ALL
            .into_iter()
            .find(|v| v.name() == s.trim())
            .ok_or_else(|| SimError::Spec(format!("unknown sweep variable {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub scenario: ScenarioFile,
    pub sweeps: Vec<Sweep>,
    #[serde(with = "scheme_names")]
    pub schemes: Vec<Scheme>,
    pub drops: usize,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Add the RA+ZF rotations as a starting particle of RA+BF when both
    /// run, which makes RA+BF >= RA+ZF on every drop.
    pub seed_joint_with_zf: bool,
}

mod scheme_names {
    use super::Scheme;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(schemes: &[Scheme], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(schemes.iter().map(|x| x.name()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Scheme>, D::Error> {
        let names = Vec::<String>::deserialize(d)?;
        names
            .iter()
            .map(|n| n.parse().map_err(serde::de::Error::custom))
            .collect()
    }
}

impl ExperimentSpec {
    /// One evaluation of `scenario` with every listed scheme.
    pub fn single(name: &str, scenario: ScenarioFile, schemes: Vec<Scheme>, drops: usize, out_dir: PathBuf) -> Self {
        Self {
            name: name.into(),
            scenario,
            sweeps: vec![Sweep {
                variable: SweepVariable::None,
                values: vec![0.0],
            }],
            schemes,
            drops,
            out_dir,
            seed: 0,
            seed_joint_with_zf: true,
        }
    }

    pub fn validate(&self) -> SimResult<()> {
        if self.drops == 0 {
            return Err(SimError::Spec("at least one drop is required".into()));
        }
        if self.schemes.is_empty() {
            return Err(SimError::Spec("no schemes requested".into()));
        }
        for (i, s) in self.schemes.iter().enumerate() {
            if self.schemes[..i].contains(s) {
                return Err(SimError::Spec(format!("scheme {s} listed twice")));
            }
        }
        if self.sweeps.is_empty() || self.sweeps.iter().any(|s| s.values.is_empty()) {
            return Err(SimError::Spec("every sweep needs at least one value".into()));
        }
        for sweep in &self.sweeps {
            for &v in &sweep.values {
                sweep.variable.apply(&self.scenario, v)?;
            }
        }
        Ok(())
    }
}

/// Scenario stream of drop `drop`, shared by every sweep point and scheme.
pub fn drop_rng(seed: u64, drop: usize) -> ChaCha8Rng {
    keyed_rng(seed, [0, drop as u64, 0])
}

/// Seed of the rotation searches at one sweep point and drop.
pub fn search_seed(seed: u64, sweep: usize, point: usize, drop: usize) -> u64 {
    keyed_rng(seed, [1, sweep as u64, ((point as u64) << 32) | drop as u64]).gen()
}

fn keyed_rng(seed: u64, words: [u64; 3]) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, w) in key.chunks_mut(8).zip([seed, words[0], words[1], words[2]]) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Scenario of one sweep point and drop, exactly as the experiment built it.
pub fn rebuild_drop(spec: &ExperimentSpec, sweep: usize, point: usize, drop: usize) -> SimResult<Scenario> {
    let s = spec
        .sweeps
        .get(sweep)
        .ok_or_else(|| SimError::Spec(format!("no sweep #{sweep}")))?;
    let value = *s
        .values
        .get(point)
        .ok_or_else(|| SimError::Spec(format!("no point #{point} in sweep {}", s.variable)))?;
    s.variable.apply(&spec.scenario, value)?.build_drop(&mut drop_rng(spec.seed, drop))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropRecord {
    pub sweep: usize,
    pub point: usize,
    pub variable: SweepVariable,
    pub value: f64,
    pub drop: usize,
    pub scheme: Scheme,
    pub outcome: Result<SchemeResult, String>,
    pub seconds: f64,
}

/// Runs the schemes of one drop. With `seed_joint_with_zf`, RA+ZF runs
/// before RA+BF and hands over its rotations.
pub fn run_drop(
    scenario: &Scenario,
    schemes: &[Scheme],
    settings: &SchemeSettings,
    seed_joint_with_zf: bool,
) -> Vec<(Scheme, Result<SchemeResult, String>, f64)> {
    let mut order: Vec<Scheme> = schemes.to_vec();
    let chain = seed_joint_with_zf && schemes.contains(&Scheme::RaBf) && schemes.contains(&Scheme::RaZf);
    if chain {
        order.sort_by_key(|s| *s != Scheme::RaZf);
    }
    let mut done: BTreeMap<Scheme, (Result<SchemeResult, String>, f64)> = BTreeMap::new();
    for scheme in order {
        let hint = match (chain, scheme, done.get(&Scheme::RaZf)) {
            (true, Scheme::RaBf, Some((Ok(zf), _))) => Some(zf.rotations.clone()),
            _ => None,
        };
        let start = Instant::now();
        let outcome = run_scheme(scheme, scenario, settings, &RayonExecutor, hint.as_deref()).map_err(|e| e.to_string());
        if let Err(e) = &outcome {
            log::warn!("{scheme} failed: {e}");
        }
        done.insert(scheme, (outcome, start.elapsed().as_secs_f64()));
    }
    schemes
        .iter()
        .map(|s| {
            let (o, t) = done.remove(s).expect("every scheme ran");
            (*s, o, t)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scheme: Scheme,
    pub variable: SweepVariable,
    pub value: f64,
    pub drops_ok: usize,
    pub drops_failed: usize,
    pub mean_sum_rate: f64,
    pub std_sum_rate: f64,
    pub min_sum_rate: f64,
    pub max_sum_rate: f64,
    /// Mean rate of each user in global order.
    pub mean_user_rates: Vec<f64>,
    /// Mean wall time per drop; written to `timing.csv` only.
    pub mean_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub records: Vec<DropRecord>,
    pub failures: usize,
}

/// Runs `spec` on a pool of `threads` workers (rayon's default when
/// `None`) and writes its files into `spec.out_dir`.
pub fn run_experiment(spec: &ExperimentSpec, threads: Option<usize>) -> SimResult<ExperimentOutput> {
    spec.validate()?;
    let pool = build_pool(threads)?;
    let records = pool.install(|| simulate(spec))?;
    let rows = aggregate(&records);
    let failures = records.iter().filter(|r| r.outcome.is_err()).count();
    let output = ExperimentOutput {
        rows,
        records,
        failures,
    };
    write_outputs(spec, &output)?;
    Ok(output)
}

fn simulate(spec: &ExperimentSpec) -> SimResult<Vec<DropRecord>> {
    let mut jobs = Vec::new();
    for (s, sweep) in spec.sweeps.iter().enumerate() {
        for (p, &value) in sweep.values.iter().enumerate() {
            let file = sweep.variable.apply(&spec.scenario, value)?;
            for d in 0..spec.drops {
                jobs.push((s, p, sweep.variable, value, d, file.clone()));
            }
        }
    }
    let per_job: Vec<Vec<DropRecord>> = jobs
        .into_par_iter()
        .map(|(s, p, variable, value, d, file)| {
            let settings = SchemeSettings {
                joint: file.joint_options(search_seed(spec.seed, s, p, d)),
                ..SchemeSettings::default()
            };
            let runs = match file.build_drop(&mut drop_rng(spec.seed, d)) {
                Ok(scenario) => run_drop(&scenario, &spec.schemes, &settings, spec.seed_joint_with_zf),
                Err(e) => spec.schemes.iter().map(|s| (*s, Err(e.to_string()), 0.0)).collect(),
            };
            runs.into_iter()
                .map(|(scheme, outcome, seconds)| DropRecord {
                    sweep: s,
                    point: p,
                    variable,
                    value,
                    drop: d,
                    scheme,
                    outcome,
                    seconds,
                })
                .collect()
        })
        .collect();
    Ok(per_job.into_iter().flatten().collect())
}

fn aggregate(records: &[DropRecord]) -> Vec<ResultRow> {
    let mut groups: BTreeMap<(usize, usize, usize), Vec<&DropRecord>> = BTreeMap::new();
    let scheme_rank = |s: Scheme| Scheme::ALL.iter().position(|x| *x == s).unwrap_or(usize::MAX);
    for r in records {
        groups.entry((r.sweep, r.point, scheme_rank(r.scheme))).or_default().push(r);
    }
    // Keep schemes in the order they were requested.
    let mut order: Vec<Scheme> = Vec::new();
    for r in records {
        if !order.contains(&r.scheme) {
            order.push(r.scheme);
        }
    }
    let mut rows = Vec::new();
    let mut keys: Vec<(usize, usize)> = groups.keys().map(|&(s, p, _)| (s, p)).collect();
    keys.dedup();
    for (s, p) in keys {
        for scheme in &order {
            let Some(group) = groups.get(&(s, p, scheme_rank(*scheme))) else { continue };
            let ok: Vec<&SchemeResult> = group.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
            let rates: Vec<f64> = ok.iter().map(|r| r.report.sum_rate).collect();
            let n = rates.len();
            let mean = if n > 0 { rates.iter().sum::<f64>() / n as f64 } else { f64::NAN };
            let std = if n > 1 {
                (rates.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            let users = ok.first().map_or(0, |r| r.report.users.len());
            let mean_user_rates = (0..users)
                .map(|u| ok.iter().map(|r| r.report.users[u].rate).sum::<f64>() / n as f64)
                .collect();
            rows.push(ResultRow {
                scheme: *scheme,
                variable: group[0].variable,
                value: group[0].value,
                drops_ok: n,
                drops_failed: group.len() - n,
                mean_sum_rate: mean,
                std_sum_rate: std,
                min_sum_rate: rates.iter().copied().fold(f64::INFINITY, f64::min),
                max_sum_rate: rates.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean_user_rates,
                mean_seconds: group.iter().map(|r| r.seconds).sum::<f64>() / group.len() as f64,
            });
        }
    }
    rows
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

fn split(field: &str) -> Result<Vec<f64>, String> {
    if field.is_empty() {
        return Ok(Vec::new());
    }
    field
        .split(';')
        .map(|v| v.parse::<f64>().map_err(|e| format!("{v:?}: {e}")))
        .collect()
}

struct CsvFile {
    path: PathBuf,
    writer: csv::Writer<fs::File>,
}

impl CsvFile {
    fn create(path: PathBuf, header: &[&str]) -> SimResult<Self> {
        let mut writer = csv::Writer::from_path(&path).map_err(|e| SimError::csv(&path, e))?;
        writer.write_record(header).map_err(|e| SimError::csv(&path, e))?;
        Ok(Self { path, writer })
    }

    fn row<I, S>(&mut self, fields: I) -> SimResult<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(|e| SimError::csv(&self.path, e))
    }

    fn finish(mut self) -> SimResult<()> {
        self.writer.flush().map_err(|e| SimError::io(&self.path, e))
    }
}

pub const RESULTS_FILE: &str = "results.csv";
pub const DROPS_FILE: &str = "drops.csv";
pub const BEAMFORMERS_FILE: &str = "beamformers.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const SPEC_FILE: &str = "experiment.toml";

fn write_outputs(spec: &ExperimentSpec, out: &ExperimentOutput) -> SimResult<()> {
    let dir = &spec.out_dir;
    fs::create_dir_all(dir.join("traces")).map_err(|e| SimError::io(dir, e))?;
    let spec_path = dir.join(SPEC_FILE);
    let text = toml::to_string(spec).map_err(|e| SimError::Spec(format!("cannot serialize the experiment: {e}")))?;
    fs::write(&spec_path, text).map_err(|e| SimError::io(&spec_path, e))?;

    let mut results = CsvFile::create(
        dir.join(RESULTS_FILE),
        &[
            "scheme",
            "sweep_var",
            "sweep_value",
            "drops_ok",
            "drops_failed",
            "mean_sum_rate",
            "std_sum_rate",
            "min_sum_rate",
            "max_sum_rate",
            "mean_user_rates",
        ],
    )?;
    for r in &out.rows {
        results.row([
            r.scheme.name().to_string(),
            r.variable.name().to_string(),
            r.value.to_string(),
            r.drops_ok.to_string(),
            r.drops_failed.to_string(),
            r.mean_sum_rate.to_string(),
            r.std_sum_rate.to_string(),
            r.min_sum_rate.to_string(),
            r.max_sum_rate.to_string(),
            join(&r.mean_user_rates),
        ])?;
    }
    results.finish()?;

    let mut timing = CsvFile::create(dir.join(TIMING_FILE), &["scheme", "sweep_var", "sweep_value", "drop", "seconds"])?;
    let mut drops = CsvFile::create(
        dir.join(DROPS_FILE),
        &[
            "sweep",
            "point",
            "sweep_var",
            "sweep_value",
            "drop",
            "scheme",
            "status",
            "sum_rate",
            "rotations",
            "user_rates",
        ],
    )?;
    let mut beams = CsvFile::create(
        dir.join(BEAMFORMERS_FILE),
        &["sweep", "point", "drop", "scheme", "cell", "row", "col", "re", "im"],
    )?;
    let mut pso: BTreeMap<Scheme, CsvFile> = BTreeMap::new();
    let mut sca: BTreeMap<Scheme, CsvFile> = BTreeMap::new();
    for r in &out.records {
        let key = [r.sweep.to_string(), r.point.to_string(), r.drop.to_string(), r.scheme.name().to_string()];
        timing.row([
            r.scheme.name().to_string(),
            r.variable.name().to_string(),
            r.value.to_string(),
            r.drop.to_string(),
            format!("{:.6}", r.seconds),
        ])?;
        let (status, rate, rotations, user_rates) = match &r.outcome {
            Ok(res) => ("ok".to_string(), res.report.sum_rate.to_string(), join(&res.rotations), join(&res.report.rates())),
            Err(e) => (format!("failed: {e}"), String::new(), String::new(), String::new()),
        };
        drops.row([
            key[0].clone(),
            key[1].clone(),
            r.variable.name().to_string(),
            r.value.to_string(),
            key[2].clone(),
            key[3].clone(),
            status,
            rate,
            rotations,
            user_rates,
        ])?;
        let Ok(res) = &r.outcome else { continue };
        if let Some(bf) = &res.beamformers {
            for (m, d) in bf.digital.iter().enumerate() {
                for i in 0..d.matrix.rows() {
                    for j in 0..d.matrix.cols() {
                        let z = d.matrix[(i, j)];
                        beams.row(
                            key.iter()
                                .cloned()
                                .chain([m.to_string(), i.to_string(), j.to_string(), z.re.to_string(), z.im.to_string()]),
                        )?;
                    }
                }
            }
        }
        if !res.pso_trace.is_empty() {
            if let Entry::Vacant(slot) = pso.entry(r.scheme) {
                let cells = res.pso_trace[0].best_position.len();
                let mut header: Vec<String> = ["sweep_var", "sweep_value", "drop", "iter", "best_fitness", "mean_fitness"]
                    .iter()
                    .map(|s| s.to_string())
                    .collect();
                header.extend((1..=cells).map(|m| format!("best_phi_{m}")));
                let h: Vec<&str> = header.iter().map(String::as_str).collect();
                slot.insert(CsvFile::create(dir.join("traces").join(format!("{}_pso.csv", r.scheme.slug())), &h)?);
            }
            let f = pso.get_mut(&r.scheme).expect("inserted above");
            for t in &res.pso_trace {
                let mut fields = vec![
                    r.variable.name().to_string(),
                    r.value.to_string(),
                    r.drop.to_string(),
                    t.iter.to_string(),
                    t.best_fitness.to_string(),
                    t.mean_fitness.to_string(),
                ];
                fields.extend(t.best_position.iter().map(|v| v.to_string()));
                f.row(fields)?;
            }
        }
        if !res.sca_trace.is_empty() {
            if let Entry::Vacant(slot) = sca.entry(r.scheme) {
                let h = ["sweep_var", "sweep_value", "drop", "iter", "surrogate_obj", "true_sum_rate", "max_kkt_residual"];
                slot.insert(CsvFile::create(dir.join("traces").join(format!("{}_sca.csv", r.scheme.slug())), &h)?);
            }
            let f = sca.get_mut(&r.scheme).expect("inserted above");
            for t in &res.sca_trace {
                f.row([
                    r.variable.name().to_string(),
                    r.value.to_string(),
                    r.drop.to_string(),
                    t.iter.to_string(),
                    t.surrogate_obj.to_string(),
                    t.true_sum_rate.to_string(),
                    format!("{:e}", t.max_kkt_residual),
                ])?;
            }
        }
    }
    timing.finish()?;
    drops.finish()?;
    beams.finish()?;
    for f in pso.into_values().chain(sca.into_values()) {
        f.finish()?;
    }
    Ok(())
}

/// Loads the specification an experiment directory was written with.
pub fn load_spec(dir: &Path) -> SimResult<ExperimentSpec> {
    let path = dir.join(SPEC_FILE);
    let text = fs::read_to_string(&path).map_err(|e| SimError::io(&path, e))?;
    toml::from_str(&text).map_err(|e| SimError::Parse {
        path,
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrip {
    pub candidates: usize,
    pub checked: usize,
    pub max_abs_error: f64,
    pub mismatches: Vec<String>,
}

type BeamKey = (usize, usize, usize, String);
/// `(row, col, value)` entries of every cell's digital precoder.
type CellEntries = BTreeMap<usize, Vec<(usize, usize, Complex64)>>;

/// Recomputes the sum-rate of a random `fraction` of the achievable rows
/// of `drops.csv` (at least one) from the stored rotations and digital
/// precoders, with the scenario rebuilt from `experiment.toml`.
pub fn verify_round_trip(dir: &Path, fraction: f64, seed: u64, tolerance: f64) -> SimResult<RoundTrip> {
    let spec = load_spec(dir)?;
    let parse_err = |path: &Path, message: String| SimError::Parse {
        path: path.to_path_buf(),
        message,
    };

    let beams_path = dir.join(BEAMFORMERS_FILE);
    let mut reader = csv::Reader::from_path(&beams_path).map_err(|e| SimError::csv(&beams_path, e))?;
    let mut entries: BTreeMap<BeamKey, CellEntries> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| SimError::csv(&beams_path, e))?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let int = |i: usize| field(i).parse::<usize>().map_err(|e| parse_err(&beams_path, format!("column {i}: {e}")));
        let real = |i: usize| field(i).parse::<f64>().map_err(|e| parse_err(&beams_path, format!("column {i}: {e}")));
        let key = (int(0)?, int(1)?, int(2)?, field(3).to_string());
        entries
            .entry(key)
            .or_default()
            .entry(int(4)?)
            .or_default()
            .push((int(5)?, int(6)?, Complex64::new(real(7)?, real(8)?)));
    }

    let drops_path = dir.join(DROPS_FILE);
    let mut reader = csv::Reader::from_path(&drops_path).map_err(|e| SimError::csv(&drops_path, e))?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| SimError::csv(&drops_path, e))?;
        let field = |i: usize| rec.get(i).unwrap_or("").to_string();
        let int = |i: usize| field(i).parse::<usize>().map_err(|e| parse_err(&drops_path, format!("column {i}: {e}")));
        let key = (int(0)?, int(1)?, int(4)?, field(5));
        if field(6) == "ok" && entries.contains_key(&key) {
            let rate: f64 = field(7).parse().map_err(|e| parse_err(&drops_path, format!("sum_rate: {e}")))?;
            let rotations = split(&field(8)).map_err(|m| parse_err(&drops_path, m))?;
            rows.push((key, rate, rotations));
        }
    }
    if rows.is_empty() {
        return Ok(RoundTrip {
            candidates: 0,
            checked: 0,
            max_abs_error: 0.0,
            mismatches: Vec::new(),
        });
    }
    let amount = ((rows.len() as f64 * fraction).ceil() as usize).clamp(1, rows.len());
    let mut picked = sample(&mut ChaCha8Rng::seed_from_u64(seed), rows.len(), amount).into_vec();
    picked.sort_unstable();

    let mut report = RoundTrip {
        candidates: rows.len(),
        checked: 0,
        max_abs_error: 0.0,
        mismatches: Vec::new(),
    };
    for i in picked {
        let (key, stored, rotations) = &rows[i];
        let (sweep, point, drop, scheme) = key;
        let scenario = rebuild_drop(&spec, *sweep, *point, *drop)?;
        let channels = build_channels(&scenario, rotations)?;
        let analog = analog_mrt(&scenario, rotations)?;
        let eff = effective_channels(&channels, &analog)?;
        let digital: Vec<DigitalBeamformer> = (0..scenario.cell_count())
            .map(|m| {
                let cells = &entries[key];
                let list = cells.get(&m).map(Vec::as_slice).unwrap_or(&[]);
                let rows = list.iter().map(|e| e.0 + 1).max().unwrap_or(0);
                let cols = list.iter().map(|e| e.1 + 1).max().unwrap_or(0);
                let mut matrix = CMatrix::zeros(rows, cols);
                for &(r, c, z) in list {
                    matrix[(r, c)] = z;
                }
                DigitalBeamformer { matrix }
            })
            .collect();
        let again = compute_rates(&eff, &digital, scenario.config.noise_power, InterferenceMask::FULL)?.sum_rate;
        let err = (again - stored).abs();
        report.max_abs_error = report.max_abs_error.max(err);
        report.checked += 1;
        if !(err <= tolerance) {
            report
                .mismatches
                .push(format!("{scheme} sweep {sweep} point {point} drop {drop}: stored {stored}, recomputed {again}"));
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FresnelRow {
    pub range_frac: f64,
    pub phi: f64,
    pub rho_exact: f64,
    /// `NaN` where the quadratic phase vanishes and no closed form exists.
    pub rho_approx: f64,
}

/// Direction of both the far-field and near-field vectors in the
/// `fresnel_verify` analysis.
pub const FRESNEL_ANGLE: f64 = 0.4 * std::f64::consts::PI;
pub const FRESNEL_RANGES: [f64; 4] = [0.05, 0.1, 0.3, 1.0];
pub const FRESNEL_POINTS: usize = 181;
pub const FRESNEL_FILE: &str = "fresnel.csv";

/// Exact and closed-form correlation over rotations in `[-pi/6, pi/6]`,
/// with ranges given as fractions of the boresight Rayleigh distance.
pub fn fresnel_table(cfg: &SystemConfig, range_fracs: &[f64], points: usize) -> Vec<FresnelRow> {
    let rayleigh = cfg.boresight_rayleigh_distance();
    let limit = std::f64::consts::FRAC_PI_6;
    let mut rows = Vec::with_capacity(range_fracs.len() * points);
    for &frac in range_fracs {
        let r = frac * rayleigh;
        for phi in linspace(-limit, limit, points) {
            rows.push(FresnelRow {
                range_frac: frac,
                phi,
                rho_exact: rho_exact(FRESNEL_ANGLE, FRESNEL_ANGLE, r, phi, cfg),
                rho_approx: rho_approx(FRESNEL_ANGLE, FRESNEL_ANGLE, r, phi, cfg).unwrap_or(f64::NAN),
            });
        }
    }
    rows
}

pub fn write_fresnel(dir: &Path, rows: &[FresnelRow]) -> SimResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    let mut f = CsvFile::create(dir.join(FRESNEL_FILE), &["range_frac", "phi", "rho_exact", "rho_approx"])?;
    for r in rows {
        f.row([r.range_frac, r.phi, r.rho_exact, r.rho_approx].map(|v| v.to_string()))?;
    }
    let path = f.path.clone();
    f.finish()?;
    Ok(path)
}
