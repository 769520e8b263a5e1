use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mixfield::experiment::{
    fresnel_table, run_experiment, write_fresnel, ExperimentSpec, Preset, Sweep, SweepVariable, FRESNEL_POINTS,
    FRESNEL_RANGES,
};
use mixfield::parallel::threads_from_env;
use mixfield::scenario_file::ScenarioFile;
use mixfield::schemes::Scheme;

/// Rotatable-antenna multi-cell mixed near/far-field downlink simulator.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo comparison of beamforming schemes.
    Simulate(SimulateArgs),
    /// Deterministic analyses that need no optimization.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// power_sweep or tradeoff_3user.
    #[arg(long, conflicts_with = "scenario")]
    preset: Option<String>,
    /// TOML scenario file evaluated as a single sweep point.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Comma-separated scheme names, e.g. "RA+BF,FA+ZF".
    #[arg(long, value_delimiter = ',')]
    schemes: Vec<String>,
    #[arg(long)]
    drops: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Smaller array, fewer drops and a lighter swarm.
    #[arg(long)]
    small: bool,
    #[arg(long)]
    swarm: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Replaces the sweeps: `variable=v1,v2,...`.
    #[arg(long)]
    sweep: Option<String>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long, default_value = "fresnel_verify")]
    preset: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 129)]
    antennas: usize,
}

fn parse_sweep(text: &str) -> Result<Sweep> {
    let (name, values) = text.split_once('=').context("expected `variable=v1,v2,...`")?;
    let variable: SweepVariable = name.parse()?;
    let values = values
        .split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad sweep value {v:?}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(Sweep { variable, values })
}

fn simulate(args: SimulateArgs) -> Result<bool> {
    let mut spec = match (&args.preset, &args.scenario) {
        (Some(p), None) => p.parse::<Preset>()?.simulation(args.small)?,
        (None, Some(path)) => {
            let file = ScenarioFile::load(path)?;
            let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario").to_string();
            let out = PathBuf::from("results").join(&name);
            ExperimentSpec::single(&name, file, Scheme::ALL.to_vec(), 1, out)
        }
        _ => bail!("give exactly one of --preset or --scenario"),
    };
    if !args.schemes.is_empty() {
        spec.schemes = args.schemes.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
    }
    if let Some(d) = args.drops {
        spec.drops = d;
    }
    if let Some(s) = args.swarm {
        spec.scenario.optimizer.swarm = s;
    }
    if let Some(t) = args.iterations {
        spec.scenario.optimizer.pso_iterations = t;
    }
    if let Some(s) = &args.sweep {
        spec.sweeps = vec![parse_sweep(s)?];
    }
    if let Some(out) = args.out {
        spec.out_dir = out;
    }
    spec.seed = args.seed;

    let output = run_experiment(&spec, threads_from_env()?)?;
    for row in &output.rows {
        println!(
            "{:<14} {}={:<8} sum-rate {:>8.3} ± {:<7.3} ({} ok, {} failed)",
            row.scheme.name(),
            row.variable,
            row.value,
            row.mean_sum_rate,
            row.std_sum_rate,
            row.drops_ok,
            row.drops_failed
        );
    }
    println!("results in {}", spec.out_dir.display());
    if output.failures > 0 {
        eprintln!("{} scheme runs failed; see drops.csv", output.failures);
    }
    Ok(output.failures == 0)
}

fn analyze(args: AnalyzeArgs) -> Result<bool> {
    let preset: Preset = args.preset.parse()?;
    if preset != Preset::FresnelVerify {
        bail!("{} is a simulation preset; use `simulate`", preset.name());
    }
    let file = ScenarioFile::default();
    let mut cfg = file.system_config();
    cfg.antenna_count = args.antennas;
    cfg.validate()?;
    let rows = fresnel_table(&cfg, &FRESNEL_RANGES, FRESNEL_POINTS);
    let dir = args.out.unwrap_or_else(|| PathBuf::from("results").join(preset.name()));
    let path = write_fresnel(&dir, &rows)?;
    let worst = rows
        .iter()
        .filter(|r| r.rho_approx.is_finite())
        .map(|r| (r.rho_exact - r.rho_approx).abs())
        .fold(0.0, f64::max);
    println!("{} rows, max |exact - closed form| = {worst:.3e}", rows.len());
    println!("written to {}", path.display());
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = match Cli::parse().command {
        Command::Simulate(a) => simulate(a),
        Command::Analyze(a) => analyze(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
