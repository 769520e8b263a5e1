use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
[system]
antennas = 17
cells = 2
users_per_cell = 2

[optimizer]
swarm = 3
pso_iterations = 2
"#;

fn mixfield(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixfield"))
        .args(args)
        .current_dir(cwd)
        .env("SIM_THREADS", "2")
        .output()
        .expect("binary runs")
}

#[test]
fn analyze_writes_the_fresnel_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = mixfield(&["analyze", "--preset", "fresnel_verify", "--out", "fr"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("fr/fresnel.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("range_frac,phi,rho_exact,rho_approx"));
    assert_eq!(lines.count(), 4 * 181);
}

#[test]
fn simulate_a_scenario_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    let out = mixfield(
        &[
            "simulate",
            "--scenario",
            "tiny.toml",
            "--schemes",
            "RA+BF,FA+ZF,UpperBound",
            "--drops",
            "2",
            "--seed",
            "3",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("RA+BF") && stdout.contains("UpperBound"), "{stdout}");
    let run = dir.path().join("run");
    for f in ["results.csv", "drops.csv", "beamformers.csv", "timing.csv", "experiment.toml"] {
        assert!(run.join(f).is_file(), "{f} missing");
    }
    assert!(run.join("traces/ra_bf_pso.csv").is_file());
    assert!(run.join("traces/ra_bf_sca.csv").is_file());
    let results = fs::read_to_string(run.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 4);
}

#[test]
fn sweep_override_replaces_the_preset_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = mixfield(
        &[
            "simulate",
            "--preset",
            "power_sweep",
            "--small",
            "--schemes",
            "FA+ZF",
            "--drops",
            "1",
            "--sweep",
            "power_dbm=10,20",
            "--out",
            "ps",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let results = fs::read_to_string(dir.path().join("ps/results.csv")).unwrap();
    let values: Vec<&str> = results.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(values, ["10", "20"]);
}

#[test]
fn bad_invocations_fail_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["simulate"][..],
        &["simulate", "--preset", "nope"],
        &["simulate", "--preset", "power_sweep", "--schemes", "XYZ"],
        &["simulate", "--scenario", "missing.toml"],
        &["analyze", "--preset", "power_sweep"],
        &["simulate", "--preset", "power_sweep", "--sweep", "power_dbm"],
    ] {
        let out = mixfield(args, dir.path());
        assert!(!out.status.success(), "{args:?} succeeded");
        assert!(!out.stderr.is_empty(), "{args:?} printed nothing");
    }
}

#[test]
fn invalid_thread_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_mixfield"))
        .args(["simulate", "--preset", "power_sweep", "--small", "--drops", "1", "--schemes", "FA+ZF"])
        .current_dir(dir.path())
        .env("SIM_THREADS", "zero")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("SIM_THREADS"));
}
