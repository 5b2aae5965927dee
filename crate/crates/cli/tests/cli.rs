use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use coulomb_core::io::{read_csv, ConvergenceRow, DensitySnapshot, EstimateRow, HitRow, RegimeRow, TrajectoryRow, CollisionRow, DiagnosticsRow};
use tempfile::TempDir;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coulomb-lab")).args(args).output().unwrap()
}

fn run_with(cmd: &str, config: &str, dir: &Path) -> Output {
    let cfg = dir.join("config.in.toml");
    fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    lab(&[cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", "1"])
}

fn error_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|_| panic!("stderr: {}", String::from_utf8_lossy(&o.stderr)))
}

const SIMULATE: &str = r#"
seed = 3

[system]
sigma = 1.0
gamma = 0.25
n_particles = 2
epsilon = 0.001
dt = 0.01
horizon = 0.2

[initial]
kind = "two-opposite"
separation = 1.0
"#;

#[test]
fn simulate_writes_two_csvs_and_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let o = run_with("simulate", SIMULATE, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let (comments, traj): (_, Vec<TrajectoryRow>) = read_csv(&out.join("trajectory.csv")).unwrap();
    assert_eq!(traj.len(), 2 * 21);
    assert!(comments.iter().any(|c| c.starts_with("config_hash=")));
    assert!(comments.iter().any(|c| c == "generator=chacha8-ziggurat-v1"));
    let (_, diag): (_, Vec<DiagnosticsRow>) = read_csv(&out.join("diagnostics.csv")).unwrap();
    assert_eq!(diag.len(), 21);
    assert_eq!(diag[0].d_same, None);

    let first = fs::read(out.join("trajectory.csv")).unwrap();
    let o = run_with("simulate", SIMULATE, dir.path());
    assert!(o.status.success());
    assert_eq!(first, fs::read(out.join("trajectory.csv")).unwrap());

    // the archived resolved config reruns to the same bytes
    let archived = out.join("config.toml");
    let again = dir.path().join("again");
    let o = lab(&["simulate", "--config", archived.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(first, fs::read(again.join("trajectory.csv")).unwrap());
}

#[test]
fn seed_flag_changes_output() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, SIMULATE).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(lab(&["simulate", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]).status.success());
    assert!(lab(&["simulate", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap(), "--seed", "4"]).status.success());
    assert_ne!(fs::read(a.join("trajectory.csv")).unwrap(), fs::read(b.join("trajectory.csv")).unwrap());
}

#[test]
fn malformed_config_exits_2_naming_key() {
    let dir = TempDir::new().unwrap();
    let o = run_with("simulate", &SIMULATE.replace("gamma = 0.25", "gamma = \"high\""), dir.path());
    assert_eq!(o.status.code(), Some(2));
    let e = error_json(&o);
    assert_eq!(e["error"], "config");
    assert_eq!(e["key"], "system.gamma");

    let o = run_with("simulate", &SIMULATE.replace("horizon = 0.2", "horizon = 0.2\nhorizn = 1"), dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(error_json(&o)["message"].as_str().unwrap().contains("horizn"));

    let o = run_with("simulate", &SIMULATE.replace("n_particles = 2", "n_particles = 3"), dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["key"], "system.n_particles");
}

#[test]
fn runtime_failure_exits_3() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, SIMULATE).unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = lab(&["simulate", "--config", cfg.to_str().unwrap(), "--out", blocker.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(error_json(&o)["error"], "runtime");
}

const BESSEL: &str = r#"
seed = 5

[bessel]
deltas = [-1.0, 0.0, 1.0, 1.9, 2.5]
starts = [1.0]
thresholds = [0.001]
horizon = 1.0
dt = 0.001
n_paths = 2000
"#;

#[test]
fn bessel_scan_rows_are_monotone() {
    let dir = TempDir::new().unwrap();
    let o = run_with("bessel-scan", BESSEL, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows): (_, Vec<HitRow>) = read_csv(&dir.path().join("out/bessel_scan.csv")).unwrap();
    assert_eq!(rows.len(), 5);
    for w in rows.windows(2) {
        assert!(w[1].estimate <= w[0].estimate + w[0].ci + w[1].ci, "{rows:?}");
    }
}

#[test]
fn bessel_scan_edge_cases() {
    let dir = TempDir::new().unwrap();
    let o = run_with("bessel-scan", &BESSEL.replace("deltas = [-1.0, 0.0, 1.0, 1.9, 2.5]", "deltas = []"), dir.path());
    assert!(o.status.success());
    let text = fs::read_to_string(dir.path().join("out/bessel_scan.csv")).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>(), vec!["delta,x,threshold,estimate,ci"]);

    let o = run_with("bessel-scan", &BESSEL.replace("n_paths = 2000", "n_paths = 0"), dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["key"], "bessel.n_paths");

    let o = run_with("bessel-scan", &BESSEL.replace("deltas = [-1.0, 0.0,", "deltas = [-1.0, -1.0, 0.0,"), dir.path());
    assert!(o.status.success());
    let (_, rows): (_, Vec<HitRow>) = read_csv(&dir.path().join("out/bessel_scan.csv")).unwrap();
    assert_eq!(rows.len(), 5);
}

#[test]
fn command_field_must_match() {
    let dir = TempDir::new().unwrap();
    let o = run_with("simulate", &format!("command = \"meanfield\"\n{SIMULATE}"), dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["key"], "command");
}

#[test]
fn collision_scan_regimes() {
    let cfg = r#"
seed = 8

[system]
sigma = 1.0
gamma = 0.0
n_particles = 2
epsilon = 0.001
dt = 0.001
horizon = 0.5

[initial]
kind = "two-opposite"
separation = 0.2

[collision]
gamma_over_sigma2 = [0.1, 0.4, 0.75, 1.25, 0.4]
thresholds = [0.01]
modes = ["opposite-sign", "same-sign"]
n_paths = 300

[collision.reference]
dt = 0.0001
hit_threshold = 0.0001
separation_level = 0.02
"#;
    let dir = TempDir::new().unwrap();
    let o = run_with("collision-scan", cfg, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows): (_, Vec<CollisionRow>) = read_csv(&dir.path().join("out/collision.csv")).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.mode == "opposite-sign"));
    let (_, regimes): (_, Vec<RegimeRow>) = read_csv(&dir.path().join("out/regime.csv")).unwrap();
    assert_eq!(regimes.len(), 4);
    assert_eq!(regimes[3].regime, "sticky");
    assert!(regimes[3].frozen_fraction > 0.0);
    assert!(regimes[..3].iter().all(|r| r.frozen_fraction == 0.0));
}

#[test]
fn drift_bound_estimates() {
    let cfg = r#"
seed = 2

[system]
sigma = 1.0
gamma = 0.1
n_particles = 4
epsilon = 0.001
dt = 0.001
horizon = 1.0

[initial]
kind = "cross-pattern-4"
radius = 0.5

[estimators]
n_paths = 200
alphas = [0.8]
phi_times = [0.0, 1.0]
"#;
    let dir = TempDir::new().unwrap();
    let o = run_with("drift-bound", cfg, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows): (_, Vec<EstimateRow>) = read_csv(&dir.path().join("out/estimates.csv")).unwrap();
    let get = |name: &str| rows.iter().find(|r| r.name == name).unwrap_or_else(|| panic!("{name}: {rows:?}"));
    assert!(get("pair_moment[alpha=0.8]").ci_hi <= get("pair_moment_bound[alpha=0.8]").estimate);
    assert!(get("phi[t=1]").ci_hi <= get("phi_bound[t=1]").estimate);
    assert!((get("phi[t=0]").estimate - 1.25f64.sqrt()).abs() < 1e-12);
    assert_eq!(rows[0].params_hash.len(), 64);
    let paths = fs::read_to_string(dir.path().join("out/paths.csv")).unwrap();
    assert_eq!(paths.lines().filter(|l| !l.starts_with('#')).count(), 201);
}

const MEANFIELD: &str = r#"
seed = 4

[meanfield]
sigma = 1.0
gammabar = 0.3
std = 0.5
offset = 0.5
horizon = 0.1
particle_dt = 0.01
epsilon = 0.01
pde_dt = 0.01
half_width = 6.0
resolution = 64
bandwidth = 0.2
n_schedule = [8, 16, 32]
n_paths = 4
"#;

#[test]
fn meanfield_outputs() {
    let dir = TempDir::new().unwrap();
    let o = run_with("meanfield", MEANFIELD, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let (_, rows): (_, Vec<ConvergenceRow>) = read_csv(&out.join("convergence.csv")).unwrap();
    assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![8, 16, 32]);
    let res = fs::read_to_string(out.join("residuals.csv")).unwrap();
    assert!(res.lines().any(|l| l == "N,phi_id,T,residual"));
    let snap = DensitySnapshot::read(&out.join("density_final_plus.bin")).unwrap();
    assert_eq!(snap.grid.resolution, 64);
    assert!((snap.t - 0.1).abs() < 1e-12);
    let summary = fs::read_to_string(out.join("density_summary.csv")).unwrap();
    assert!(summary.contains("t,mass_plus,mass_minus,second_moment,boundary_mass"));

    let o = run_with("weakform", MEANFIELD, dir.path());
    assert!(o.status.success());
    assert_eq!(res, fs::read_to_string(out.join("residuals.csv")).unwrap().replace("command=weakform", "command=meanfield"));
}

#[test]
fn meanfield_rejects_strong_coupling() {
    let dir = TempDir::new().unwrap();
    let o = run_with("meanfield", &MEANFIELD.replace("gammabar = 0.3", "gammabar = 0.6"), dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["key"], "meanfield.gammabar");
    let o = run_with("meanfield", &MEANFIELD.replace("[8, 16, 32]", "[16, 8]"), dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn experiment_configs_validate() {
    use clap::ValueEnum;
    use coulomb_cli::{Command as Lab, ExperimentConfig, Run};
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../experiments");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let config = ExperimentConfig::load(&path).unwrap();
            let cmd = Lab::from_str(config.command.as_deref().unwrap(), false).unwrap();
            let run = Run::new(cmd, config, Path::new("unused").to_path_buf()).unwrap();
            run.check().unwrap_or_else(|e| panic!("{}: {e:?}", path.display()));
            seen += 1;
        }
    }
    assert_eq!(seen, 6);
}
