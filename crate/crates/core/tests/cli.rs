//! End-to-end checks of the command-line surface: subcommand dispatch, exit
//! codes, artifact files, and byte-level determinism of repeated runs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn binary() -> PathBuf {
    // target/debug/runtumble relative to this test binary
    let mut path = std::env::current_exe().unwrap();
    path.pop(); // deps/
    path.pop(); // debug/
    path.push(format!("runtumble{}", std::env::consts::EXE_SUFFIX));
    path
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("runtumble_cli_tests").join(name);
    fs::remove_dir_all(&dir).ok();
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.cfg");
    fs::write(&path, body).unwrap();
    path
}

const QUICK_RUN: &str = "\
n_cells = 32
nv = 8
t_end = 0.5
snapshots = 2
kappa = 0
";

#[test]
fn usage_and_unknown_subcommand_exit_2() {
    let status = Command::new(binary()).status().unwrap();
    assert_eq!(status.code(), Some(2));
    let status = Command::new(binary()).arg("frobnicate").status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn validate_config_accepts_the_shipped_defaults() {
    let dir = scratch("validate_ok");
    let cfg = write_config(&dir, QUICK_RUN);
    let status = Command::new(binary())
        .args(["validate-config", "--config"])
        .arg(&cfg)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
}

#[test]
fn validate_config_rejects_odd_velocity_count() {
    let dir = scratch("validate_odd");
    let cfg = write_config(&dir, "nv = 7\n");
    let output = Command::new(binary())
        .args(["validate-config", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("symmetric"), "stderr: {stderr}");
}

#[test]
fn missing_config_file_exits_2() {
    let output = Command::new(binary())
        .args(["simulate", "--config", "/nonexistent/nowhere.cfg"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn validate_config_flags_undersized_growth_constant() {
    // base rate 2 already exceeds the bound 0.1 * (1 + ...) at small signals
    let dir = scratch("validate_growth");
    let cfg = write_config(&dir, "lambda0 = 2\ngrowth_c0 = 0.1\n");
    let output = Command::new(binary())
        .args(["validate-config", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("growth bound"), "stderr: {stderr}");
}

#[test]
fn simulate_writes_artifacts_and_exits_0() {
    let dir = scratch("simulate");
    let cfg = write_config(&dir, QUICK_RUN);
    let out = dir.join("out");
    let status = Command::new(binary())
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("summary.json").is_file());
    assert!(out.join("invariants.json").is_file());
    assert!(out.join("fields_0.000000.csv").is_file());
    assert!(out.join("fields_0.500000.csv").is_file());
    assert!(out.join("kinetic_0.500000.csv").is_file());
    let summary = fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("\"hard_failures\": 0"));
}

#[test]
fn simulate_with_odd_nv_exits_2() {
    let dir = scratch("simulate_odd");
    let cfg = write_config(&dir, "nv = 7\n");
    let output = Command::new(binary())
        .args(["simulate", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("symmetric"), "stderr: {stderr}");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = scratch("determinism");
    let cfg = write_config(&dir, QUICK_RUN);
    let mut digests = Vec::new();
    for pass in 0..2 {
        let out = dir.join(format!("out{pass}"));
        let status = Command::new(binary())
            .args(["simulate", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
        let mut names: Vec<String> = fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .filter(|n| n != "timing.txt") // wall clock is the one nondeterministic artifact
            .collect();
        names.sort();
        let blob: Vec<u8> = names
            .iter()
            .flat_map(|n| fs::read(out.join(n)).unwrap())
            .collect();
        digests.push(blob);
    }
    assert_eq!(digests[0], digests[1]);
}

#[test]
fn outflow_mass_loss_is_informational_not_a_hard_failure() {
    let dir = scratch("outflow");
    let cfg = write_config(
        &dir,
        "\
n_cells = 32
nv = 8
boundary = zero-inflow
f0 = constant:0.5
t_end = 0.5
snapshots = 2
kappa = 0
",
    );
    let out = dir.join("out");
    let status = Command::new(binary())
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let summary = fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("\"hard_failures\": 0"));
}

#[test]
fn check_invariants_replays_a_run() {
    let dir = scratch("replay");
    let cfg = write_config(&dir, QUICK_RUN);
    let out = dir.join("out");
    let status = Command::new(binary())
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let output = Command::new(binary())
        .args(["check-invariants", "--run"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(
        stdout.contains("mass-conservation PASS"),
        "stdout: {stdout}"
    );
    assert!(out.join("invariants_replay.json").is_file());
}

#[test]
fn shipped_configs_validate_and_sweep() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR"))
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .join("configs");
    for name in ["generic.cfg", "limit-sweep.cfg"] {
        let status = Command::new(binary())
            .args(["validate-config", "--config"])
            .arg(configs.join(name))
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0), "validate {name}");
    }
    // the shipped sweep config runs end to end and leaves the slope verdict
    let dir = scratch("shipped_sweep");
    let out = dir.join("out");
    let status = Command::new(binary())
        .args(["limit-sweep", "--config"])
        .arg(configs.join("limit-sweep.cfg"))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("sweep.csv").is_file());
    let verdict = fs::read_to_string(out.join("sweep.json")).unwrap();
    assert!(verdict.contains("\"slope\""));
}

#[test]
fn limit_sweep_writes_csv_and_verdict() {
    let dir = scratch("sweep");
    let cfg = write_config(
        &dir,
        "\
n_cells = 128
nv = 8
kernel = constant
lambda0 = 0.5
t_end = 0.5
splitting = lie
cfl = 1.0
f0 = gaussian:1,0,0.8
epsilons = 0.4,0.2,0.1
",
    );
    let out = dir.join("out");
    let output = Command::new(binary())
        .args(["limit-sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(
        output.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(csv.starts_with("epsilon,error_l1"));
    assert_eq!(csv.lines().count(), 1 + 3);
    let verdict = fs::read_to_string(out.join("sweep.json")).unwrap();
    assert!(verdict.contains("\"slope\""));
    assert!(verdict.contains("\"pilot\""));
}
