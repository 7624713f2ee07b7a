//! End-to-end checks of the command-line binary: exit codes, output
//! files, byte-identical reruns, and the output-directory fallbacks.

use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_bohr-lab");

const SAMPLE_CONFIG: &str = r#"{
  "experiment": "sample",
  "weights": {"kind": "harmonic", "params": {"alpha": 1.0}, "N": 2000},
  "source": "poisson",
  "master_seed": 11
}"#;

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("run.json");
    std::fs::write(&path, text).unwrap();
    path
}

fn run_cli(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("BOHR_LAB_OUT");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

#[test]
fn success_writes_envelope_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SAMPLE_CONFIG);
    let out = dir.path().join("out");
    let res = run_cli(
        &["sample", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
        &[],
    );
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    assert!(out.join("envelope.json").is_file());
    assert!(out.join("members.csv").is_file());
    let text = std::fs::read_to_string(out.join("envelope.json")).unwrap();
    assert!(text.contains("\"experiment\": \"sample\""));
    assert!(text.contains("config_digest"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SAMPLE_CONFIG);
    let mut blobs = Vec::new();
    for (sub, workers) in [("a", "1"), ("b", "4"), ("c", "4")] {
        let out = dir.path().join(sub);
        let res = run_cli(
            &[
                "sample",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--workers",
                workers,
            ],
            &[],
        );
        assert!(res.status.success());
        blobs.push((
            std::fs::read(out.join("envelope.json")).unwrap(),
            std::fs::read(out.join("members.csv")).unwrap(),
        ));
    }
    assert_eq!(blobs[0], blobs[1]);
    assert_eq!(blobs[1], blobs[2]);
}

#[test]
fn seed_override_changes_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SAMPLE_CONFIG);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for (out, seed) in [(&out_a, "11"), (&out_b, "12")] {
        let res = run_cli(
            &[
                "sample",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--seed",
                seed,
            ],
            &[],
        );
        assert!(res.status.success());
    }
    // Seed 11 matches the config's own master_seed, 12 must differ.
    let a = std::fs::read(out_a.join("envelope.json")).unwrap();
    let b = std::fs::read(out_b.join("envelope.json")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn env_var_supplies_default_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SAMPLE_CONFIG);
    let out = dir.path().join("from-env");
    let res = run_cli(
        &["sample", "--config", cfg.to_str().unwrap()],
        &[("BOHR_LAB_OUT", out.to_str().unwrap())],
    );
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    assert!(out.join("envelope.json").is_file());
}

#[test]
fn missing_out_dir_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SAMPLE_CONFIG);
    let res = run_cli(&["sample", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn experiment_name_mismatch_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SAMPLE_CONFIG);
    let res = run_cli(
        &["qi", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()],
        &[],
    );
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("sample"));
}

#[test]
fn unknown_experiment_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SAMPLE_CONFIG);
    let res = run_cli(
        &["frobnicate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()],
        &[],
    );
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn capacity_overflow_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
  "experiment": "pm-decay",
  "a": 2.0,
  "q": 3,
  "m_range": [28, 29, 30]
}"#,
    );
    let res = run_cli(
        &["pm-decay", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()],
        &[],
    );
    assert_eq!(res.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn plot_flag_emits_svg() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SAMPLE_CONFIG);
    let out = dir.path().join("out");
    let res = run_cli(
        &[
            "sample",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--plot",
        ],
        &[],
    );
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let svgs: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "svg"))
        .collect();
    assert!(!svgs.is_empty());
    let text = std::fs::read_to_string(svgs[0].path()).unwrap();
    assert!(text.starts_with("<svg"));
    assert!(text.contains("config_digest="));
}
