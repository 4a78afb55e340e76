use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::json;

fn model(units: usize) -> serde_json::Value {
    json!({
        "window_len": 20, "input_channels": 35, "bilstm_units": units, "embed_dim": 16,
        "num_heads": 2, "ffn_dim": 32, "horizon_len": 5, "output_channels": 6
    })
}

/// Tiny run config inside `dir`; returns its path.
fn write_config(dir: &Path, subjects: usize, units: usize) -> PathBuf {
    let cfg = json!({
        "corpus": {"synthetic": {"subjects": subjects, "profile": {"duration_s": 6.0}}},
        "framing": {"window_len": 20, "horizon_len": 5, "stride": 4},
        "model_angles": model(units),
        "model_moments": model(units),
        "train": {"epochs": 1, "batch_size": 32},
        "evaluation": {"frames": 100, "rows": {"close": 1, "distant": 4}},
        "seed": 3,
        "output_dir": dir.join("out"),
    });
    let path = dir.join(format!("cfg-{subjects}-{units}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn run(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaitformer"))
        .args(args)
        .arg("--config")
        .arg(config)
        .env("GAIT_LOG_LEVEL", "error")
        .output()
        .unwrap()
}

fn ok(args: &[&str], config: &Path) -> String {
    let out = run(args, config);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn full_command_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 3, 8);
    ok(&["synth"], &cfg);
    ok(&["prepare"], &cfg);
    ok(&["train", "--which", "both"], &cfg);
    let out = dir.path().join("out");
    assert!(out.join("checkpoints/angles.ckpt").is_file());
    assert!(out.join("checkpoints/moments.ckpt").is_file());
    assert!(out.join("logs/train_angles.jsonl").is_file());

    let table = ok(&["evaluate", "--scale", "physical"], &cfg);
    assert!(table.contains("CH") && table.contains("DH"));
    assert!(out.join("report/report.json").is_file());

    let printed = ok(&["predict", "--which", "angles"], &cfg);
    let rows: Vec<&str> = printed.lines().filter(|l| !l.starts_with('#')).collect();
    // header plus one line per horizon step, 6 joints each
    assert_eq!(rows.len(), 6);
    assert!(rows[1..].iter().all(|r| r.split(',').count() == 7));
}

#[test]
fn empty_corpus_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 0, 8);
    let out = run(&["synth"], &cfg);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty corpus"));
}

#[test]
fn prepare_before_synth_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 3, 8);
    assert_eq!(code(&run(&["prepare"], &cfg)), 3);
}

#[test]
fn unknown_network_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 3, 8);
    assert_eq!(code(&run(&["train", "--which", "hips"], &cfg)), 2);
}

#[test]
fn truncated_checkpoint_fails_without_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 3, 8);
    ok(&["synth"], &cfg);
    ok(&["prepare"], &cfg);
    ok(&["train", "--which", "angles"], &cfg);
    let ckpt = dir.path().join("out/checkpoints/angles.ckpt");
    let bytes = std::fs::read(&ckpt).unwrap();
    std::fs::write(&ckpt, &bytes[..bytes.len() / 2]).unwrap();
    let out = run(&["evaluate", "--which", "angles"], &cfg);
    assert_eq!(code(&out), 3);
    assert!(!dir.path().join("out/report/report.json").exists());
}

#[test]
fn resume_with_another_architecture_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 3, 8);
    ok(&["synth"], &cfg);
    ok(&["prepare"], &cfg);
    ok(&["train", "--which", "angles"], &cfg);
    ok(&["train", "--which", "angles", "--resume", "--epochs", "2"], &cfg);

    let wider = write_config(dir.path(), 3, 10);
    let out = run(&["train", "--which", "angles", "--resume", "--epochs", "3"], &wider);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn seed_flag_changes_the_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 3, 8);
    let a = ok(&["synth"], &cfg);
    let b = ok(&["synth", "--seed", "4"], &cfg);
    assert_ne!(a, b);
}
