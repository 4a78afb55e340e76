mod common;

use gaitformer_core::optim::{AdamConfig, AdamState};
use gaitformer_core::pipeline::{cmd_prepare, cmd_synth, cmd_train, Which};
use proptest::prelude::*;

#[test]
fn first_step_has_magnitude_lr() {
    let cfg = AdamConfig::default();
    for g in [1e-3, 1.0, 1e3] {
        for sign in [1.0, -1.0] {
            let mut s = AdamState::<f64>::new(1);
            let mut x = [0.0];
            s.step_slice(&cfg, "x", &mut x, &[sign * g]).unwrap();
            assert!((x[0] + sign * cfg.lr).abs() < 1e-6, "g = {g}: step {}", x[0]);
        }
    }
}

#[test]
fn constant_gradient_keeps_step_at_lr() {
    let cfg = AdamConfig::default();
    let mut s = AdamState::<f64>::new(1);
    let mut x = [0.0];
    for k in 1..=50 {
        s.step_slice(&cfg, "x", &mut x, &[2.5]).unwrap();
        assert!((x[0] + k as f64 * cfg.lr).abs() < 1e-6 * k as f64);
    }
}

#[test]
fn scalar_quadratic_converges() {
    let cfg = AdamConfig {
        lr: 0.1,
        ..AdamConfig::default()
    };
    for start in [3.0, -2.0, 0.7] {
        let mut s = AdamState::<f64>::new(1);
        let mut x = [start];
        for _ in 0..200 {
            let g = 2.0 * x[0];
            s.step_slice(&cfg, "x", &mut x, &[g]).unwrap();
        }
        assert!(x[0].abs() < 0.05, "from {start}: {}", x[0]);
    }
}

proptest! {
    #[test]
    fn v_max_never_decreases(grads in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 3), 1..60)) {
        let cfg = AdamConfig::default();
        let mut s = AdamState::<f64>::new(3);
        let mut x = [0.0; 3];
        let mut prev = s.v_max.clone();
        for g in &grads {
            s.step_slice(&cfg, "x", &mut x, g).unwrap();
            for i in 0..3 {
                prop_assert!(s.v_max[i] >= prev[i]);
                prop_assert!(s.v_max[i] >= s.v[i]);
            }
            prev = s.v_max.clone();
        }
    }
}

#[test]
fn training_loss_drops_by_ninety_percent_in_thirty_epochs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::tiny_config(dir.path(), 3);
    cfg.train.epochs = 30;
    cmd_synth(&cfg).unwrap();
    cmd_prepare(&cfg).unwrap();
    let runs = cmd_train(&cfg, Which::Both, false).unwrap();
    for run in runs {
        let first = run.history[0].train_mse;
        let last = run.history.last().unwrap().train_mse;
        assert!(
            last <= 0.1 * first,
            "{}: epoch 1 {first}, epoch 30 {last}",
            run.network
        );
    }
}

#[test]
fn same_seed_gives_bitwise_identical_checkpoints() {
    let runs: Vec<_> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let cfg = common::tiny_config(dir.path(), 9);
            cmd_synth(&cfg).unwrap();
            cmd_prepare(&cfg).unwrap();
            let summary = cmd_train(&cfg, Which::Angles, false).unwrap();
            let bytes = std::fs::read(&summary[0].checkpoint).unwrap();
            (summary[0].best_val_mse, bytes)
        })
        .collect();
    assert_eq!(runs[0].0, runs[1].0);
    assert!(runs[0].1 == runs[1].1, "checkpoints differ");
}
