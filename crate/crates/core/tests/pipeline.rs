mod common;

use std::path::Path;

use gaitformer_core::data::{frame_count, read_frame_cache, FramingConfig};
use gaitformer_core::pipeline::{
    cmd_evaluate, cmd_predict, cmd_prepare, cmd_synth, cmd_train, CorpusSource, PipelineError,
    RunConfig, Which,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn with_subjects(cfg: &mut RunConfig, n: usize, trials: usize) {
    if let CorpusSource::Synthetic { subjects, profile } = &mut cfg.corpus {
        *subjects = n;
        profile.trials_per_subject = trials;
    }
}

#[test]
fn frame_counts_match_enumeration() {
    let defaults = FramingConfig::default();
    assert_eq!(frame_count(200, &defaults), 13);
    assert_eq!(frame_count(1000, &defaults), 213);
    assert_eq!(frame_count(149, &defaults), 0);
    assert_eq!(frame_count(150, &defaults), 1);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let cfg = FramingConfig {
            window_len: rng.gen_range(1..150),
            horizon_len: rng.gen_range(1..40),
            stride: rng.gen_range(1..10),
            burn_in: rng.gen_range(0..20),
        };
        let n = rng.gen_range(0..1200);
        assert_eq!(frame_count(n, &cfg), common::frames_by_enumeration(n, &cfg), "{n} {cfg:?}");
    }
}

#[test]
fn prepare_counts_follow_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::tiny_config(dir.path(), 1);
    cmd_synth(&cfg).unwrap();
    let s = cmd_prepare(&cfg).unwrap();
    assert_eq!(s.trials.len(), 3);
    for t in &s.trials {
        let framing = if t.role == "test" { cfg.eval_framing() } else { cfg.framing };
        assert_eq!(t.frames, frame_count(t.samples, &framing), "{t:?}");
    }
    let sum = |role: &str| -> usize {
        s.trials.iter().filter(|t| t.role == role).map(|t| t.frames).sum()
    };
    assert_eq!(s.train_frames, sum("train"));
    assert_eq!(s.val_frames, sum("val"));
    assert_eq!(s.test_frames, sum("test"));
    assert_eq!(s.split.test_subject, "S03");
    assert_eq!(s.split.val_subject, "S02");
}

#[test]
fn synth_is_deterministic() {
    let read_all = |root: &Path| {
        let mut files = Vec::new();
        let mut stack = vec![root.join("corpus")];
        while let Some(d) = stack.pop() {
            for e in std::fs::read_dir(d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    files.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
                }
            }
        }
        files.sort();
        files
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    cmd_synth(&common::tiny_config(a.path(), 6)).unwrap();
    cmd_synth(&common::tiny_config(b.path(), 6)).unwrap();
    let (fa, fb) = (read_all(a.path()), read_all(b.path()));
    assert_eq!(fa.len(), 10);
    assert!(fa == fb, "synthetic corpora differ");
}

#[test]
fn four_subjects_with_two_trials_give_eight_trial_directories() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::tiny_config(dir.path(), 2);
    with_subjects(&mut cfg, 4, 2);
    let s = cmd_synth(&cfg).unwrap();
    assert_eq!((s.subjects, s.trials), (4, 8));
    let mut dirs = 0;
    for subject in std::fs::read_dir(dir.path().join("corpus")).unwrap() {
        let subject = subject.unwrap().path();
        if subject.is_dir() {
            for trial in std::fs::read_dir(&subject).unwrap() {
                let trial = trial.unwrap().path();
                for f in ["emg.csv", "imu.csv", "targets.csv"] {
                    assert!(trial.join(f).is_file());
                }
                dirs += 1;
            }
        }
    }
    assert_eq!(dirs, 8);
}

#[test]
fn rerunning_prepare_reproduces_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::tiny_config(dir.path(), 8);
    cmd_synth(&cfg).unwrap();
    let a = cmd_prepare(&cfg).unwrap();
    let b = cmd_prepare(&cfg).unwrap();
    assert_eq!(a.cache_digest, b.cache_digest);
    assert_eq!(a, b);
}

#[test]
fn unknown_test_subject_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::tiny_config(dir.path(), 1);
    cmd_synth(&cfg).unwrap();
    cfg.split.test = Some("S99".into());
    let err = cmd_prepare(&cfg).unwrap_err();
    assert!(err.to_string().contains("S99"), "{err}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn six_subject_split_has_no_leak() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::tiny_config(dir.path(), 5);
    with_subjects(&mut cfg, 6, 1);
    cmd_synth(&cfg).unwrap();
    let s = cmd_prepare(&cfg).unwrap();
    let cache = read_frame_cache(&cfg.layout().prepared_dir().join(&s.cache_file)).unwrap();
    s.split.check_no_leak(&cache.train, &cache.val, &cache.test).unwrap();
    assert_eq!(s.split.train_subjects.len(), 4);
    assert!(cache.train.iter().all(|f| s.split.is_train(&f.subject_id)));
    // swapping partitions is caught
    assert!(s.split.check_no_leak(&cache.val, &cache.train, &cache.test).is_err());
}

#[test]
fn prepare_without_corpus_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::tiny_config(dir.path(), 1);
    let err = cmd_prepare(&cfg).unwrap_err();
    assert!(matches!(err, PipelineError::Data(_)));
}

#[test]
fn changed_corpus_settings_require_a_new_synth() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::tiny_config(dir.path(), 1);
    cmd_synth(&cfg).unwrap();
    cfg.seed = 2;
    assert!(matches!(cmd_prepare(&cfg), Err(PipelineError::Validation(_))));
}

#[test]
fn full_run_produces_both_networks_and_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::tiny_config(dir.path(), 4);
    cfg.train.epochs = 1;
    cfg.evaluation.traces = true;
    cmd_synth(&cfg).unwrap();
    cmd_prepare(&cfg).unwrap();
    let runs = cmd_train(&cfg, Which::Both, false).unwrap();
    assert_eq!(runs.len(), 2);
    let report = cmd_evaluate(&cfg, Which::Both, None).unwrap();
    // 12 joints x 2 horizons
    assert_eq!(report.metrics.rows.len(), 24);
    for row in &report.metrics.rows {
        assert_eq!(row.n, 200);
        assert!(row.rmse >= row.mae);
    }
    let text = std::fs::read_to_string(dir.path().join("report/report.json")).unwrap();
    let parsed: gaitformer_core::pipeline::EvaluationReport = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed, report);
    assert!(dir.path().join("report/traces").is_dir());

    let blocks = cmd_predict(&cfg, Which::Both, None).unwrap();
    for (_, b) in blocks {
        assert_eq!(b.dim(), (5, 6));
        assert!(b.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn evaluate_refuses_a_checkpoint_from_other_data() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::tiny_config(dir.path(), 4);
    cfg.train.epochs = 1;
    cmd_synth(&cfg).unwrap();
    cmd_prepare(&cfg).unwrap();
    cmd_train(&cfg, Which::Angles, false).unwrap();
    cfg.framing.stride = 5;
    cmd_prepare(&cfg).unwrap();
    let err = cmd_evaluate(&cfg, Which::Angles, None).unwrap_err();
    assert!(matches!(err, PipelineError::Validation(_)), "{err}");
}
