//! Brute-force references shared by the integration tests.
#![allow(dead_code)]

use gaitformer_core::data::FramingConfig;

/// Rank by counting: 1 + #smaller + (#equal - 1) / 2.
pub fn ranks_by_counting(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&a| {
            let less = x.iter().filter(|&&b| b < a).count() as f64;
            let equal = x.iter().filter(|&&b| b == a).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

/// Pearson correlation from centred sums, in a second arithmetic order.
pub fn pearson_ref(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = (0..x.len()).map(|i| (x[i] - mx) * (y[i] - my)).sum();
    let vx: f64 = (0..x.len()).map(|i| (x[i] - mx).powi(2)).sum();
    let vy: f64 = (0..y.len()).map(|i| (y[i] - my).powi(2)).sum();
    cov / vx.sqrt() / vy.sqrt()
}

pub fn spearman_ref(x: &[f64], y: &[f64]) -> f64 {
    pearson_ref(&ranks_by_counting(x), &ranks_by_counting(y))
}

/// Without ties: 1 - 6 sum d^2 / (n (n^2 - 1)).
pub fn spearman_no_ties_ref(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks_by_counting(x), ranks_by_counting(y));
    let n = x.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

pub fn r2_ref(truth: &[f64], pred: &[f64]) -> f64 {
    let n = truth.len() as f64;
    let mean = truth.iter().sum::<f64>() / n;
    let mut res = 0.0;
    let mut tot = 0.0;
    for i in 0..truth.len() {
        res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
        tot += (truth[i] - mean) * (truth[i] - mean);
    }
    1.0 - res / tot
}

/// (mae, rmse, nrmse) on the physical scale.
pub fn errors_ref(truth: &[f64], pred: &[f64]) -> (f64, f64, f64) {
    let n = truth.len() as f64;
    let mae = truth.iter().zip(pred).map(|(t, p)| (t - p).abs()).sum::<f64>() / n;
    let rmse = (truth.iter().zip(pred).map(|(t, p)| (t - p).powi(2)).sum::<f64>() / n).sqrt();
    let mut sorted = truth.to_vec();
    sorted.sort_by(f64::total_cmp);
    (mae, rmse, rmse / (sorted[sorted.len() - 1] - sorted[0]))
}

/// Counts valid frame starts one sample at a time.
pub fn frames_by_enumeration(n: usize, cfg: &FramingConfig) -> usize {
    (0..n)
        .filter(|&s| s >= cfg.burn_in && (s - cfg.burn_in) % cfg.stride == 0)
        .filter(|&s| s + cfg.window_len + cfg.horizon_len <= n)
        .count()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// A small end-to-end configuration writing under `out`: 3 synthetic
/// subjects of 8 s, 20-sample windows, 5-sample horizon and a desk-scale
/// network for both families.
pub fn tiny_config(out: &std::path::Path, seed: u64) -> gaitformer_core::pipeline::RunConfig {
    use gaitformer_core::data::SynthProfile;
    use gaitformer_core::nn::ModelConfig;
    use gaitformer_core::pipeline::{CorpusSource, RunConfig};

    let model = ModelConfig {
        input_channels: 35,
        output_channels: 6,
        ..ModelConfig::desk()
    };
    let mut cfg = RunConfig {
        corpus: CorpusSource::Synthetic {
            subjects: 3,
            profile: SynthProfile {
                duration_s: 8.0,
                ..SynthProfile::default()
            },
        },
        model_angles: model,
        model_moments: model,
        seed,
        output_dir: out.to_path_buf(),
        ..RunConfig::default()
    };
    cfg.framing.window_len = model.window_len;
    cfg.framing.horizon_len = model.horizon_len;
    cfg.train.epochs = 3;
    cfg.train.batch_size = 32;
    cfg.evaluation.frames = 200;
    cfg.evaluation.rows.close = 1;
    cfg.evaluation.rows.distant = 4;
    cfg
}

/// Central-difference check of every parameter of a network on a random
/// batch of two windows with dropout active (masks drawn once). Returns the
/// largest relative error and where it occurred.
pub fn max_gradient_error(cfg: &gaitformer_core::nn::ModelConfig, seed: u64) -> (f64, String) {
    use gaitformer_core::nn::{model_backward, model_forward, mse_loss, mse_loss_grad, BlockMasks, ModelParams};
    use ndarray::Array3;
    use rand::{Rng, SeedableRng};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut p = ModelParams::<f64>::init(cfg, seed ^ 7);
    // move off the zero biases so no gradient is trivially exact
    for (_, mut t) in p.tensors_mut() {
        t.mapv_inplace(|v| v + rng.gen_range(-0.05..0.05));
    }
    let mut random3 = |shape: (usize, usize, usize)| {
        Array3::from_shape_simple_fn(shape, || rng.gen_range(-1.0..1.0))
    };
    let x = random3((2, cfg.window_len, cfg.input_channels));
    let y = random3((2, cfg.horizon_len, cfg.output_channels));
    let masks = BlockMasks::draw(cfg, &[100, 101]);
    let loss = |p: &ModelParams<f64>| {
        let (out, _) = model_forward(cfg, p, x.view(), Some(&masks)).unwrap();
        mse_loss(out.view(), y.view()).unwrap()
    };
    let (out, cache) = model_forward(cfg, &p, x.view(), Some(&masks)).unwrap();
    let d = mse_loss_grad(out.view(), y.view()).unwrap();
    let analytic = model_backward(cfg, &p, &cache, d.view()).unwrap().to_flat();
    let base = p.to_flat();
    let h = 1e-5;
    let mut probe = p.clone();
    let mut worst = (0.0f64, String::new());
    let mut offset = 0;
    for (name, len) in p.tensors().into_iter().map(|(n, t)| (n, t.len())) {
        for i in offset..offset + len {
            let mut flat = base.clone();
            flat[i] += h;
            probe.assign_flat(&flat);
            let plus = loss(&probe);
            flat[i] -= 2.0 * h;
            probe.assign_flat(&flat);
            let minus = loss(&probe);
            let numeric = (plus - minus) / (2.0 * h);
            // floor: exactly-zero gradients (key bias) leave only rounding noise
            let e = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-4);
            if e > worst.0 {
                worst = (e, format!("{name}[{}]", i - offset));
            }
        }
        offset += len;
    }
    worst
}
