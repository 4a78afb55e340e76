//! End-to-end checks of the composed network at desk scale.

mod common;

use gaitformer_core::nn::{model_forward, ModelConfig, ModelParams};
use ndarray::Array3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random3(shape: (usize, usize, usize), rng: &mut ChaCha8Rng, scale: f64) -> Array3<f64> {
    Array3::from_shape_simple_fn(shape, || rng.gen_range(-scale..scale))
}

#[test]
fn every_parameter_gradient_matches_finite_differences() {
    let (worst, at) = common::max_gradient_error(&ModelConfig::desk(), 42);
    assert!(worst < 1e-4, "max relative error {worst} at {at}");
}

#[test]
fn outputs_stay_finite_over_random_draws() {
    let cfg = ModelConfig::desk();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for draw in 0..1000u64 {
        let p = ModelParams::<f64>::init(&cfg, draw);
        let x = random3((1, cfg.window_len, cfg.input_channels), &mut rng, 3.0);
        let (out, _) = model_forward(&cfg, &p, x.view(), None).unwrap();
        assert!(out.iter().all(|v| v.is_finite()), "draw {draw}");
    }
}

#[test]
fn parameter_count_matches_tensor_shapes() {
    let cfg = ModelConfig::desk();
    // hand count: 2 LSTM directions, projection, attention, 2 norms, FFN, head
    let lstm = 2 * (3 * 32 + 8 * 32 + 32);
    let proj = 16 * 16 + 16;
    let attn = 4 * (16 * 16 + 16);
    let norms = 2 * 2 * 16;
    let ffn = 16 * 32 + 32 + 32 * 16 + 16;
    let head = 20 * 16 * 10 + 10;
    let expected = lstm + proj + attn + norms + ffn + head;
    assert_eq!(cfg.param_count(), expected);
    assert_eq!(ModelParams::<f64>::init(&cfg, 0).param_count(), expected);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn output_shape_is_horizon_by_outputs(
        window in 2usize..12,
        channels in 1usize..6,
        units in 1usize..6,
        heads in 1usize..4,
        head_dim in 1usize..5,
        ffn in 1usize..12,
        horizon in 1usize..6,
        outputs in 1usize..5,
        batch in 1usize..4,
        seed in any::<u64>(),
    ) {
        let cfg = ModelConfig {
            window_len: window,
            input_channels: channels,
            bilstm_units: units,
            embed_dim: heads * head_dim,
            num_heads: heads,
            ffn_dim: ffn,
            horizon_len: horizon,
            output_channels: outputs,
            ..ModelConfig::default()
        };
        prop_assert!(cfg.validate().is_ok());
        let p = ModelParams::<f32>::init(&cfg, seed);
        let x = ndarray::Array3::<f32>::zeros((batch, window, channels));
        let (out, _) = model_forward(&cfg, &p, x.view(), None).unwrap();
        prop_assert_eq!(out.shape(), &[batch, horizon, outputs]);
    }
}
