//! The composed network: Bi-LSTM → projection → Transformer block → head.

use ndarray::{Array2, Array3, ArrayView3, Axis};

use super::block::{transformer_block_backward, transformer_block_forward, BlockCache, BlockMasks};
use super::head::{head_backward, head_forward};
use super::lstm::{bilstm_backward, bilstm_forward, BiLstmCache};
use super::{check_shape, ModelConfig, ModelParams, NnError, Real};

#[derive(Debug, Clone)]
pub struct ForwardCache<F> {
    batch: usize,
    lstm: BiLstmCache<F>,
    /// Bi-LSTM output as `[B·T, 2·units]`.
    lstm_out: Array2<F>,
    block: BlockCache<F>,
    /// Block output as `[B, T·E]`.
    head_in: Array2<F>,
}

impl<F: Real> ForwardCache<F> {
    pub fn masks(&self) -> Option<&BlockMasks<F>> {
        self.block.masks()
    }
}

/// `PE[t, 2i] = sin(t / 10000^{2i/E})`, `PE[t, 2i+1] = cos(·)`.
fn positional_code<F: Real>(steps: usize, embed: usize) -> Array2<F> {
    Array2::from_shape_fn((steps, embed), |(t, j)| {
        let freq = 10000f64.powf(-((j / 2 * 2) as f64) / embed as f64);
        let a = t as f64 * freq;
        F::lit(if j % 2 == 0 { a.sin() } else { a.cos() })
    })
}

/// `inputs` is `[B, window, channels]`; returns `[B, horizon, outputs]`.
/// `masks = None` runs in evaluation mode.
pub fn model_forward<F: Real>(
    cfg: &ModelConfig,
    p: &ModelParams<F>,
    inputs: ArrayView3<'_, F>,
    masks: Option<&BlockMasks<F>>,
) -> Result<(Array3<F>, ForwardCache<F>), NnError> {
    let (batch, steps, channels) = inputs.dim();
    check_shape(
        "model input",
        &[cfg.window_len, cfg.input_channels],
        &[steps, channels],
    )?;
    let (h, lstm) = bilstm_forward(&p.lstm_fwd, &p.lstm_bwd, inputs)?;
    let lstm_out = h
        .into_shape_with_order((batch * steps, 2 * cfg.bilstm_units))
        .expect("contiguous");
    let mut emb = lstm_out.dot(&p.proj_w);
    emb += &p.proj_b;
    if cfg.positional_encoding {
        let pe = positional_code::<F>(steps, cfg.embed_dim);
        for mut frame in emb.exact_chunks_mut((steps, cfg.embed_dim)) {
            frame += &pe;
        }
    }
    let (z, block) = transformer_block_forward(
        &p.block,
        emb.view(),
        batch,
        cfg.num_heads,
        F::lit(cfg.layernorm_eps),
        masks,
    )?;
    let head_in = z
        .into_shape_with_order((batch, steps * cfg.embed_dim))
        .expect("contiguous");
    let out = head_forward(&p.head, head_in.view(), cfg.horizon_len)?;
    Ok((
        out,
        ForwardCache {
            batch,
            lstm,
            lstm_out,
            block,
            head_in,
        },
    ))
}

/// Gradients of a scalar loss with respect to every parameter, given
/// `d_out = ∂loss/∂output`.
pub fn model_backward<F: Real>(
    cfg: &ModelConfig,
    p: &ModelParams<F>,
    cache: &ForwardCache<F>,
    d_out: ArrayView3<'_, F>,
) -> Result<ModelParams<F>, NnError> {
    let (batch, t, e) = (cache.batch, cfg.window_len, cfg.embed_dim);
    check_shape(
        "model output gradient",
        &[batch, cfg.horizon_len, cfg.output_channels],
        d_out.shape(),
    )?;
    let (head, d_head_in) = head_backward(&p.head, cache.head_in.view(), d_out)?;
    let dz = d_head_in
        .into_shape_with_order((batch * t, e))
        .expect("contiguous");
    let (block, d_emb) = transformer_block_backward(&p.block, &cache.block, dz.view())?;
    let proj_w = cache.lstm_out.t().dot(&d_emb);
    let proj_b = d_emb.sum_axis(Axis(0));
    let d_lstm = d_emb
        .dot(&p.proj_w.t())
        .into_shape_with_order((batch, t, 2 * cfg.bilstm_units))
        .expect("contiguous");
    let (lstm_fwd, lstm_bwd, _) =
        bilstm_backward(&p.lstm_fwd, &p.lstm_bwd, &cache.lstm, d_lstm.view())?;
    Ok(ModelParams {
        lstm_fwd,
        lstm_bwd,
        proj_w,
        proj_b,
        block,
        head,
    })
}

/// Evaluation-mode forward pass, processed in chunks of `chunk` frames to
/// bound memory.
pub fn predict<F: Real>(
    cfg: &ModelConfig,
    p: &ModelParams<F>,
    inputs: ArrayView3<'_, F>,
    chunk: usize,
) -> Result<Array3<F>, NnError> {
    let n = inputs.shape()[0];
    let mut out = Array3::<F>::zeros((n, cfg.horizon_len, cfg.output_channels));
    let chunk = chunk.max(1);
    let mut start = 0;
    while start < n {
        let end = (start + chunk).min(n);
        let (y, _) = model_forward(cfg, p, inputs.slice(ndarray::s![start..end, .., ..]), None)?;
        out.slice_mut(ndarray::s![start..end, .., ..]).assign(&y);
        start = end;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{mse_loss, mse_loss_grad};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random3(shape: (usize, usize, usize), seed: u64) -> Array3<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array3::from_shape_simple_fn(shape, || rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn eval_mode_is_deterministic() {
        let cfg = ModelConfig::desk();
        let p = ModelParams::<f64>::init(&cfg, 1);
        let x = random3((3, 20, 3), 2);
        let (a, _) = model_forward(&cfg, &p, x.view(), None).unwrap();
        let (b, _) = model_forward(&cfg, &p, x.view(), None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.shape(), &[3, 5, 2]);
    }

    #[test]
    fn replay_with_cached_masks_is_bitwise() {
        let cfg = ModelConfig::desk();
        let p = ModelParams::<f32>::init(&cfg, 1);
        let x = random3((2, 20, 3), 3).mapv(|v| v as f32);
        let masks = BlockMasks::draw(&cfg, &[5, 6]);
        let (a, cache) = model_forward(&cfg, &p, x.view(), Some(&masks)).unwrap();
        let (b, _) = model_forward(&cfg, &p, x.view(), cache.masks()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn predict_chunks_agree_with_single_pass() {
        let cfg = ModelConfig::desk();
        let p = ModelParams::<f64>::init(&cfg, 4);
        let x = random3((7, 20, 3), 5);
        let (full, _) = model_forward(&cfg, &p, x.view(), None).unwrap();
        let chunked = predict(&cfg, &p, x.view(), 3).unwrap();
        for (a, b) in full.iter().zip(chunked.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn small_descent_step_does_not_increase_loss() {
        let cfg = ModelConfig::desk();
        let mut p = ModelParams::<f64>::init(&cfg, 6);
        let x = random3((4, 20, 3), 7);
        let y = random3((4, 5, 2), 8);
        let masks = BlockMasks::draw(&cfg, &[1, 2, 3, 4]);
        let (out, cache) = model_forward(&cfg, &p, x.view(), Some(&masks)).unwrap();
        let before = mse_loss(out.view(), y.view()).unwrap();
        let d = mse_loss_grad(out.view(), y.view()).unwrap();
        let g = model_backward(&cfg, &p, &cache, d.view()).unwrap();
        for ((_, mut w), (_, gw)) in p.tensors_mut().into_iter().zip(g.tensors()) {
            w.zip_mut_with(&gw, |w, &g| *w -= 1e-6 * g);
        }
        let (out, _) = model_forward(&cfg, &p, x.view(), Some(&masks)).unwrap();
        let after = mse_loss(out.view(), y.view()).unwrap();
        assert!(after <= before, "{after} > {before}");
    }

    #[test]
    fn positional_code_changes_output_only_when_enabled() {
        let cfg = ModelConfig::desk();
        let with = ModelConfig {
            positional_encoding: true,
            ..cfg
        };
        let p = ModelParams::<f64>::init(&cfg, 9);
        let x = random3((1, 20, 3), 10);
        let (a, _) = model_forward(&cfg, &p, x.view(), None).unwrap();
        let (b, _) = model_forward(&with, &p, x.view(), None).unwrap();
        assert_ne!(a, b);
        let pe = positional_code::<f64>(20, 16);
        assert_eq!(pe[[0, 0]], 0.0);
        assert_eq!(pe[[0, 1]], 1.0);
    }

    #[test]
    fn wrong_window_is_rejected() {
        let cfg = ModelConfig::desk();
        let p = ModelParams::<f64>::init(&cfg, 1);
        let x = random3((1, 19, 3), 2);
        assert!(matches!(
            model_forward(&cfg, &p, x.view(), None),
            Err(NnError::Shape { .. })
        ));
    }
}
