//! Deterministic initialization: Glorot-uniform dense weights, orthogonal
//! recurrent weights, zero biases except an LSTM forget-gate bias of one,
//! identity layer norms.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::params::{
    AttentionParams, BlockParams, FfnParams, HeadParams, LayerNormParams, LstmParams, ModelParams,
};
use super::{ModelConfig, Real};

fn uniform<F: Real, R: Rng>(rng: &mut R, rows: usize, cols: usize, limit: f64) -> Array2<F> {
    Array2::from_shape_simple_fn((rows, cols), || F::lit(rng.gen_range(-limit..limit)))
}

fn glorot<F: Real, R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize) -> Array2<F> {
    uniform(rng, fan_in, fan_out, (6.0 / (fan_in + fan_out) as f64).sqrt())
}

/// Glorot limits of the attention projections with the fans of per-head
/// kernels: Q/K/V as `[embed, heads, head_dim]`, the output as
/// `[heads, head_dim, embed]`, every leading axis counted as receptive field.
/// Much smaller than a plain `embed × embed` Glorot; with the larger limits
/// the dropped-out attention branch swamps the residual and training stalls.
fn attention_limits(cfg: &ModelConfig) -> (f64, f64) {
    let (e, h, d) = (cfg.embed_dim, cfg.num_heads, cfg.head_dim());
    let qkv = (6.0 / (e * (h + d)) as f64).sqrt();
    let out = (6.0 / (e * (1 + h)) as f64).sqrt();
    (qkv, out)
}

/// `rows × cols` matrix with orthonormal rows (`rows <= cols`) or
/// orthonormal columns otherwise, via modified Gram–Schmidt on Gaussian draws.
pub(crate) fn orthogonal<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    let (n, len) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    if rows <= cols {
        Array2::from_shape_fn((rows, cols), |(i, j)| basis[i][j])
    } else {
        Array2::from_shape_fn((rows, cols), |(i, j)| basis[j][i])
    }
}

fn lstm<F: Real, R: Rng>(rng: &mut R, input: usize, units: usize) -> LstmParams<F> {
    let w_input = glorot(rng, input, 4 * units);
    let w_recurrent = orthogonal(rng, units, 4 * units).mapv(F::lit);
    let mut bias = Array1::zeros(4 * units);
    bias.slice_mut(ndarray::s![units..2 * units]).fill(F::one());
    LstmParams {
        w_input,
        w_recurrent,
        bias,
    }
}

impl<F: Real> ModelParams<F> {
    pub fn init(cfg: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, u, e, f) = (
            cfg.input_channels,
            cfg.bilstm_units,
            cfg.embed_dim,
            cfg.ffn_dim,
        );
        let out = cfg.horizon_len * cfg.output_channels;
        let lstm_fwd = lstm(&mut rng, c, u);
        let lstm_bwd = lstm(&mut rng, c, u);
        let proj_w = glorot(&mut rng, 2 * u, e);
        let (qkv, o) = attention_limits(cfg);
        let attn = AttentionParams {
            wq: uniform(&mut rng, e, e, qkv),
            bq: Array1::zeros(e),
            wk: uniform(&mut rng, e, e, qkv),
            bk: Array1::zeros(e),
            wv: uniform(&mut rng, e, e, qkv),
            bv: Array1::zeros(e),
            wo: uniform(&mut rng, e, e, o),
            bo: Array1::zeros(e),
        };
        let ffn = FfnParams {
            w1: glorot(&mut rng, e, f),
            b1: Array1::zeros(f),
            w2: glorot(&mut rng, f, e),
            b2: Array1::zeros(e),
        };
        let head = HeadParams {
            w: glorot(&mut rng, cfg.window_len * e, out),
            b: Array1::zeros(out),
        };
        Self {
            lstm_fwd,
            lstm_bwd,
            proj_w,
            proj_b: Array1::zeros(e),
            block: BlockParams {
                attn,
                norm1: LayerNormParams::identity(e),
                ffn,
                norm2: LayerNormParams::identity(e),
            },
            head,
        }
    }
}
