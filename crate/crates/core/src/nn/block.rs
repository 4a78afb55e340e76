//! Post-norm Transformer block: attention and feed-forward residual
//! sub-blocks, each followed by layer normalization.

use ndarray::{Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::attention::{mha_backward, mha_forward, AttentionCache};
use super::layer_norm::{layer_norm_backward, layer_norm_forward, LayerNormCache};
use super::params::{BlockParams, FfnParams};
use super::{check_shape, ModelConfig, NnError, Real};

/// Inverted-dropout multipliers (`0` or `1/(1-p)`) for the two residual
/// branches, `[B·T, E]` each.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMasks<F> {
    pub attn: Array2<F>,
    pub ffn: Array2<F>,
}

impl<F: Real> BlockMasks<F> {
    /// One independent stream per frame, so a frame's masks do not depend on
    /// which batch it lands in.
    pub fn draw(cfg: &ModelConfig, frame_seeds: &[u64]) -> Self {
        let (t, e) = (cfg.window_len, cfg.embed_dim);
        let p = cfg.dropout_rate;
        let keep = F::lit(1.0 / (1.0 - p));
        let rows = frame_seeds.len() * t;
        let mut attn = Array2::<F>::zeros((rows, e));
        let mut ffn = Array2::<F>::zeros((rows, e));
        for (i, &seed) in frame_seeds.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for m in [&mut attn, &mut ffn] {
                for v in m.slice_mut(ndarray::s![i * t..(i + 1) * t, ..]).iter_mut() {
                    *v = if rng.gen::<f64>() >= p { keep } else { F::zero() };
                }
            }
        }
        Self { attn, ffn }
    }

    pub fn ones(rows: usize, embed: usize) -> Self {
        Self {
            attn: Array2::ones((rows, embed)),
            ffn: Array2::ones((rows, embed)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BlockCache<F> {
    attn: AttentionCache<F>,
    masks: Option<BlockMasks<F>>,
    norm1: LayerNormCache<F>,
    y: Array2<F>,
    hidden_pre: Array2<F>,
    hidden: Array2<F>,
    norm2: LayerNormCache<F>,
}

impl<F: Real> BlockCache<F> {
    pub fn masks(&self) -> Option<&BlockMasks<F>> {
        self.masks.as_ref()
    }
}

fn ffn_forward<F: Real>(p: &FfnParams<F>, y: &Array2<F>) -> (Array2<F>, Array2<F>, Array2<F>) {
    let mut pre = y.dot(&p.w1);
    pre += &p.b1;
    let hidden = pre.mapv(|v| v.max(F::zero()));
    let mut out = hidden.dot(&p.w2);
    out += &p.b2;
    (pre, hidden, out)
}

/// `x` is `[B·T, E]`; `masks = None` is evaluation mode.
pub fn transformer_block_forward<F: Real>(
    p: &BlockParams<F>,
    x: ArrayView2<'_, F>,
    batch: usize,
    num_heads: usize,
    eps: F,
    masks: Option<&BlockMasks<F>>,
) -> Result<(Array2<F>, BlockCache<F>), NnError> {
    if let Some(m) = masks {
        check_shape("attention dropout mask", x.shape(), m.attn.shape())?;
        check_shape("ffn dropout mask", x.shape(), m.ffn.shape())?;
    }
    let (mut s1, attn) = mha_forward(&p.attn, x, batch, num_heads)?;
    if let Some(m) = masks {
        s1 *= &m.attn;
    }
    s1 += &x;
    let (y, norm1) = layer_norm_forward(&p.norm1, s1.view(), eps)?;
    let (hidden_pre, hidden, mut s2) = ffn_forward(&p.ffn, &y);
    if let Some(m) = masks {
        s2 *= &m.ffn;
    }
    s2 += &y;
    let (z, norm2) = layer_norm_forward(&p.norm2, s2.view(), eps)?;
    Ok((
        z,
        BlockCache {
            attn,
            masks: masks.cloned(),
            norm1,
            y,
            hidden_pre,
            hidden,
            norm2,
        },
    ))
}

pub fn transformer_block_backward<F: Real>(
    p: &BlockParams<F>,
    cache: &BlockCache<F>,
    dz: ArrayView2<'_, F>,
) -> Result<(BlockParams<F>, Array2<F>), NnError> {
    check_shape("block gradient", cache.y.shape(), dz.shape())?;
    let (g_norm2, ds2) = layer_norm_backward(&p.norm2, &cache.norm2, dz)?;
    let mut d_ffn = ds2.clone();
    if let Some(m) = &cache.masks {
        d_ffn *= &m.ffn;
    }
    let mut d_hidden = d_ffn.dot(&p.ffn.w2.t());
    Zip::from(&mut d_hidden)
        .and(&cache.hidden_pre)
        .for_each(|g, &pre| {
            if pre <= F::zero() {
                *g = F::zero()
            }
        });
    let g_ffn = FfnParams {
        w1: cache.y.t().dot(&d_hidden),
        b1: d_hidden.sum_axis(Axis(0)),
        w2: cache.hidden.t().dot(&d_ffn),
        b2: d_ffn.sum_axis(Axis(0)),
    };
    let dy = ds2 + d_hidden.dot(&p.ffn.w1.t());
    let (g_norm1, ds1) = layer_norm_backward(&p.norm1, &cache.norm1, dy.view())?;
    let mut d_attn = ds1.clone();
    if let Some(m) = &cache.masks {
        d_attn *= &m.attn;
    }
    let (g_attn, dx_attn) = mha_backward(&p.attn, &cache.attn, d_attn.view())?;
    let dx = ds1 + dx_attn;
    Ok((
        BlockParams {
            attn: g_attn,
            norm1: g_norm1,
            ffn: g_ffn,
            norm2: g_norm2,
        },
        dx,
    ))
}
