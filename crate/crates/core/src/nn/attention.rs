//! Multi-head scaled dot-product self-attention over each frame's tokens.
//!
//! Inputs are `[B·T, E]` with the `T` tokens of frame `b` in rows
//! `b·T .. (b+1)·T`. No masking: every token attends to the whole window.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, Array4, ArrayView2, ArrayViewMut2, Axis};

use super::params::AttentionParams;
use super::{check_shape, NnError, Real};

#[derive(Debug, Clone)]
pub struct AttentionCache<F> {
    batch: usize,
    num_heads: usize,
    x: Array2<F>,
    q: Array2<F>,
    k: Array2<F>,
    v: Array2<F>,
    /// Softmax weights `[B, heads, T, T]`; rows sum to one.
    probs: Array4<F>,
    concat: Array2<F>,
}

impl<F: Real> AttentionCache<F> {
    pub fn probs(&self) -> &Array4<F> {
        &self.probs
    }
}

fn affine<F: Real>(x: &ArrayView2<'_, F>, w: &Array2<F>, b: &ndarray::Array1<F>) -> Array2<F> {
    let mut y = x.dot(w);
    y += b;
    y
}

fn softmax_rows<F: Real>(mut m: ArrayViewMut2<'_, F>) {
    for mut row in m.rows_mut() {
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

pub fn mha_forward<F: Real>(
    p: &AttentionParams<F>,
    x: ArrayView2<'_, F>,
    batch: usize,
    num_heads: usize,
) -> Result<(Array2<F>, AttentionCache<F>), NnError> {
    let (rows, e) = x.dim();
    check_shape("attention width", &[p.wq.nrows()], &[e])?;
    if batch == 0 || rows % batch != 0 || num_heads == 0 || e % num_heads != 0 {
        return Err(NnError::Shape {
            what: "attention batch/head split",
            expected: vec![batch, num_heads],
            found: vec![rows, e],
        });
    }
    let t = rows / batch;
    let dk = e / num_heads;
    let scale = F::one() / F::from_usize(dk).expect("head dim").sqrt();
    let q = affine(&x, &p.wq, &p.bq);
    let k = affine(&x, &p.wk, &p.bk);
    let v = affine(&x, &p.wv, &p.bv);
    let mut probs = Array4::<F>::zeros((batch, num_heads, t, t));
    let mut concat = Array2::<F>::zeros((rows, e));
    for b in 0..batch {
        let r = b * t..(b + 1) * t;
        for h in 0..num_heads {
            let c = h * dk..(h + 1) * dk;
            let qh = q.slice(s![r.clone(), c.clone()]);
            let kh = k.slice(s![r.clone(), c.clone()]);
            let vh = v.slice(s![r.clone(), c.clone()]);
            let mut ph = probs.slice_mut(s![b, h, .., ..]);
            general_mat_mul(scale, &qh, &kh.t(), F::zero(), &mut ph);
            softmax_rows(ph.view_mut());
            let mut out = concat.slice_mut(s![r.clone(), c]);
            general_mat_mul(F::one(), &ph, &vh, F::zero(), &mut out);
        }
    }
    let out = affine(&concat.view(), &p.wo, &p.bo);
    Ok((
        out,
        AttentionCache {
            batch,
            num_heads,
            x: x.to_owned(),
            q,
            k,
            v,
            probs,
            concat,
        },
    ))
}

pub fn mha_backward<F: Real>(
    p: &AttentionParams<F>,
    cache: &AttentionCache<F>,
    d_out: ArrayView2<'_, F>,
) -> Result<(AttentionParams<F>, Array2<F>), NnError> {
    check_shape("attention gradient", cache.x.shape(), d_out.shape())?;
    let (rows, e) = d_out.dim();
    let (batch, num_heads) = (cache.batch, cache.num_heads);
    let t = rows / batch;
    let dk = e / num_heads;
    let scale = F::one() / F::from_usize(dk).expect("head dim").sqrt();

    let d_concat = d_out.dot(&p.wo.t());
    let mut dq = Array2::<F>::zeros((rows, e));
    let mut dk_ = Array2::<F>::zeros((rows, e));
    let mut dv = Array2::<F>::zeros((rows, e));
    let mut dp = Array2::<F>::zeros((t, t));
    for b in 0..batch {
        let r = b * t..(b + 1) * t;
        for h in 0..num_heads {
            let c = h * dk..(h + 1) * dk;
            let ph = cache.probs.slice(s![b, h, .., ..]);
            let da = d_concat.slice(s![r.clone(), c.clone()]);
            let qh = cache.q.slice(s![r.clone(), c.clone()]);
            let kh = cache.k.slice(s![r.clone(), c.clone()]);
            let vh = cache.v.slice(s![r.clone(), c.clone()]);
            general_mat_mul(
                F::one(),
                &ph.t(),
                &da,
                F::zero(),
                &mut dv.slice_mut(s![r.clone(), c.clone()]),
            );
            general_mat_mul(F::one(), &da, &vh.t(), F::zero(), &mut dp);
            // softmax Jacobian: dS = P ∘ (dP − rowsum(dP ∘ P))
            for (mut dp_row, p_row) in dp.rows_mut().into_iter().zip(ph.rows()) {
                let dot = dp_row
                    .iter()
                    .zip(p_row.iter())
                    .map(|(&a, &b)| a * b)
                    .sum::<F>();
                dp_row
                    .iter_mut()
                    .zip(p_row.iter())
                    .for_each(|(g, &pv)| *g = pv * (*g - dot));
            }
            general_mat_mul(
                scale,
                &dp,
                &kh,
                F::zero(),
                &mut dq.slice_mut(s![r.clone(), c.clone()]),
            );
            general_mat_mul(
                scale,
                &dp.t(),
                &qh,
                F::zero(),
                &mut dk_.slice_mut(s![r.clone(), c]),
            );
        }
    }
    let x = &cache.x;
    let grads = AttentionParams {
        wq: x.t().dot(&dq),
        bq: dq.sum_axis(Axis(0)),
        wk: x.t().dot(&dk_),
        bk: dk_.sum_axis(Axis(0)),
        wv: x.t().dot(&dv),
        bv: dv.sum_axis(Axis(0)),
        wo: cache.concat.t().dot(&d_out),
        bo: d_out.sum_axis(Axis(0)),
    };
    let mut dx = dq.dot(&p.wq.t());
    general_mat_mul(F::one(), &dk_, &p.wk.t(), F::one(), &mut dx);
    general_mat_mul(F::one(), &dv, &p.wv.t(), F::one(), &mut dx);
    Ok((grads, dx))
}
