//! Bidirectional LSTM with backpropagation through time.
//!
//! Sequences are processed time-major internally (`[T, B, ·]`) so each
//! step's rows are contiguous; the public interface is batch-major
//! `[B, T, ·]`. Zero initial hidden and cell states.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, Array3, ArrayView2, ArrayView3, Axis};

use super::params::LstmParams;
use super::{check_shape, sigmoid, NnError, Real};

/// Activations of one direction, indexed by absolute time step.
#[derive(Debug, Clone)]
pub struct LstmDirCache<F> {
    reverse: bool,
    /// Post-activation gates `[T, B, 4H]` (input, forget, candidate, output).
    gates: Array3<F>,
    c: Array3<F>,
    tanh_c: Array3<F>,
    h: Array3<F>,
}

#[derive(Debug, Clone)]
pub struct BiLstmCache<F> {
    batch: usize,
    steps: usize,
    /// Time-major input `[T·B, C]`.
    x: Array2<F>,
    fwd: LstmDirCache<F>,
    bwd: LstmDirCache<F>,
}

fn step_order(steps: usize, reverse: bool, s: usize) -> usize {
    if reverse {
        steps - 1 - s
    } else {
        s
    }
}

fn direction_forward<F: Real>(
    p: &LstmParams<F>,
    x: ArrayView2<'_, F>,
    steps: usize,
    batch: usize,
    reverse: bool,
) -> LstmDirCache<F> {
    let h_dim = p.units();
    let g_dim = 4 * h_dim;
    let mut pre = x.dot(&p.w_input);
    pre += &p.bias;
    let mut gates = pre
        .into_shape_with_order((steps, batch, g_dim))
        .expect("contiguous gemm output");
    let mut c = Array3::<F>::zeros((steps, batch, h_dim));
    let mut tanh_c = Array3::<F>::zeros((steps, batch, h_dim));
    let mut h = Array3::<F>::zeros((steps, batch, h_dim));

    for s in 0..steps {
        let t = step_order(steps, reverse, s);
        if s > 0 {
            let t_prev = step_order(steps, reverse, s - 1);
            let (h_prev, mut z) = (h.index_axis(Axis(0), t_prev), gates.index_axis_mut(Axis(0), t));
            general_mat_mul(F::one(), &h_prev, &p.w_recurrent, F::one(), &mut z);
        }
        let c_prev = (s > 0).then(|| c.index_axis(Axis(0), step_order(steps, reverse, s - 1)).to_owned());
        let mut z = gates.index_axis_mut(Axis(0), t);
        let mut c_t = c.index_axis_mut(Axis(0), t);
        let mut tc_t = tanh_c.index_axis_mut(Axis(0), t);
        let mut h_t = h.index_axis_mut(Axis(0), t);
        for b in 0..batch {
            let zb = z.row_mut(b).into_slice().expect("contiguous");
            let cb = c_t.row_mut(b).into_slice().expect("contiguous");
            let tcb = tc_t.row_mut(b).into_slice().expect("contiguous");
            let hb = h_t.row_mut(b).into_slice().expect("contiguous");
            for k in 0..h_dim {
                let i = sigmoid(zb[k]);
                let f = sigmoid(zb[h_dim + k]);
                let g = zb[2 * h_dim + k].tanh();
                let o = sigmoid(zb[3 * h_dim + k]);
                zb[k] = i;
                zb[h_dim + k] = f;
                zb[2 * h_dim + k] = g;
                zb[3 * h_dim + k] = o;
                let cp = c_prev.as_ref().map_or(F::zero(), |cp| cp[[b, k]]);
                let cv = f * cp + i * g;
                let tc = cv.tanh();
                cb[k] = cv;
                tcb[k] = tc;
                hb[k] = o * tc;
            }
        }
    }
    LstmDirCache {
        reverse,
        gates,
        c,
        tanh_c,
        h,
    }
}

/// Returns parameter gradients and the pre-activation gradient `[T·B, 4H]`.
fn direction_backward<F: Real>(
    p: &LstmParams<F>,
    cache: &LstmDirCache<F>,
    x: ArrayView2<'_, F>,
    dh_up: ArrayView3<'_, F>,
) -> (LstmParams<F>, Array2<F>) {
    let (steps, batch, h_dim) = cache.h.dim();
    let g_dim = 4 * h_dim;
    let reverse = cache.reverse;
    let mut dz = Array3::<F>::zeros((steps, batch, g_dim));
    let mut dh_rec = Array2::<F>::zeros((batch, h_dim));
    let mut dc_rec = Array2::<F>::zeros((batch, h_dim));
    let u_t = p.w_recurrent.t();

    for s in (0..steps).rev() {
        let t = step_order(steps, reverse, s);
        let t_prev = (s > 0).then(|| step_order(steps, reverse, s - 1));
        let gates = cache.gates.index_axis(Axis(0), t);
        let tanh_c = cache.tanh_c.index_axis(Axis(0), t);
        let dh = dh_up.index_axis(Axis(0), t);
        let mut dz_t = dz.index_axis_mut(Axis(0), t);
        for b in 0..batch {
            let gb = gates.row(b);
            let dzb = dz_t.row_mut(b).into_slice().expect("contiguous");
            for k in 0..h_dim {
                let (i, f, g, o) = (gb[k], gb[h_dim + k], gb[2 * h_dim + k], gb[3 * h_dim + k]);
                let tc = tanh_c[[b, k]];
                let dh_total = dh[[b, k]] + dh_rec[[b, k]];
                let dc = dc_rec[[b, k]] + dh_total * o * (F::one() - tc * tc);
                let c_prev = t_prev.map_or(F::zero(), |tp| cache.c[[tp, b, k]]);
                dzb[k] = dc * g * i * (F::one() - i);
                dzb[h_dim + k] = dc * c_prev * f * (F::one() - f);
                dzb[2 * h_dim + k] = dc * i * (F::one() - g * g);
                dzb[3 * h_dim + k] = dh_total * tc * o * (F::one() - o);
                dc_rec[[b, k]] = dc * f;
            }
        }
        general_mat_mul(F::one(), &dz.index_axis(Axis(0), t), &u_t, F::zero(), &mut dh_rec);
    }

    // h_prev[t] is the hidden state fed into step t (zero for the first step)
    let mut h_prev = Array3::<F>::zeros((steps, batch, h_dim));
    for s in 1..steps {
        let t = step_order(steps, reverse, s);
        let tp = step_order(steps, reverse, s - 1);
        h_prev
            .index_axis_mut(Axis(0), t)
            .assign(&cache.h.index_axis(Axis(0), tp));
    }
    let dz = dz
        .into_shape_with_order((steps * batch, g_dim))
        .expect("contiguous");
    let h_prev = h_prev
        .into_shape_with_order((steps * batch, h_dim))
        .expect("contiguous");
    let grads = LstmParams {
        w_input: x.t().dot(&dz),
        w_recurrent: h_prev.t().dot(&dz),
        bias: dz.sum_axis(Axis(0)),
    };
    (grads, dz)
}

/// `[B, T, C]` → `[B, T, 2·units]`, forward states first.
pub fn bilstm_forward<F: Real>(
    fwd: &LstmParams<F>,
    bwd: &LstmParams<F>,
    input: ArrayView3<'_, F>,
) -> Result<(Array3<F>, BiLstmCache<F>), NnError> {
    let (batch, steps, channels) = input.dim();
    check_shape(
        "bilstm input channels",
        &[fwd.w_input.nrows()],
        &[channels],
    )?;
    check_shape("bilstm directions", &fwd.w_recurrent.shape().to_vec(), bwd.w_recurrent.shape())?;
    let x = input
        .permuted_axes([1, 0, 2])
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((steps * batch, channels))
        .expect("standard layout");
    let f = direction_forward(fwd, x.view(), steps, batch, false);
    let r = direction_forward(bwd, x.view(), steps, batch, true);
    let h_dim = fwd.units();
    let mut out = Array3::<F>::zeros((batch, steps, 2 * h_dim));
    out.slice_mut(s![.., .., ..h_dim])
        .assign(&f.h.view().permuted_axes([1, 0, 2]));
    out.slice_mut(s![.., .., h_dim..])
        .assign(&r.h.view().permuted_axes([1, 0, 2]));
    Ok((
        out,
        BiLstmCache {
            batch,
            steps,
            x,
            fwd: f,
            bwd: r,
        },
    ))
}

/// Gradients of both directions and of the input, given `d_out` `[B, T, 2·units]`.
pub fn bilstm_backward<F: Real>(
    fwd: &LstmParams<F>,
    bwd: &LstmParams<F>,
    cache: &BiLstmCache<F>,
    d_out: ArrayView3<'_, F>,
) -> Result<(LstmParams<F>, LstmParams<F>, Array3<F>), NnError> {
    let h_dim = fwd.units();
    check_shape(
        "bilstm output gradient",
        &[cache.batch, cache.steps, 2 * h_dim],
        d_out.shape(),
    )?;
    let dh_f = d_out.slice(s![.., .., ..h_dim]).permuted_axes([1, 0, 2]);
    let dh_b = d_out.slice(s![.., .., h_dim..]).permuted_axes([1, 0, 2]);
    let (gf, dz_f) = direction_backward(fwd, &cache.fwd, cache.x.view(), dh_f);
    let (gb, dz_b) = direction_backward(bwd, &cache.bwd, cache.x.view(), dh_b);
    let mut dx = dz_f.dot(&fwd.w_input.t());
    general_mat_mul(F::one(), &dz_b, &bwd.w_input.t(), F::one(), &mut dx);
    let dx = dx
        .into_shape_with_order((cache.steps, cache.batch, fwd.w_input.nrows()))
        .expect("contiguous")
        .permuted_axes([1, 0, 2])
        .as_standard_layout()
        .into_owned();
    Ok((gf, gb, dx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ModelConfig;
    use crate::nn::ModelParams;
    use ndarray::Array3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_input(b: usize, t: usize, c: usize, seed: u64) -> Array3<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array3::from_shape_simple_fn((b, t, c), || rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn zero_network_outputs_zero() {
        let p = LstmParams::<f64>::zeros(3, 4);
        let x = random_input(2, 7, 3, 1);
        let (out, _) = bilstm_forward(&p, &p, x.view()).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn reversal_swaps_directions() {
        let cfg = ModelConfig::desk();
        let p = ModelParams::<f64>::init(&cfg, 5);
        let x = random_input(2, 9, 3, 2);
        let mut x_rev = x.clone();
        x_rev.invert_axis(Axis(1));
        // with swapped parameter sets, reversed input reproduces the output reversed
        let (out, _) = bilstm_forward(&p.lstm_fwd, &p.lstm_bwd, x.view()).unwrap();
        let (out_rev, _) = bilstm_forward(&p.lstm_bwd, &p.lstm_fwd, x_rev.view()).unwrap();
        let h = cfg.bilstm_units;
        for b in 0..2 {
            for t in 0..9 {
                for k in 0..h {
                    let tr = 8 - t;
                    assert!((out[[b, t, k]] - out_rev[[b, tr, h + k]]).abs() < 1e-14);
                    assert!((out[[b, t, h + k]] - out_rev[[b, tr, k]]).abs() < 1e-14);
                }
            }
        }
        // with shared parameters the halves swap exactly
        let (o1, _) = bilstm_forward(&p.lstm_fwd, &p.lstm_fwd, x.view()).unwrap();
        let (o2, _) = bilstm_forward(&p.lstm_fwd, &p.lstm_fwd, x_rev.view()).unwrap();
        for b in 0..2 {
            for t in 0..9 {
                for k in 0..h {
                    assert!((o1[[b, t, k]] - o2[[b, 8 - t, h + k]]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn channel_mismatch_is_error() {
        let p = LstmParams::<f64>::zeros(3, 4);
        let x = random_input(1, 5, 4, 0);
        assert!(matches!(
            bilstm_forward(&p, &p, x.view()),
            Err(NnError::Shape { .. })
        ));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let cfg = ModelConfig::desk();
        let p = ModelParams::<f64>::init(&cfg, 11);
        let x = random_input(2, 6, 3, 3);
        let (out, cache) = bilstm_forward(&p.lstm_fwd, &p.lstm_bwd, x.view()).unwrap();
        let w = random_input(2, 6, 2 * cfg.bilstm_units, 4);
        let loss = |f: &LstmParams<f64>, b: &LstmParams<f64>, x: &Array3<f64>| {
            let (o, _) = bilstm_forward(f, b, x.view()).unwrap();
            (&o * &w).sum()
        };
        let _ = out;
        let (gf, gb, dx) = bilstm_backward(&p.lstm_fwd, &p.lstm_bwd, &cache, w.view()).unwrap();
        let eps = 1e-5;
        let mut worst: f64 = 0.0;
        let mut check = |analytic: f64, numeric: f64| {
            let denom = analytic.abs().max(numeric.abs()).max(1e-4);
            worst = worst.max((analytic - numeric).abs() / denom);
        };
        for dir in 0..2 {
            let g = if dir == 0 { &gf } else { &gb };
            let n_tensors = g.tensors().len();
            for ti in 0..n_tensors {
                let len = g.tensors()[ti].1.len();
                for idx in 0..len {
                    let mut plus = p.clone();
                    let mut minus = p.clone();
                    let bump = |params: &mut ModelParams<f64>, delta: f64| {
                        let target = if dir == 0 { &mut params.lstm_fwd } else { &mut params.lstm_bwd };
                        let mut ts = target.tensors_mut();
                        *ts[ti].1.iter_mut().nth(idx).unwrap() += delta;
                    };
                    bump(&mut plus, eps);
                    bump(&mut minus, -eps);
                    let num = (loss(&plus.lstm_fwd, &plus.lstm_bwd, &x)
                        - loss(&minus.lstm_fwd, &minus.lstm_bwd, &x))
                        / (2.0 * eps);
                    let ana = *g.tensors()[ti].1.iter().nth(idx).unwrap();
                    check(ana, num);
                }
            }
        }
        for idx in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            *xp.iter_mut().nth(idx).unwrap() += eps;
            *xm.iter_mut().nth(idx).unwrap() -= eps;
            let num = (loss(&p.lstm_fwd, &p.lstm_bwd, &xp) - loss(&p.lstm_fwd, &p.lstm_bwd, &xm)) / (2.0 * eps);
            check(*dx.iter().nth(idx).unwrap(), num);
        }
        assert!(worst < 1e-4, "max relative error {worst}");
    }
}
