use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};

use super::params::LayerNormParams;
use super::{check_shape, NnError, Real};

#[derive(Debug, Clone)]
pub struct LayerNormCache<F> {
    /// Normalized rows before scale/shift.
    xhat: Array2<F>,
    inv_std: Array1<F>,
}

/// Row-wise `(x - mean) / sqrt(var + eps) * scale + shift`.
pub fn layer_norm_forward<F: Real>(
    p: &LayerNormParams<F>,
    x: ArrayView2<'_, F>,
    eps: F,
) -> Result<(Array2<F>, LayerNormCache<F>), NnError> {
    let d = x.ncols();
    check_shape("layer norm width", &[p.scale.len()], &[d])?;
    let n = F::from_usize(d).expect("width fits");
    let mut xhat = x.to_owned();
    let mut inv_std = Array1::<F>::zeros(x.nrows());
    for (mut row, is) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
        let mean = row.sum() / n;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|&v| v * v).sum::<F>() / n;
        *is = F::one() / (var + eps).sqrt();
        let s = *is;
        row.mapv_inplace(|v| v * s);
    }
    let mut y = xhat.clone();
    Zip::from(y.rows_mut()).for_each(|mut row| {
        Zip::from(&mut row)
            .and(&p.scale)
            .and(&p.shift)
            .for_each(|v, &g, &b| *v = *v * g + b);
    });
    Ok((y, LayerNormCache { xhat, inv_std }))
}

pub fn layer_norm_backward<F: Real>(
    p: &LayerNormParams<F>,
    cache: &LayerNormCache<F>,
    dy: ArrayView2<'_, F>,
) -> Result<(LayerNormParams<F>, Array2<F>), NnError> {
    check_shape("layer norm gradient", cache.xhat.shape(), dy.shape())?;
    let d = dy.ncols();
    let n = F::from_usize(d).expect("width fits");
    let grads = LayerNormParams {
        scale: (&dy * &cache.xhat).sum_axis(Axis(0)),
        shift: dy.sum_axis(Axis(0)),
    };
    let mut dx = Array2::<F>::zeros(dy.raw_dim());
    for (((mut dx_row, dy_row), xh_row), &is) in dx
        .rows_mut()
        .into_iter()
        .zip(dy.rows())
        .zip(cache.xhat.rows())
        .zip(cache.inv_std.iter())
    {
        let mut sum_g = F::zero();
        let mut sum_gx = F::zero();
        for k in 0..d {
            let g = dy_row[k] * p.scale[k];
            sum_g = sum_g + g;
            sum_gx = sum_gx + g * xh_row[k];
        }
        for k in 0..d {
            let g = dy_row[k] * p.scale[k];
            dx_row[k] = is / n * (n * g - sum_g - xh_row[k] * sum_gx);
        }
    }
    Ok((grads, dx))
}
