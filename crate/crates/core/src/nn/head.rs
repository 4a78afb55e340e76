//! Flatten-then-affine output head.

use ndarray::{Array2, Array3, ArrayView2, ArrayView3, Axis};

use super::params::HeadParams;
use super::{check_shape, NnError, Real};

/// `x` is `[B, T·E]` (each frame's tokens flattened row-major); the result is
/// `[B, horizon, outputs]`.
pub fn head_forward<F: Real>(
    p: &HeadParams<F>,
    x: ArrayView2<'_, F>,
    horizon: usize,
) -> Result<Array3<F>, NnError> {
    check_shape("head input width", &[p.w.nrows()], &[x.ncols()])?;
    let width = p.w.ncols();
    if horizon == 0 || width % horizon != 0 {
        return Err(NnError::Shape {
            what: "head horizon",
            expected: vec![width],
            found: vec![horizon],
        });
    }
    let mut y = x.dot(&p.w);
    y += &p.b;
    let batch = x.nrows();
    Ok(y.into_shape_with_order((batch, horizon, width / horizon))
        .expect("contiguous"))
}

/// Returns parameter gradients and `d x` (`[B, T·E]`).
pub fn head_backward<F: Real>(
    p: &HeadParams<F>,
    x: ArrayView2<'_, F>,
    dy: ArrayView3<'_, F>,
) -> Result<(HeadParams<F>, Array2<F>), NnError> {
    let (batch, h, o) = dy.dim();
    check_shape("head gradient", &[x.nrows(), p.w.ncols()], &[batch, h * o])?;
    let dy = dy
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((batch, h * o))
        .expect("contiguous");
    let grads = HeadParams {
        w: x.t().dot(&dy),
        b: dy.sum_axis(Axis(0)),
    };
    Ok((grads, dy.dot(&p.w.t())))
}
