use ndarray::{Array, ArrayView, Dimension, Zip};

use super::{check_shape, NnError, Real};

/// Mean of squared differences over every element.
pub fn mse_loss<F: Real, D: Dimension>(
    pred: ArrayView<'_, F, D>,
    target: ArrayView<'_, F, D>,
) -> Result<F, NnError> {
    check_shape("loss operands", pred.shape(), target.shape())?;
    let n = F::from_usize(pred.len().max(1)).expect("count");
    let mut sum = F::zero();
    Zip::from(&pred).and(&target).for_each(|&p, &t| {
        let d = p - t;
        sum = sum + d * d;
    });
    Ok(sum / n)
}

/// Mean of absolute differences over every element.
pub fn mae_metric<F: Real, D: Dimension>(
    pred: ArrayView<'_, F, D>,
    target: ArrayView<'_, F, D>,
) -> Result<F, NnError> {
    check_shape("metric operands", pred.shape(), target.shape())?;
    let n = F::from_usize(pred.len().max(1)).expect("count");
    let mut sum = F::zero();
    Zip::from(&pred)
        .and(&target)
        .for_each(|&p, &t| sum = sum + (p - t).abs());
    Ok(sum / n)
}

/// `∂ MSE / ∂ pred = 2 (pred − target) / N`.
pub fn mse_loss_grad<F: Real, D: Dimension>(
    pred: ArrayView<'_, F, D>,
    target: ArrayView<'_, F, D>,
) -> Result<Array<F, D>, NnError> {
    check_shape("loss operands", pred.shape(), target.shape())?;
    let scale = F::lit(2.0) / F::from_usize(pred.len().max(1)).expect("count");
    Ok(Zip::from(&pred)
        .and(&target)
        .map_collect(|&p, &t| (p - t) * scale))
}
