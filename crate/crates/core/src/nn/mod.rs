//! The regression network: Bi-LSTM front end, affine projection to the
//! embedding width, one post-norm Transformer block and a flatten/affine
//! head reshaped to `horizon × outputs`.
//!
//! All layers work on whole batches and keep explicit caches so that the
//! backward pass is exact. Arithmetic is generic over [`Real`] so the same
//! code is checked against finite differences in `f64` and trained in
//! `f32`.

mod attention;
mod block;
mod config;
mod head;
mod init;
mod layer_norm;
mod loss;
mod lstm;
mod model;
mod params;

pub use attention::{mha_backward, mha_forward, AttentionCache};
pub use block::{transformer_block_backward, transformer_block_forward, BlockCache, BlockMasks};
pub use config::ModelConfig;
pub use head::{head_backward, head_forward};
pub use layer_norm::{layer_norm_backward, layer_norm_forward, LayerNormCache};
pub use loss::{mae_metric, mse_loss, mse_loss_grad};
pub use lstm::{bilstm_backward, bilstm_forward, BiLstmCache};
pub use model::{model_backward, model_forward, predict, ForwardCache};
pub use params::{
    AttentionParams, BlockParams, FfnParams, HeadParams, LayerNormParams, LstmParams, ModelParams,
};

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive};
use thiserror::Error;

/// Scalar type the network is generic over (`f32` or `f64`).
pub trait Real:
    Float
    + LinalgScalar
    + ScalarOperand
    + FromPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch in {what}: expected {expected:?}, got {found:?}")]
    Shape {
        what: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("invalid model config: {0}")]
    Config(String),
}

pub(crate) fn check_shape(
    what: &'static str,
    expected: &[usize],
    found: &[usize],
) -> Result<(), NnError> {
    if expected != found {
        return Err(NnError::Shape {
            what,
            expected: expected.to_vec(),
            found: found.to_vec(),
        });
    }
    Ok(())
}

#[inline]
pub(crate) fn sigmoid<F: Real>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}
