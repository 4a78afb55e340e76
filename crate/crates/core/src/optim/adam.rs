use ndarray::{ArrayViewD, ArrayViewMutD};
use serde::{Deserialize, Serialize};

use super::OptimError;
use crate::nn::{ModelParams, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub amsgrad: bool,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 8e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            amsgrad: true,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<(), OptimError> {
        let ok = self.lr.is_finite()
            && self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(OptimError::Config(format!("invalid Adam settings {self:?}")))
        }
    }
}

/// Flat moment buffers in the canonical tensor order of [`ModelParams`].
///
/// The AMSGrad maximum is taken over the raw second moment and the bias
/// correction is applied to the maximum, so the first step has magnitude
/// `lr` and the denominator never shrinks.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<F> {
    pub step: u64,
    pub m: Vec<F>,
    pub v: Vec<F>,
    pub v_max: Vec<F>,
}

impl<F: Real> AdamState<F> {
    pub fn new(len: usize) -> Self {
        Self {
            step: 0,
            m: vec![F::zero(); len],
            v: vec![F::zero(); len],
            v_max: vec![F::zero(); len],
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// One update of every tensor. Gradients are checked for finiteness
    /// before anything is modified.
    pub fn step_model(
        &mut self,
        cfg: &AdamConfig,
        lr: f64,
        params: &mut ModelParams<F>,
        grads: &ModelParams<F>,
    ) -> Result<(), OptimError> {
        let grads = grads.tensors();
        let mut tensors = params.tensors_mut();
        self.step_tensors(cfg, lr, &mut tensors, &grads)
    }

    pub fn step_tensors(
        &mut self,
        cfg: &AdamConfig,
        lr: f64,
        params: &mut [(String, ArrayViewMutD<'_, F>)],
        grads: &[(String, ArrayViewD<'_, F>)],
    ) -> Result<(), OptimError> {
        let total: usize = params.iter().map(|(_, t)| t.len()).sum();
        if params.len() != grads.len() || total != self.len() {
            return Err(OptimError::GradientShape {
                name: format!("{} tensors, {} values", params.len(), total),
            });
        }
        for ((name, p), (_, g)) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(OptimError::GradientShape { name: name.clone() });
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(OptimError::NonFiniteGradient { name: name.clone() });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 / (1.0 - cfg.beta1.powi(t));
        let c2 = 1.0 / (1.0 - cfg.beta2.powi(t));
        let k = Coeffs {
            b1: F::lit(cfg.beta1),
            b2: F::lit(cfg.beta2),
            lr_c1: F::lit(lr * c1),
            c2: F::lit(c2),
            eps: F::lit(cfg.eps),
            amsgrad: cfg.amsgrad,
        };
        let mut offset = 0;
        for ((_, p), (_, g)) in params.iter_mut().zip(grads) {
            let n = p.len();
            let range = offset..offset + n;
            let (m, v, vm) = (
                &mut self.m[range.clone()],
                &mut self.v[range.clone()],
                &mut self.v_max[range],
            );
            for ((((pi, &gi), mi), vi), vmi) in
                p.iter_mut().zip(g.iter()).zip(m).zip(v).zip(vm)
            {
                k.apply(pi, gi, mi, vi, vmi);
            }
            offset += n;
        }
        Ok(())
    }

    /// Update of a plain parameter vector (one tensor named `name`).
    pub fn step_slice(
        &mut self,
        cfg: &AdamConfig,
        name: &str,
        params: &mut [F],
        grads: &[F],
    ) -> Result<(), OptimError> {
        let n = params.len();
        let p = ArrayViewMutD::from_shape(ndarray::IxDyn(&[n]), params)
            .expect("1-d view of a slice");
        let g = ArrayViewD::from_shape(ndarray::IxDyn(&[grads.len()]), grads)
            .expect("1-d view of a slice");
        self.step_tensors(cfg, cfg.lr, &mut [(name.to_string(), p)], &[(name.to_string(), g)])
    }
}

struct Coeffs<F> {
    b1: F,
    b2: F,
    lr_c1: F,
    c2: F,
    eps: F,
    amsgrad: bool,
}

impl<F: Real> Coeffs<F> {
    #[inline]
    fn apply(&self, p: &mut F, g: F, m: &mut F, v: &mut F, v_max: &mut F) {
        *m = self.b1 * *m + (F::one() - self.b1) * g;
        *v = self.b2 * *v + (F::one() - self.b2) * g * g;
        let denom = if self.amsgrad {
            if *v > *v_max {
                *v_max = *v;
            }
            *v_max
        } else {
            *v
        };
        *p -= self.lr_c1 * *m / ((denom * self.c2).sqrt() + self.eps);
    }
}
