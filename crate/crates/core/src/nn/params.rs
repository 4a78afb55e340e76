use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD};

use super::{ModelConfig, Real};

/// One LSTM direction. Gate blocks are ordered input, forget, candidate,
/// output along the `4 * units` axis.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams<F> {
    /// `input_channels × 4·units`
    pub w_input: Array2<F>,
    /// `units × 4·units`
    pub w_recurrent: Array2<F>,
    pub bias: Array1<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams<F> {
    pub wq: Array2<F>,
    pub bq: Array1<F>,
    pub wk: Array2<F>,
    pub bk: Array1<F>,
    pub wv: Array2<F>,
    pub bv: Array1<F>,
    pub wo: Array2<F>,
    pub bo: Array1<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormParams<F> {
    pub scale: Array1<F>,
    pub shift: Array1<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FfnParams<F> {
    pub w1: Array2<F>,
    pub b1: Array1<F>,
    pub w2: Array2<F>,
    pub b2: Array1<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams<F> {
    pub attn: AttentionParams<F>,
    pub norm1: LayerNormParams<F>,
    pub ffn: FfnParams<F>,
    pub norm2: LayerNormParams<F>,
}

/// Flatten-then-affine head: `window·embed → horizon·outputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams<F> {
    pub w: Array2<F>,
    pub b: Array1<F>,
}

/// Every learnable tensor of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F> {
    pub lstm_fwd: LstmParams<F>,
    pub lstm_bwd: LstmParams<F>,
    pub proj_w: Array2<F>,
    pub proj_b: Array1<F>,
    pub block: BlockParams<F>,
    pub head: HeadParams<F>,
}

impl<F: Real> LstmParams<F> {
    pub fn zeros(input: usize, units: usize) -> Self {
        Self {
            w_input: Array2::zeros((input, 4 * units)),
            w_recurrent: Array2::zeros((units, 4 * units)),
            bias: Array1::zeros(4 * units),
        }
    }

    pub fn units(&self) -> usize {
        self.w_recurrent.nrows()
    }

    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, F>)> {
        vec![
            ("w_input".into(), self.w_input.view().into_dyn()),
            ("w_recurrent".into(), self.w_recurrent.view().into_dyn()),
            ("bias".into(), self.bias.view().into_dyn()),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, F>)> {
        vec![
            ("w_input".into(), self.w_input.view_mut().into_dyn()),
            ("w_recurrent".into(), self.w_recurrent.view_mut().into_dyn()),
            ("bias".into(), self.bias.view_mut().into_dyn()),
        ]
    }
}

impl<F: Real> AttentionParams<F> {
    pub fn zeros(e: usize) -> Self {
        Self {
            wq: Array2::zeros((e, e)),
            bq: Array1::zeros(e),
            wk: Array2::zeros((e, e)),
            bk: Array1::zeros(e),
            wv: Array2::zeros((e, e)),
            bv: Array1::zeros(e),
            wo: Array2::zeros((e, e)),
            bo: Array1::zeros(e),
        }
    }

    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, F>)> {
        vec![
            ("wq".into(), self.wq.view().into_dyn()),
            ("bq".into(), self.bq.view().into_dyn()),
            ("wk".into(), self.wk.view().into_dyn()),
            ("bk".into(), self.bk.view().into_dyn()),
            ("wv".into(), self.wv.view().into_dyn()),
            ("bv".into(), self.bv.view().into_dyn()),
            ("wo".into(), self.wo.view().into_dyn()),
            ("bo".into(), self.bo.view().into_dyn()),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, F>)> {
        vec![
            ("wq".into(), self.wq.view_mut().into_dyn()),
            ("bq".into(), self.bq.view_mut().into_dyn()),
            ("wk".into(), self.wk.view_mut().into_dyn()),
            ("bk".into(), self.bk.view_mut().into_dyn()),
            ("wv".into(), self.wv.view_mut().into_dyn()),
            ("bv".into(), self.bv.view_mut().into_dyn()),
            ("wo".into(), self.wo.view_mut().into_dyn()),
            ("bo".into(), self.bo.view_mut().into_dyn()),
        ]
    }
}

impl<F: Real> LayerNormParams<F> {
    pub fn identity(d: usize) -> Self {
        Self {
            scale: Array1::ones(d),
            shift: Array1::zeros(d),
        }
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            scale: Array1::zeros(d),
            shift: Array1::zeros(d),
        }
    }

    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, F>)> {
        vec![
            ("scale".into(), self.scale.view().into_dyn()),
            ("shift".into(), self.shift.view().into_dyn()),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, F>)> {
        vec![
            ("scale".into(), self.scale.view_mut().into_dyn()),
            ("shift".into(), self.shift.view_mut().into_dyn()),
        ]
    }
}

impl<F: Real> FfnParams<F> {
    pub fn zeros(e: usize, f: usize) -> Self {
        Self {
            w1: Array2::zeros((e, f)),
            b1: Array1::zeros(f),
            w2: Array2::zeros((f, e)),
            b2: Array1::zeros(e),
        }
    }

    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, F>)> {
        vec![
            ("w1".into(), self.w1.view().into_dyn()),
            ("b1".into(), self.b1.view().into_dyn()),
            ("w2".into(), self.w2.view().into_dyn()),
            ("b2".into(), self.b2.view().into_dyn()),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, F>)> {
        vec![
            ("w1".into(), self.w1.view_mut().into_dyn()),
            ("b1".into(), self.b1.view_mut().into_dyn()),
            ("w2".into(), self.w2.view_mut().into_dyn()),
            ("b2".into(), self.b2.view_mut().into_dyn()),
        ]
    }
}

fn prefixed<'a, T: 'a>(
    prefix: &'a str,
    items: Vec<(String, T)>,
) -> impl Iterator<Item = (String, T)> + 'a {
    items
        .into_iter()
        .map(move |(name, t)| (format!("{prefix}.{name}"), t))
}

impl<F: Real> BlockParams<F> {
    pub fn zeros(e: usize, f: usize) -> Self {
        Self {
            attn: AttentionParams::zeros(e),
            norm1: LayerNormParams::zeros(e),
            ffn: FfnParams::zeros(e, f),
            norm2: LayerNormParams::zeros(e),
        }
    }

    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, F>)> {
        prefixed("attn", self.attn.tensors())
            .chain(prefixed("norm1", self.norm1.tensors()))
            .chain(prefixed("ffn", self.ffn.tensors()))
            .chain(prefixed("norm2", self.norm2.tensors()))
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, F>)> {
        let Self {
            attn,
            norm1,
            ffn,
            norm2,
        } = self;
        prefixed("attn", attn.tensors_mut())
            .chain(prefixed("norm1", norm1.tensors_mut()))
            .chain(prefixed("ffn", ffn.tensors_mut()))
            .chain(prefixed("norm2", norm2.tensors_mut()))
            .collect()
    }
}

impl<F: Real> HeadParams<F> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            w: Array2::zeros((inputs, outputs)),
            b: Array1::zeros(outputs),
        }
    }

    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, F>)> {
        vec![
            ("w".into(), self.w.view().into_dyn()),
            ("b".into(), self.b.view().into_dyn()),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, F>)> {
        vec![
            ("w".into(), self.w.view_mut().into_dyn()),
            ("b".into(), self.b.view_mut().into_dyn()),
        ]
    }
}

impl<F: Real> ModelParams<F> {
    /// All-zero tensors with the shapes implied by `cfg` (gradient buffers).
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let u = cfg.bilstm_units;
        let e = cfg.embed_dim;
        Self {
            lstm_fwd: LstmParams::zeros(cfg.input_channels, u),
            lstm_bwd: LstmParams::zeros(cfg.input_channels, u),
            proj_w: Array2::zeros((2 * u, e)),
            proj_b: Array1::zeros(e),
            block: BlockParams::zeros(e, cfg.ffn_dim),
            head: HeadParams::zeros(
                cfg.window_len * e,
                cfg.horizon_len * cfg.output_channels,
            ),
        }
    }

    /// Named tensors in a fixed canonical order.
    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, F>)> {
        prefixed("lstm_fwd", self.lstm_fwd.tensors())
            .chain(prefixed("lstm_bwd", self.lstm_bwd.tensors()))
            .chain([
                ("proj.w".to_string(), self.proj_w.view().into_dyn()),
                ("proj.b".to_string(), self.proj_b.view().into_dyn()),
            ])
            .chain(prefixed("block", self.block.tensors()))
            .chain(prefixed("head", self.head.tensors()))
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, F>)> {
        let Self {
            lstm_fwd,
            lstm_bwd,
            proj_w,
            proj_b,
            block,
            head,
        } = self;
        prefixed("lstm_fwd", lstm_fwd.tensors_mut())
            .chain(prefixed("lstm_bwd", lstm_bwd.tensors_mut()))
            .chain([
                ("proj.w".to_string(), proj_w.view_mut().into_dyn()),
                ("proj.b".to_string(), proj_b.view_mut().into_dyn()),
            ])
            .chain(prefixed("block", block.tensors_mut()))
            .chain(prefixed("head", head.tensors_mut()))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Elementwise conversion to another precision.
    pub fn cast<G: Real>(&self, cfg: &ModelConfig) -> ModelParams<G> {
        let mut out = ModelParams::<G>::zeros(cfg);
        for ((_, src), (_, mut dst)) in self.tensors().into_iter().zip(out.tensors_mut()) {
            dst.zip_mut_with(&src, |d, &s| {
                *d = G::from_f64(s.to_f64().expect("finite")).expect("representable")
            });
        }
        out
    }

    /// Fills every tensor with the concatenated values of `flat` (canonical order).
    pub fn assign_flat(&mut self, flat: &[F]) {
        let mut offset = 0;
        for (_, mut t) in self.tensors_mut() {
            let n = t.len();
            t.iter_mut()
                .zip(&flat[offset..offset + n])
                .for_each(|(d, &s)| *d = s);
            offset += n;
        }
    }

    pub fn to_flat(&self) -> Vec<F> {
        self.tensors()
            .into_iter()
            .flat_map(|(_, t)| t.iter().copied().collect::<Vec<_>>())
            .collect()
    }
}
