use serde::{Deserialize, Serialize};

use super::NnError;

/// Network dimensions and regularization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub window_len: usize,
    pub input_channels: usize,
    pub bilstm_units: usize,
    pub embed_dim: usize,
    pub num_heads: usize,
    pub ffn_dim: usize,
    pub dropout_rate: f64,
    pub layernorm_eps: f64,
    pub horizon_len: usize,
    pub output_channels: usize,
    /// Adds a sinusoidal position code after the projection. Off by default;
    /// the Bi-LSTM already carries temporal order.
    pub positional_encoding: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            window_len: 125,
            input_channels: 35,
            bilstm_units: 125,
            embed_dim: 256,
            num_heads: 8,
            ffn_dim: 512,
            dropout_rate: 0.1,
            layernorm_eps: 1e-6,
            horizon_len: 25,
            output_channels: 6,
            positional_encoding: false,
        }
    }
}

impl ModelConfig {
    /// The small configuration used for finite-difference checks.
    pub fn desk() -> Self {
        Self {
            window_len: 20,
            input_channels: 3,
            bilstm_units: 8,
            embed_dim: 16,
            num_heads: 2,
            ffn_dim: 32,
            horizon_len: 5,
            output_channels: 2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let dims = [
            ("window_len", self.window_len),
            ("input_channels", self.input_channels),
            ("bilstm_units", self.bilstm_units),
            ("embed_dim", self.embed_dim),
            ("num_heads", self.num_heads),
            ("ffn_dim", self.ffn_dim),
            ("horizon_len", self.horizon_len),
            ("output_channels", self.output_channels),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(NnError::Config(format!("{name} must be positive")));
        }
        if self.embed_dim % self.num_heads != 0 {
            return Err(NnError::Config(format!(
                "embed_dim {} is not divisible by num_heads {}",
                self.embed_dim, self.num_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(NnError::Config(format!(
                "dropout_rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if !(self.layernorm_eps > 0.0) {
            return Err(NnError::Config("layernorm_eps must be positive".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.num_heads
    }

    /// Closed-form parameter count.
    pub fn param_count(&self) -> usize {
        let (c, u, e, f) = (
            self.input_channels,
            self.bilstm_units,
            self.embed_dim,
            self.ffn_dim,
        );
        let lstm = 2 * (c * 4 * u + u * 4 * u + 4 * u);
        let proj = 2 * u * e + e;
        let attn = 4 * (e * e + e);
        let norms = 2 * 2 * e;
        let ffn = e * f + f + f * e + e;
        let out = self.horizon_len * self.output_channels;
        let head = self.window_len * e * out + out;
        lstm + proj + attn + norms + ffn + head
    }
}
