//! Long-horizon lower-limb joint angle and moment forecasting from fused
//! sEMG and IMU windows.
//!
//! The crate is organized along the processing chain:
//!
//! * [`dsp`]: Butterworth biquad cascades, sEMG envelope, decimation.
//! * [`data`]: trial schema and ingestion, synthetic gait corpora, framing,
//!   min-max normalization, leave-one-subject-out splits.
//! * [`nn`]: Bi-LSTM front end, single post-norm Transformer block and
//!   flatten/affine regression head with hand-written backpropagation.
//! * [`optim`]: AMSGrad, the training loop and checkpoints.
//! * [`eval`]: two-horizon extraction and the five-metric report.
//! * [`pipeline`]: configuration-driven orchestration used by the CLI.

pub mod data;
pub mod dsp;
pub mod eval;
pub mod nn;
pub mod optim;
pub mod pipeline;
pub mod util;
