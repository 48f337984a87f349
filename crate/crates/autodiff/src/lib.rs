//! Reverse-mode automatic differentiation for the handful of primitives the
//! planning networks need. Values are row-major `[rows, cols]` f32 matrices;
//! parameters live in a [`ParamStore`] and a [`Tape`] records one forward pass.

mod gradcheck;
mod optim;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{gradient_check, GradCheckEntry, GradCheckReport};
pub use optim::{AdamW, AdamWConfig, StepStats};
pub use params::{init, Gradients, Manifest, Param, ParamId, ParamStore, StoreError};
pub use tape::{AutodiffError, EmbedEntry, Tape, Var};
pub use tensor::Tensor;

/// Layer normalization epsilon.
pub const LN_EPS: f32 = 1e-5;
