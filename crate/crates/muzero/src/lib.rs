//! Latent-space planning agent: representation, dynamics and prediction
//! networks with ego conditioning and outcome heads, PUCT tree search, and
//! the self-play training loop.

pub mod agent;
pub mod buffer;
pub mod config;
pub mod episode;
pub mod loss;
pub mod nets;
pub mod search;
pub mod support;
pub mod trainer;

pub use config::NetConfig;
pub use nets::{Ablation, LatentState, Nets, PredictionOutput};
pub use support::Support;
