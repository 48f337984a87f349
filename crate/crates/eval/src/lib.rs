//! Evaluation: head-to-head and bot matches, win-rate statistics and
//! linear probes on frozen latents.

pub mod matches;
pub mod probe;
pub mod stats;

pub use matches::{ablation_h2h, bot_eval, head_to_head, BotEvalReport, MatchReport};
pub use probe::{linear_probe, probe_suite, ProbeError, ProbeReport};
pub use stats::{elo_delta, wilson_interval, z_test, StatsError};
