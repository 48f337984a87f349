//! Skyjo rules engine with decision-granularity actions, the tokenized
//! partial observation, heuristic opponents and the replay file format.

pub mod bots;
pub mod card;
pub mod encoding;
pub mod engine;
pub mod replay;
pub mod rng;

#[cfg(any(test, feature = "fixtures"))]
pub mod fixtures;

pub use card::{Card, Cell, Grid, Position};
pub use engine::{
    Action, ActionMask, EngineError, Event, GameState, Phase, Ranking, RoundResult, Rules, Source, StepEvents,
    ACTION_COUNT, MAX_PLAYERS, MIN_PLAYERS,
};
