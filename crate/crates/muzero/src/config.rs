use serde::{Deserialize, Serialize};
use skyjo_core::encoding::sequence_len;
use skyjo_core::{ACTION_COUNT, MAX_PLAYERS};

/// Network shape. [`NetConfig::full`] is the full-size model; [`NetConfig::toy`]
/// keeps the architecture and shrinks the widths for CPU tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub layers: usize,
    pub heads: usize,
    pub d_model: usize,
    pub ff_hidden: usize,
    pub latent_dim: usize,
    pub action_count: usize,
    /// Value and reward atoms run over the integers `-support..=support`.
    pub value_support: i32,
    pub reward_support: i32,
    pub max_players: usize,
    /// Width of the two hidden layers of every prediction head.
    pub head_hidden: usize,
    /// Width of the two hidden layers of the dynamics MLP.
    pub dynamics_hidden: usize,
    pub action_embed: usize,
}

impl NetConfig {
    pub fn full() -> NetConfig {
        NetConfig {
            layers: 6,
            heads: 8,
            d_model: 256,
            ff_hidden: 1024,
            latent_dim: 512,
            action_count: ACTION_COUNT,
            value_support: 200,
            reward_support: 200,
            max_players: MAX_PLAYERS,
            head_hidden: 256,
            dynamics_hidden: 512,
            action_embed: 256,
        }
    }

    pub fn toy() -> NetConfig {
        NetConfig {
            layers: 2,
            heads: 4,
            d_model: 32,
            ff_hidden: 64,
            latent_dim: 64,
            head_hidden: 64,
            dynamics_hidden: 64,
            action_embed: 32,
            ..NetConfig::full()
        }
    }

    /// Tokens per sequence including CLS, at the largest table size.
    pub fn max_len(&self) -> usize {
        sequence_len(self.max_players) + 1
    }

    pub fn value_atoms(&self) -> usize {
        (2 * self.value_support + 1) as usize
    }

    pub fn reward_atoms(&self) -> usize {
        (2 * self.reward_support + 1) as usize
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.latent_dim == 0 || self.d_model == 0 || self.layers == 0 {
            return Err("widths and depth must be positive".into());
        }
        if self.heads == 0 || !self.d_model.is_multiple_of(self.heads) {
            return Err(format!("d_model {} not divisible by {} heads", self.d_model, self.heads));
        }
        if self.value_support <= 0 || self.reward_support <= 0 {
            return Err("supports must be positive".into());
        }
        if self.action_count != ACTION_COUNT {
            return Err(format!("action_count must be {ACTION_COUNT}"));
        }
        if !(2..=MAX_PLAYERS).contains(&self.max_players) {
            return Err(format!("max_players must be in 2..={MAX_PLAYERS}"));
        }
        Ok(())
    }
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig::full()
    }
}
