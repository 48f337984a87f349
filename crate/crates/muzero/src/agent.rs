//! Seat occupants: a search agent over a nets snapshot, or a scripted bot.

use crate::nets::Nets;
use crate::search::{run_mcts, select_action, SearchConfig};
use rand::Rng;
use skyjo_core::bots::BotPolicy;
use skyjo_core::{Action, GameState, Rules, ACTION_COUNT};
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct MctsPlayer {
    pub nets: Arc<Nets>,
    pub search: SearchConfig,
}

#[derive(Debug, Clone)]
pub enum Player {
    Mcts(MctsPlayer),
    Bot(BotPolicy),
}

/// A chosen action plus what the search saw.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub action: Action,
    /// Visit shares, or a one-hot on the action for bots.
    pub policy: [f32; ACTION_COUNT],
    pub searched: bool,
    pub root_value: Option<f32>,
    pub win_prob: Option<f32>,
}

impl Player {
    pub fn mcts(nets: Arc<Nets>, search: SearchConfig) -> Player {
        Player::Mcts(MctsPlayer { nets, search })
    }

    pub fn name(&self) -> String {
        match self {
            Player::Mcts(m) => format!("mcts-{}", m.search.simulations),
            Player::Bot(b) => b.name().to_string(),
        }
    }

    /// Acts for the current player. `temperature` overrides the configured one.
    pub fn decide<R: Rng + ?Sized>(&self, state: &GameState, temperature: Option<f64>, rng: &mut R) -> Decision {
        match self {
            Player::Bot(b) => {
                let action = b.act(state, rng);
                let mut policy = [0.0; ACTION_COUNT];
                policy[action.index()] = 1.0;
                Decision { action, policy, searched: false, root_value: None, win_prob: None }
            }
            Player::Mcts(m) => {
                let ego = state.current_player();
                let out = run_mcts(m.nets.as_ref(), state, ego, &m.search, rng).expect("search on a live state");
                let t = temperature.unwrap_or(m.search.temperature);
                let action = select_action(&out.visit_distribution, t, rng);
                let mut policy = [0.0; ACTION_COUNT];
                for (p, &v) in policy.iter_mut().zip(&out.visit_distribution) {
                    *p = v as f32;
                }
                Decision {
                    action,
                    policy,
                    searched: true,
                    root_value: Some(out.root_value as f32),
                    win_prob: out.root_win_prob,
                }
            }
        }
    }
}

/// Plays one game with `seats[p]` acting for player `p`.
pub fn play_match<R: Rng + ?Sized>(seats: &[&Player], seed: u64, rules: Rules, rng: &mut R) -> GameState {
    let mut state = GameState::with_rules(seats.len(), seed, rules).expect("valid player count");
    while !state.is_over() {
        let d = seats[state.current_player()].decide(&state, None, rng);
        state.step(d.action).expect("players choose legal actions");
    }
    state
}
