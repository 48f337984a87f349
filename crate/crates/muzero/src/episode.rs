//! Self-play episodes and training targets.
//!
//! Episodes keep the seed, rules and action sequence rather than encoded
//! observations; the state at any step is rebuilt by replaying the engine,
//! and observations are encoded per ego when a target is built.

use crate::nets::{relative_seat, Seats};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use skyjo_core::encoding::{encode_observation, TokenSequence};
use skyjo_core::replay::GameRecord;
use skyjo_core::{Action, ActionMask, GameState, Phase, Ranking, Rules, ACTION_COUNT};

/// Reward paid at game end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardMode {
    /// Best opponent cumulative score minus own, clamped to ±200.
    #[default]
    ScoreDiff,
    /// +1 for every winner (ties included), −1 otherwise.
    WinLoss,
}

pub const REWARD_CLAMP: f32 = 200.0;

/// Per-player terminal reward for final cumulative scores.
pub fn terminal_rewards(scores: &[i32], mode: RewardMode) -> Vec<f32> {
    let ranking = Ranking::from_scores(scores);
    (0..scores.len())
        .map(|p| match mode {
            RewardMode::ScoreDiff => {
                let best = (0..scores.len()).filter(|&o| o != p).map(|o| scores[o]).min().unwrap_or(scores[p]);
                ((best - scores[p]) as f32).clamp(-REWARD_CLAMP, REWARD_CLAMP)
            }
            RewardMode::WinLoss => {
                if ranking.ranks[p] == 1 {
                    1.0
                } else {
                    -1.0
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub actor: usize,
    pub phase: Phase,
    pub legal: ActionMask,
    pub action: Action,
    /// Search visit shares, or a one-hot on the action for steps taken without search.
    pub policy: [f32; ACTION_COUNT],
    pub searched: bool,
    /// Value estimate at this step from every player's point of view.
    pub values: Vec<f32>,
    /// Reward to every player for taking this step.
    pub rewards: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub winners: Vec<usize>,
    /// 1-based, ties share the better rank.
    pub ranks: Vec<usize>,
    pub scores: Vec<i32>,
}

impl From<&Ranking> for Outcome {
    fn from(r: &Ranking) -> Outcome {
        Outcome { winners: r.winners(), ranks: r.ranks.clone(), scores: r.scores.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub seed: u64,
    pub num_players: usize,
    pub rules: Rules,
    /// Seat played by the learning agent, if any.
    pub learner: Option<usize>,
    pub steps: Vec<StepRecord>,
    pub outcome: Outcome,
    pub truncated: bool,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn record(&self) -> GameRecord {
        GameRecord {
            num_players: self.num_players as u8,
            rules: self.rules,
            seed: self.seed,
            actions: self.steps.iter().map(|s| s.action).collect(),
        }
    }

    /// Engine state before step `t` (`t == len()` gives the final state).
    pub fn state_at(&self, t: usize) -> GameState {
        assert!(t <= self.steps.len(), "step {t} past episode of {}", self.steps.len());
        let mut s = GameState::with_rules(self.num_players, self.seed, self.rules).expect("episode player count is valid");
        for step in &self.steps[..t] {
            s.step(step.action).expect("recorded actions replay");
        }
        s
    }

    /// Hex SHA-256 over the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("episode serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn phase_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for s in &self.steps {
            c[s.phase.index()] += 1;
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TargetConfig {
    pub unroll_steps: usize,
    pub td_steps: usize,
    pub discount: f64,
}

impl Default for TargetConfig {
    fn default() -> TargetConfig {
        TargetConfig { unroll_steps: 8, td_steps: 10, discount: 0.997 }
    }
}

/// `Σ_{i<n} γ^i r_{t+i} + γ^n v_{t+n}` for `ego`, truncated at the episode end.
/// The reward of step `t` belongs to the value of step `t`; past the end the
/// value is 0.
pub fn value_target(ep: &Episode, t: usize, ego: usize, cfg: &TargetConfig) -> f64 {
    let len = ep.steps.len();
    let mut g = 0.0f64;
    let mut disc = 1.0f64;
    for i in 0..cfg.td_steps {
        let Some(step) = ep.steps.get(t + i) else { return g };
        g += disc * step.rewards[ego] as f64;
        disc *= cfg.discount;
    }
    if t + cfg.td_steps < len {
        g += disc * ep.steps[t + cfg.td_steps].values[ego] as f64;
    }
    g
}

/// One unrolled training example from `ego`'s point of view.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainTarget {
    pub observation: TokenSequence,
    pub ego: usize,
    pub num_players: usize,
    pub phase: Phase,
    /// `K` actions; padding past the end repeats a fixed action.
    pub actions: Vec<Action>,
    /// `K + 1` seat contexts for conditioning.
    pub seats: Vec<Seats>,
    /// `K + 1` rows of policy targets.
    pub policy: Vec<[f32; ACTION_COUNT]>,
    pub policy_mask: Vec<ActionMask>,
    /// 1 inside the episode, 0 on absorbing padding.
    pub policy_weight: Vec<f32>,
    pub value: Vec<f32>,
    /// `K` reward targets.
    pub reward: Vec<f32>,
    /// Winner distribution over seats in ego-relative order (ties split).
    pub winner: Vec<f32>,
    /// 0-based rank per seat in ego-relative order.
    pub rank: Vec<usize>,
}

pub fn make_targets(ep: &Episode, t: usize, ego: usize, cfg: &TargetConfig) -> TrainTarget {
    assert!(t < ep.steps.len(), "target step {t} outside episode of {}", ep.steps.len());
    let n = ep.num_players;
    assert!(ego < n, "ego {ego} out of range");
    let len = ep.steps.len();
    let k = cfg.unroll_steps;
    let observation = encode_observation(&ep.state_at(t), ego);

    let mut actions = Vec::with_capacity(k);
    let mut seats = Vec::with_capacity(k + 1);
    let mut policy = Vec::with_capacity(k + 1);
    let mut policy_mask = Vec::with_capacity(k + 1);
    let mut policy_weight = Vec::with_capacity(k + 1);
    let mut value = Vec::with_capacity(k + 1);
    let mut reward = Vec::with_capacity(k);
    let last_actor = ep.steps[len - 1].actor;
    for i in 0..=k {
        let s = t + i;
        if let Some(step) = ep.steps.get(s) {
            seats.push(Seats { ego, current: step.actor, num_players: n });
            policy.push(step.policy);
            policy_mask.push(step.legal);
            policy_weight.push(1.0);
            value.push(value_target(ep, s, ego, cfg) as f32);
            if i < k {
                actions.push(step.action);
                reward.push(step.rewards[ego]);
            }
        } else {
            let mask = ActionMask::from_bits(u16::MAX);
            seats.push(Seats { ego, current: last_actor, num_players: n });
            policy.push([1.0 / ACTION_COUNT as f32; ACTION_COUNT]);
            policy_mask.push(mask);
            policy_weight.push(0.0);
            value.push(0.0);
            if i < k {
                actions.push(Action::DRAW_DECK);
                reward.push(0.0);
            }
        }
    }

    let mut winner = vec![0.0; n];
    let share = 1.0 / ep.outcome.winners.len().max(1) as f32;
    for &w in &ep.outcome.winners {
        winner[relative_seat(w, ego, n)] = share;
    }
    let mut rank = vec![0; n];
    for (p, &r) in ep.outcome.ranks.iter().enumerate() {
        rank[relative_seat(p, ego, n)] = r - 1;
    }
    TrainTarget {
        observation,
        ego,
        num_players: n,
        phase: ep.steps[t].phase,
        actions,
        seats,
        policy,
        policy_mask,
        policy_weight,
        value,
        reward,
        winner,
        rank,
    }
}

/// Every player's target stream for step `t`.
pub fn target_streams(ep: &Episode, t: usize, cfg: &TargetConfig) -> Vec<TrainTarget> {
    (0..ep.num_players).map(|ego| make_targets(ep, t, ego, cfg)).collect()
}
