#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skyjo_core::{Action, GameState, Ranking, Rules, ACTION_COUNT};
use skyjo_muzero::episode::{Episode, Outcome, StepRecord};

/// A random-play episode of at most `len` steps with rewards and values from
/// the given closures `(step, player)`.
pub fn synthetic(
    seed: u64,
    num_players: usize,
    len: usize,
    reward: impl Fn(usize, usize) -> f32,
    value: impl Fn(usize, usize) -> f32,
) -> Episode {
    let rules = Rules::default();
    let mut s = GameState::with_rules(num_players, seed, rules).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut steps = Vec::new();
    while steps.len() < len && !s.is_over() {
        let legal = s.legal_actions();
        let acts: Vec<Action> = legal.iter().collect();
        let a = acts[r.random_range(0..acts.len())];
        let mut policy = [0.0; ACTION_COUNT];
        for &x in &acts {
            policy[x.index()] = 1.0 / acts.len() as f32;
        }
        let t = steps.len();
        steps.push(StepRecord {
            actor: s.current_player(),
            phase: s.phase(),
            legal,
            action: a,
            policy,
            searched: true,
            values: (0..num_players).map(|p| value(t, p)).collect(),
            rewards: (0..num_players).map(|p| reward(t, p)).collect(),
        });
        s.step(a).unwrap();
    }
    let ranking = Ranking::from_scores(s.cumulative_scores());
    Episode {
        seed,
        num_players,
        rules,
        learner: Some(0),
        steps,
        outcome: Outcome::from(&ranking),
        truncated: false,
    }
}

pub fn random_episode(seed: u64, num_players: usize, len: usize) -> Episode {
    synthetic(seed, num_players, len, |_, _| 0.0, |_, _| 0.0)
}
