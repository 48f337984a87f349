//! Two-player match protocols.

use crate::stats::{elo_delta, wilson_interval, z_test, Z95};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use skyjo_core::bots::BotPolicy;
use skyjo_core::Rules;
use skyjo_muzero::agent::{play_match, Player};
use skyjo_muzero::nets::{Ablation, Nets};
use skyjo_muzero::search::SearchConfig;
use std::fmt;
use std::sync::Arc;

/// One finished game from agent A's side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameResult {
    pub seed: u64,
    /// Seat of agent A (0 or 1).
    pub seat_a: usize,
    pub score_a: i32,
    pub score_b: i32,
    pub steps: u32,
    pub truncated: bool,
}

impl GameResult {
    /// +1 when A wins, −1 when B wins, 0 on equal scores.
    pub fn outcome(&self) -> i32 {
        (self.score_b - self.score_a).signum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub agent_a: String,
    pub agent_b: String,
    pub games: u64,
    pub wins_a: u64,
    pub wins_b: u64,
    pub draws: u64,
    /// `wins_a / games`; draws count in the denominator only.
    pub win_rate_a: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub z: f64,
    #[serde(with = "crate::stats::sentinel")]
    pub elo_delta: f64,
    pub truncation_rate: f64,
    pub mean_episode_length: f64,
    /// Mean of `score_b − score_a`; positive favours A.
    pub mean_score_diff: f64,
    /// Games with agent A in seat 0.
    pub a_first: u64,
    pub results: Vec<GameResult>,
}

impl MatchReport {
    pub fn from_results(agent_a: &str, agent_b: &str, results: Vec<GameResult>) -> MatchReport {
        let games = results.len() as u64;
        let count = |o: i32| results.iter().filter(|r| r.outcome() == o).count() as u64;
        let (wins_a, wins_b, draws) = (count(1), count(-1), count(0));
        let n = games.max(1) as f64;
        let (wilson_low, wilson_high) = wilson_interval(wins_a, games, Z95).unwrap_or((0.0, 1.0));
        MatchReport {
            agent_a: agent_a.to_string(),
            agent_b: agent_b.to_string(),
            games,
            wins_a,
            wins_b,
            draws,
            win_rate_a: wins_a as f64 / n,
            wilson_low,
            wilson_high,
            z: z_test(wins_a, games).unwrap_or(0.0),
            elo_delta: if games == 0 { 0.0 } else { elo_delta(wins_a as f64 / n) },
            truncation_rate: results.iter().filter(|r| r.truncated).count() as f64 / n,
            mean_episode_length: results.iter().map(|r| r.steps as f64).sum::<f64>() / n,
            mean_score_diff: results.iter().map(|r| (r.score_b - r.score_a) as f64).sum::<f64>() / n,
            a_first: results.iter().filter(|r| r.seat_a == 0).count() as u64,
            results,
        }
    }

    /// Merges several reports that share agent A.
    pub fn combine(agent_a: &str, agent_b: &str, reports: &[MatchReport]) -> MatchReport {
        let results = reports.iter().flat_map(|r| r.results.iter().cloned()).collect();
        MatchReport::from_results(agent_a, agent_b, results)
    }
}

impl fmt::Display for MatchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} vs {}: {} games, {} wins, {} losses, {} draws, WR {:.1}% [{:.1}-{:.1}], dElo {:+.0}, z {:.2}, truncated {:.1}%, mean length {:.1}",
            self.agent_a,
            self.agent_b,
            self.games,
            self.wins_a,
            self.wins_b,
            self.draws,
            100.0 * self.win_rate_a,
            100.0 * self.wilson_low,
            100.0 * self.wilson_high,
            self.elo_delta,
            self.z,
            100.0 * self.truncation_rate,
            self.mean_episode_length,
        )
    }
}

/// `count` game seeds drawn from `seed`.
pub fn seed_list(seed: u64, count: usize) -> Vec<u64> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| r.random()).collect()
}

/// Plays game `index` with A in seat `index % 2`.
fn play_one(a: &Player, b: &Player, index: usize, seed: u64, rules: Rules) -> GameResult {
    let seat_a = index % 2;
    let seats: [&Player; 2] = if seat_a == 0 { [a, b] } else { [b, a] };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let end = play_match(&seats, seed, rules, &mut rng);
    let scores = end.cumulative_scores();
    GameResult {
        seed,
        seat_a,
        score_a: scores[seat_a],
        score_b: scores[1 - seat_a],
        steps: end.step_count(),
        truncated: end.is_truncated(),
    }
}

/// Runs every `(index, seed)` game, spread over `threads` workers; results
/// keep seed order so the report does not depend on scheduling.
fn play_all(a: &Player, b: &Player, seeds: &[u64], rules: Rules, threads: usize) -> Vec<GameResult> {
    let threads = threads.clamp(1, seeds.len().max(1));
    if threads == 1 {
        return seeds.iter().enumerate().map(|(i, &s)| play_one(a, b, i, s, rules)).collect();
    }
    let mut out: Vec<Option<GameResult>> = vec![None; seeds.len()];
    std::thread::scope(|scope| {
        let chunks: Vec<_> = (0..threads)
            .map(|w| {
                scope.spawn(move || {
                    (w..seeds.len()).step_by(threads).map(|i| (i, play_one(a, b, i, seeds[i], rules))).collect::<Vec<_>>()
                })
            })
            .collect();
        for c in chunks {
            for (i, r) in c.join().expect("match worker panicked") {
                out[i] = Some(r);
            }
        }
    });
    out.into_iter().map(|r| r.expect("every game played")).collect()
}

pub fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Plays one game per seed, alternating A between seats 0 and 1. The lower
/// cumulative score wins, including truncated games; equal scores draw.
pub fn head_to_head(a: &Player, b: &Player, seeds: &[u64], rules: Rules, threads: usize) -> MatchReport {
    MatchReport::from_results(&a.name(), &b.name(), play_all(a, b, seeds, rules, threads))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BotEvalReport {
    pub per_bot: Vec<MatchReport>,
    pub aggregate: MatchReport,
}

impl fmt::Display for BotEvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.per_bot {
            writeln!(f, "{r}")?;
        }
        write!(f, "{}", self.aggregate)
    }
}

/// `agent` against each roster bot for `games_per_bot` alternating-seat games.
pub fn bot_eval(
    agent: &Player,
    roster: &[BotPolicy],
    games_per_bot: usize,
    seed: u64,
    rules: Rules,
    threads: usize,
) -> BotEvalReport {
    let per_bot: Vec<MatchReport> = roster
        .iter()
        .enumerate()
        .map(|(i, bot)| {
            let seeds = seed_list(seed.wrapping_add(i as u64), games_per_bot);
            head_to_head(agent, &Player::Bot(*bot), &seeds, rules, threads)
        })
        .collect();
    let aggregate = MatchReport::combine(&agent.name(), "roster", &per_bot);
    BotEvalReport { per_bot, aggregate }
}

/// The same weights with and without ego conditioning, as agents A and B.
pub fn ablation_h2h(nets: &Nets, search: SearchConfig, seeds: &[u64], rules: Rules, threads: usize) -> MatchReport {
    let mut full = nets.clone();
    full.set_ablation(Ablation::Full);
    let mut off = nets.clone();
    off.set_ablation(Ablation::EgoOff);
    let a = Player::mcts(Arc::new(full), search.clone());
    let b = Player::mcts(Arc::new(off), search);
    MatchReport::from_results("full", "ego-off", play_all(&a, &b, seeds, rules, threads))
}
