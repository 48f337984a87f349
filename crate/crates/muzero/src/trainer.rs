//! Self-play generation, schedules, opponent pool and the training loop.

use crate::agent::Player;
use crate::buffer::{BufferError, ReplayBuffer};
use crate::episode::{make_targets, terminal_rewards, Episode, Outcome, RewardMode, StepRecord, TargetConfig, TrainTarget};
use crate::loss::{batch_loss, LossBreakdown, LossWeights};
use crate::nets::{Ablation, NetError, Nets, Seats};
use crate::search::{simulation_count, PlanningModel, SearchConfig};
use crate::NetConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use skyjo_autodiff::{AdamW, AdamWConfig, Tape};
use skyjo_core::bots::bot_roster;
use skyjo_core::encoding::encode_observation;
use skyjo_core::{GameState, Rules};
use std::collections::VecDeque;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Buffer(#[from] BufferError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("metrics: {0}")]
    Csv(#[from] csv::Error),
    #[error("non-finite gradient norm at step {0}")]
    NonFinite(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetPreset {
    #[default]
    Full,
    Toy,
}

/// Either a preset name or a full network table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NetSpec {
    Preset(NetPreset),
    Custom(NetConfig),
}

impl NetSpec {
    pub fn resolve(self) -> NetConfig {
        match self {
            NetSpec::Preset(NetPreset::Full) => NetConfig::full(),
            NetSpec::Preset(NetPreset::Toy) => NetConfig::toy(),
            NetSpec::Custom(c) => c,
        }
    }
}

impl Default for NetSpec {
    fn default() -> NetSpec {
        NetSpec::Preset(NetPreset::Full)
    }
}

/// What to do when the buffer is below warmup at training time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Underflow {
    /// Skip the optimizer steps and keep generating episodes.
    #[default]
    Wait,
    Abort,
}

/// Training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub seed: u64,
    pub iterations: usize,
    pub self_play_episodes_per_iter: usize,
    pub train_steps_per_iter: usize,
    pub batch_size: usize,
    pub unroll_steps: usize,
    pub td_steps: usize,
    pub discount: f64,
    pub learning_rate: f32,
    pub weight_decay: f32,
    /// Global gradient-norm clip; 0 disables.
    pub grad_clip: f32,
    /// Fixed simulation count; the iteration schedule applies when absent.
    pub simulations: Option<usize>,
    pub dirichlet_alpha: f64,
    pub dirichlet_fraction: f64,
    /// `[start, end]` of the linear ramp.
    pub winner_loss_weight: [f32; 2],
    pub rank_loss_weight: [f32; 2],
    pub ramp_iterations: usize,
    /// Baseline variant: no auxiliary losses and no ego conditioning.
    pub baseline: bool,
    pub replay_capacity: usize,
    pub warmup_episodes: usize,
    pub phase_floor: f64,
    pub underflow: Underflow,
    pub pool_interval: usize,
    pub pool_max: usize,
    pub current_share: f64,
    pub curriculum_iterations: usize,
    pub temperature_moves: usize,
    /// `[first moves, later]`.
    pub temperature: [f64; 2],
    pub reward: RewardMode,
    pub time_penalty: f32,
    pub num_players: usize,
    pub max_steps: u32,
    pub net: NetSpec,
    pub checkpoint_dir: Option<PathBuf>,
    pub checkpoint_interval: usize,
    pub metrics_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            seed: 0,
            iterations: 2000,
            self_play_episodes_per_iter: 32,
            train_steps_per_iter: 96,
            batch_size: 64,
            unroll_steps: 8,
            td_steps: 10,
            discount: 0.997,
            learning_rate: 3e-4,
            weight_decay: 1e-4,
            grad_clip: 5.0,
            simulations: None,
            dirichlet_alpha: 0.3,
            dirichlet_fraction: 0.25,
            winner_loss_weight: [0.1, 0.5],
            rank_loss_weight: [0.1, 0.25],
            ramp_iterations: 500,
            baseline: false,
            replay_capacity: 10_000,
            warmup_episodes: 500,
            phase_floor: 0.1,
            underflow: Underflow::Wait,
            pool_interval: 25,
            pool_max: 20,
            current_share: 0.7,
            curriculum_iterations: 100,
            temperature_moves: 30,
            temperature: [1.0, 0.25],
            reward: RewardMode::ScoreDiff,
            time_penalty: 0.0,
            num_players: 2,
            max_steps: Rules::default().max_steps,
            net: NetSpec::default(),
            checkpoint_dir: None,
            checkpoint_interval: 25,
            metrics_path: None,
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<TrainConfig, TrainError> {
        let c: TrainConfig = toml::from_str(text).map_err(|e| TrainError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(2..=skyjo_core::MAX_PLAYERS).contains(&self.num_players) {
            return bad("num_players must be 2..=8");
        }
        if self.batch_size == 0 || self.unroll_steps == 0 || self.td_steps == 0 {
            return bad("batch_size, unroll_steps and td_steps must be positive");
        }
        if self.replay_capacity == 0 || self.pool_interval == 0 || self.pool_max == 0 {
            return bad("replay_capacity, pool_interval and pool_max must be positive");
        }
        if !(0.0..=1.0).contains(&self.current_share) || !(0.0..=1.0).contains(&self.phase_floor) {
            return bad("current_share and phase_floor must lie in [0, 1]");
        }
        self.net.resolve().validate().map_err(TrainError::Config)?;
        self.search(0).validate().map_err(|e| TrainError::Config(e.to_string()))
    }

    pub fn rules(&self) -> Rules {
        Rules { max_steps: self.max_steps, ..Rules::default() }
    }

    pub fn targets(&self) -> TargetConfig {
        TargetConfig { unroll_steps: self.unroll_steps, td_steps: self.td_steps, discount: self.discount }
    }

    pub fn ablation(&self) -> Ablation {
        if self.baseline {
            Ablation::EgoOff
        } else {
            Ablation::Full
        }
    }

    /// Self-play search settings at `iteration`.
    pub fn search(&self, iteration: usize) -> SearchConfig {
        SearchConfig {
            simulations: self.simulations.unwrap_or_else(|| simulation_count(iteration)),
            dirichlet_alpha: self.dirichlet_alpha,
            dirichlet_fraction: self.dirichlet_fraction,
            discount: self.discount,
            temperature: self.temperature[0],
            ..SearchConfig::default()
        }
    }

    /// Auxiliary loss weights at `iteration`: linear from start to end over
    /// `ramp_iterations`, flat afterwards, zero for the baseline.
    pub fn loss_weights(&self, iteration: usize) -> LossWeights {
        if self.baseline {
            return LossWeights::BASELINE;
        }
        let f = if self.ramp_iterations == 0 { 1.0 } else { (iteration as f32 / self.ramp_iterations as f32).min(1.0) };
        let lerp = |[a, b]: [f32; 2]| a + (b - a) * f;
        LossWeights { winner: lerp(self.winner_loss_weight), rank: lerp(self.rank_loss_weight) }
    }

    /// Self-play temperature for the `moves`-th decision of a game.
    pub fn temperature_at(&self, moves: usize) -> f64 {
        if moves < self.temperature_moves {
            self.temperature[0]
        } else {
            self.temperature[1]
        }
    }
}

/// Past snapshots of the learner, oldest first.
#[derive(Debug, Clone, Default)]
pub struct OpponentPool {
    max: usize,
    snapshots: VecDeque<(usize, Arc<Nets>)>,
}

/// Where an opponent comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolPick {
    Current,
    Snapshot(usize),
}

impl OpponentPool {
    pub fn new(max: usize) -> OpponentPool {
        OpponentPool { max, snapshots: VecDeque::new() }
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn push(&mut self, iteration: usize, nets: Arc<Nets>) {
        if self.snapshots.len() == self.max {
            self.snapshots.pop_front();
        }
        self.snapshots.push_back((iteration, nets));
    }

    pub fn iterations(&self) -> Vec<usize> {
        self.snapshots.iter().map(|(i, _)| *i).collect()
    }

    pub fn get(&self, index: usize) -> Option<&Arc<Nets>> {
        self.snapshots.get(index).map(|(_, n)| n)
    }

    /// Probability of each pick: `current_share` for the current net and the
    /// rest split evenly over snapshots (all to current when empty).
    pub fn probabilities(&self, current_share: f64) -> Vec<(PoolPick, f64)> {
        if self.snapshots.is_empty() {
            return vec![(PoolPick::Current, 1.0)];
        }
        let each = (1.0 - current_share) / self.snapshots.len() as f64;
        std::iter::once((PoolPick::Current, current_share))
            .chain((0..self.snapshots.len()).map(|i| (PoolPick::Snapshot(i), each)))
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, current_share: f64, rng: &mut R) -> PoolPick {
        if self.snapshots.is_empty() || rng.random::<f64>() < current_share {
            PoolPick::Current
        } else {
            PoolPick::Snapshot(rng.random_range(0..self.snapshots.len()))
        }
    }
}

/// Opponent for one seat: a uniformly drawn curriculum bot before
/// `curriculum_iterations`, then current or pooled nets.
pub fn choose_opponent<R: Rng + ?Sized>(
    config: &TrainConfig,
    iteration: usize,
    current: &Arc<Nets>,
    pool: &OpponentPool,
    rng: &mut R,
) -> Player {
    if iteration < config.curriculum_iterations {
        let roster = bot_roster();
        return Player::Bot(roster[rng.random_range(0..roster.len())]);
    }
    let nets = match pool.sample(config.current_share, rng) {
        PoolPick::Current => current.clone(),
        PoolPick::Snapshot(i) => pool.get(i).expect("sampled index exists").clone(),
    };
    Player::mcts(nets, config.search(iteration))
}

/// Ego value estimate of `state` without search.
pub fn value_estimate(nets: &Nets, state: &GameState, ego: usize) -> f32 {
    let h = nets.initial(&encode_observation(state, ego));
    let seats = Seats { ego, current: state.current_player(), num_players: state.num_players() };
    nets.evaluate(&h, seats, false).value
}

/// Plays one self-play game. The learner sits at `seed % num_players`.
pub fn self_play_episode(
    nets: &Arc<Nets>,
    pool: &OpponentPool,
    iteration: usize,
    seed: u64,
    config: &TrainConfig,
) -> Episode {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = config.num_players;
    let learner_seat = (seed % n as u64) as usize;
    let learner = Player::mcts(nets.clone(), config.search(iteration));
    let opponents: Vec<Option<Player>> = (0..n)
        .map(|p| (p != learner_seat).then(|| choose_opponent(config, iteration, nets, pool, &mut rng)))
        .collect();
    let rules = config.rules();
    let mut state = GameState::with_rules(n, seed, rules).expect("validated player count");
    let mut steps = Vec::new();
    while !state.is_over() {
        let actor = state.current_player();
        let player = opponents[actor].as_ref().unwrap_or(&learner);
        let temperature = config.temperature_at(steps.len());
        let d = player.decide(&state, Some(temperature), &mut rng);
        let values = (0..n)
            .map(|p| match d.root_value {
                Some(v) if p == actor => v,
                _ => value_estimate(nets, &state, p),
            })
            .collect();
        let phase = state.phase();
        let legal = state.legal_actions();
        state.step(d.action).expect("players choose legal actions");
        let mut rewards = vec![-config.time_penalty; n];
        if state.is_over() {
            for (r, t) in rewards.iter_mut().zip(terminal_rewards(state.cumulative_scores(), config.reward)) {
                *r += t;
            }
        }
        steps.push(StepRecord { actor, phase, legal, action: d.action, policy: d.policy, searched: d.searched, values, rewards });
    }
    let ranking = state.is_terminal().expect("loop ends on a finished game");
    Episode {
        seed,
        num_players: n,
        rules,
        learner: Some(learner_seat),
        steps,
        outcome: Outcome::from(&ranking),
        truncated: state.is_truncated(),
    }
}

/// One row of the metrics CSV.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricsRow {
    pub iteration: usize,
    pub episodes: u64,
    pub buffer_episodes: usize,
    pub train_steps: usize,
    pub total_loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub reward_loss: f64,
    pub winner_loss: Option<f64>,
    pub rank_loss: Option<f64>,
    pub alpha: f64,
    pub beta: f64,
    /// `weight_decay · ‖θ‖²` over decayed parameters (applied by the optimizer).
    pub weight_decay_term: f64,
    pub grad_norm: f64,
    pub policy_entropy: f64,
    pub simulations: usize,
    pub mean_episode_steps: f64,
    pub learner_mean_reward: f64,
    pub truncated_episodes: usize,
    pub elapsed_s: f64,
}

pub const METRICS_COLUMNS: [&str; 20] = [
    "iteration",
    "episodes",
    "buffer_episodes",
    "train_steps",
    "total_loss",
    "policy_loss",
    "value_loss",
    "reward_loss",
    "winner_loss",
    "rank_loss",
    "alpha",
    "beta",
    "weight_decay_term",
    "grad_norm",
    "policy_entropy",
    "simulations",
    "mean_episode_steps",
    "learner_mean_reward",
    "truncated_episodes",
    "elapsed_s",
];

/// Result of one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub loss: LossBreakdown,
    pub grad_norm: f32,
}

pub struct Trainer {
    pub config: TrainConfig,
    pub nets: Nets,
    pub optimizer: AdamW,
    pub buffer: ReplayBuffer,
    pub pool: OpponentPool,
    /// Completed iterations.
    pub iteration: usize,
    pub episodes_played: u64,
    rng: ChaCha8Rng,
    metrics: Option<csv::Writer<BufWriter<File>>>,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Trainer, TrainError> {
        config.validate()?;
        let mut nets = Nets::new(config.net.resolve(), config.seed);
        nets.set_ablation(config.ablation());
        Trainer::with_nets(config, nets)
    }

    pub fn with_nets(config: TrainConfig, nets: Nets) -> Result<Trainer, TrainError> {
        config.validate()?;
        let optimizer = AdamW::new(
            AdamWConfig {
                lr: config.learning_rate,
                weight_decay: config.weight_decay,
                clip_norm: (config.grad_clip > 0.0).then_some(config.grad_clip),
                ..AdamWConfig::default()
            },
            nets.store(),
        );
        let metrics = match &config.metrics_path {
            Some(p) => {
                if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir)?;
                }
                Some(csv::Writer::from_writer(BufWriter::new(File::create(p)?)))
            }
            None => None,
        };
        Ok(Trainer {
            buffer: ReplayBuffer::new(config.replay_capacity),
            pool: OpponentPool::new(config.pool_max),
            rng: ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_7a11),
            config,
            nets,
            optimizer,
            iteration: 0,
            episodes_played: 0,
            metrics,
        })
    }

    /// One optimizer step on a fixed batch.
    pub fn train_step(&mut self, batch: &[TrainTarget], weights: LossWeights) -> Result<StepReport, TrainError> {
        let grads = {
            let mut t = Tape::new(self.nets.store());
            let (loss, breakdown) = batch_loss(&self.nets, &mut t, batch, weights);
            let grads = t.backward(loss).map_err(|_| TrainError::NonFinite(self.optimizer.steps()))?;
            (grads, breakdown)
        };
        let stats = self.optimizer.step(self.nets.store_mut(), &grads.0);
        if !stats.grad_norm.is_finite() {
            return Err(TrainError::NonFinite(self.optimizer.steps()));
        }
        Ok(StepReport { loss: grads.1, grad_norm: stats.grad_norm })
    }

    /// Draws a stratified batch of targets from the buffer.
    pub fn sample_batch(&mut self) -> Result<Vec<TrainTarget>, TrainError> {
        let refs =
            self.buffer.sample(self.config.batch_size, self.config.phase_floor, self.config.warmup_episodes, &mut self.rng)?;
        let tc = self.config.targets();
        Ok(refs
            .iter()
            .map(|r| make_targets(self.buffer.get(r.episode).expect("sampled episode is live"), r.step, r.ego, &tc))
            .collect())
    }

    pub fn weight_decay_term(&self) -> f64 {
        let sq: f64 = self.nets.store().params().iter().filter(|p| p.decay).map(|p| p.value.sq_norm()).sum();
        self.config.weight_decay as f64 * sq
    }

    pub fn train_iteration(&mut self) -> Result<MetricsRow, TrainError> {
        let start = Instant::now();
        let it = self.iteration;
        let snapshot = Arc::new(self.nets.clone());
        let (mut total_steps, mut learner_reward, mut truncated) = (0usize, 0.0f64, 0usize);
        let eps = self.config.self_play_episodes_per_iter;
        for _ in 0..eps {
            let seed = self.rng.random::<u64>();
            let ep = self_play_episode(&snapshot, &self.pool, it, seed, &self.config);
            total_steps += ep.len();
            truncated += ep.truncated as usize;
            if let Some(l) = ep.learner {
                learner_reward += ep.steps.iter().map(|s| s.rewards[l] as f64).sum::<f64>();
            }
            self.buffer.push(ep);
            self.episodes_played += 1;
        }

        let mut row = MetricsRow {
            iteration: it,
            episodes: self.episodes_played,
            simulations: self.config.search(it).simulations,
            mean_episode_steps: total_steps as f64 / eps.max(1) as f64,
            learner_mean_reward: learner_reward / eps.max(1) as f64,
            truncated_episodes: truncated,
            ..MetricsRow::default()
        };
        let weights = self.config.loss_weights(it);
        row.alpha = weights.winner as f64;
        row.beta = weights.rank as f64;
        let ready = self.buffer.len() >= self.config.warmup_episodes.max(1);
        if !ready && self.config.underflow == Underflow::Abort {
            return Err(BufferError::Underflow { have: self.buffer.len(), need: self.config.warmup_episodes }.into());
        }
        if ready {
            let (mut winner, mut rank) = (None::<f64>, None::<f64>);
            for _ in 0..self.config.train_steps_per_iter {
                let batch = self.sample_batch()?;
                let r = self.train_step(&batch, weights)?;
                row.train_steps += 1;
                row.total_loss += r.loss.total;
                row.policy_loss += r.loss.policy;
                row.value_loss += r.loss.value;
                row.reward_loss += r.loss.reward;
                row.policy_entropy += r.loss.policy_entropy;
                row.grad_norm += r.grad_norm as f64;
                if let Some(w) = r.loss.winner {
                    *winner.get_or_insert(0.0) += w;
                }
                if let Some(k) = r.loss.rank {
                    *rank.get_or_insert(0.0) += k;
                }
            }
            let s = row.train_steps.max(1) as f64;
            for v in [
                &mut row.total_loss,
                &mut row.policy_loss,
                &mut row.value_loss,
                &mut row.reward_loss,
                &mut row.policy_entropy,
                &mut row.grad_norm,
            ] {
                *v /= s;
            }
            row.winner_loss = winner.map(|w| w / s);
            row.rank_loss = rank.map(|k| k / s);
        }
        row.buffer_episodes = self.buffer.len();
        row.weight_decay_term = self.weight_decay_term();
        self.iteration += 1;
        if self.iteration.is_multiple_of(self.config.pool_interval) {
            self.pool.push(self.iteration, Arc::new(self.nets.clone()));
        }
        if let Some(dir) = self.config.checkpoint_dir.clone() {
            if self.iteration.is_multiple_of(self.config.checkpoint_interval.max(1)) {
                self.save_checkpoint(&dir)?;
            }
        }
        row.elapsed_s = start.elapsed().as_secs_f64();
        if let Some(w) = self.metrics.as_mut() {
            w.serialize(&row)?;
            w.flush()?;
        }
        log::info!(
            "iteration {} loss {:.4} grad {:.3} buffer {}",
            row.iteration,
            row.total_loss,
            row.grad_norm,
            row.buffer_episodes
        );
        Ok(row)
    }

    /// Runs the remaining configured iterations.
    pub fn run(&mut self) -> Result<Vec<MetricsRow>, TrainError> {
        let mut rows = Vec::new();
        while self.iteration < self.config.iterations {
            rows.push(self.train_iteration()?);
        }
        Ok(rows)
    }

    /// Writes `dir/iter_N/` with the parameters and `train.toml`.
    pub fn save_checkpoint(&self, dir: &Path) -> Result<PathBuf, TrainError> {
        let path = checkpoint_path(dir, self.iteration);
        self.nets.save(&path)?;
        std::fs::write(path.join("train.toml"), self.config.to_toml())?;
        Ok(path)
    }
}

pub fn checkpoint_path(dir: &Path, iteration: usize) -> PathBuf {
    dir.join(format!("iter_{iteration}"))
}

/// The highest-numbered `iter_N` checkpoint under `dir`.
pub fn latest_checkpoint(dir: &Path) -> Option<PathBuf> {
    let mut best: Option<(usize, PathBuf)> = None;
    for entry in std::fs::read_dir(dir).ok()?.flatten() {
        let name = entry.file_name();
        let Some(n) = name.to_str().and_then(|s| s.strip_prefix("iter_")).and_then(|s| s.parse::<usize>().ok()) else {
            continue;
        };
        if entry.path().join("manifest.json").exists() && best.as_ref().is_none_or(|(b, _)| n > *b) {
            best = Some((n, entry.path()));
        }
    }
    best.map(|(_, p)| p)
}
