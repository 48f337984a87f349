mod common;

use common::synthetic;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skyjo_autodiff::Tape;
use skyjo_core::Ranking;
use skyjo_muzero::episode::{make_targets, TargetConfig, TrainTarget};
use skyjo_muzero::loss::{batch_loss, LossWeights};
use skyjo_muzero::nets::{relative_seat, Nets};
use skyjo_muzero::trainer::*;
use skyjo_muzero::NetConfig;
use std::sync::Arc;

fn toy(seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        net: NetSpec::Preset(NetPreset::Toy),
        simulations: Some(4),
        self_play_episodes_per_iter: 2,
        train_steps_per_iter: 2,
        batch_size: 16,
        warmup_episodes: 2,
        replay_capacity: 100,
        ..TrainConfig::default()
    }
}

fn close(a: f32, b: f32) -> bool {
    (a - b).abs() < 1e-6
}

#[test]
fn loss_weight_ramp() {
    let c = TrainConfig::default();
    let w0 = c.loss_weights(0);
    assert!(close(w0.winner, 0.1) && close(w0.rank, 0.1));
    let w = c.loss_weights(250);
    assert!(close(w.winner, 0.3) && close(w.rank, 0.175));
    let w500 = c.loss_weights(500);
    assert!(close(w500.winner, 0.5) && close(w500.rank, 0.25));
    assert_eq!(c.loss_weights(1000), w500);
    let base = TrainConfig { baseline: true, ..TrainConfig::default() };
    for it in [0, 250, 500, 5000] {
        assert_eq!(base.loss_weights(it), LossWeights::BASELINE);
    }
    assert_eq!(base.ablation(), skyjo_muzero::nets::Ablation::EgoOff);
}

#[test]
fn self_play_temperature_schedule() {
    let c = TrainConfig::default();
    assert_eq!(c.temperature_at(0), 1.0);
    assert_eq!(c.temperature_at(29), 1.0);
    assert_eq!(c.temperature_at(30), 0.25);
    assert_eq!(c.temperature_at(500), 0.25);
}

#[test]
fn search_follows_simulation_schedule() {
    let c = TrainConfig::default();
    assert_eq!(c.search(0).simulations, skyjo_muzero::search::simulation_count(0));
    assert_eq!(c.search(900).simulations, skyjo_muzero::search::simulation_count(900));
    assert_eq!(toy(0).search(900).simulations, 4);
}

#[test]
fn pool_mix_and_eviction() {
    let nets = Arc::new(Nets::new(NetConfig::toy(), 0));
    let mut pool = OpponentPool::new(20);
    assert_eq!(pool.probabilities(0.7), vec![(PoolPick::Current, 1.0)]);
    for it in 1..=25 {
        pool.push(it * 25, nets.clone());
        let total: f64 = pool.probabilities(0.7).iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
    assert_eq!(pool.len(), 20);
    assert_eq!(pool.iterations(), (6..=25).map(|i| i * 25).collect::<Vec<_>>());

    let mut r = ChaCha8Rng::seed_from_u64(4);
    let n = 20_000;
    let mut current = 0;
    let mut seen = [0usize; 20];
    for _ in 0..n {
        match pool.sample(0.7, &mut r) {
            PoolPick::Current => current += 1,
            PoolPick::Snapshot(i) => seen[i] += 1,
        }
    }
    let share = current as f64 / n as f64;
    let sd = (0.7 * 0.3 / n as f64).sqrt();
    assert!((share - 0.7).abs() < 4.0 * sd, "{share}");
    assert!(seen.iter().all(|&c| c > 0));
}

#[test]
fn curriculum_then_pool_opponents() {
    let c = TrainConfig { simulations: Some(4), ..TrainConfig::default() };
    let nets = Arc::new(Nets::new(NetConfig::toy(), 0));
    let pool = OpponentPool::new(20);
    let mut r = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..20 {
        assert!(matches!(choose_opponent(&c, 99, &nets, &pool, &mut r), skyjo_muzero::agent::Player::Bot(_)));
        assert!(matches!(choose_opponent(&c, 100, &nets, &pool, &mut r), skyjo_muzero::agent::Player::Mcts(_)));
    }
}

#[test]
fn self_play_is_deterministic_and_consistent() {
    let c = toy(0);
    let nets = Arc::new(Nets::new(NetConfig::toy(), 1));
    let pool = OpponentPool::new(20);
    let a = self_play_episode(&nets, &pool, 0, 17, &c);
    let b = self_play_episode(&nets, &pool, 0, 17, &c);
    assert_eq!(a.hash(), b.hash());
    assert_ne!(a.hash(), self_play_episode(&nets, &pool, 0, 18, &c).hash());

    assert_eq!(a.learner, Some(1));
    assert!(!a.is_empty());
    let last = a.len() - 1;
    for (t, s) in a.steps.iter().enumerate() {
        if t < last {
            assert!(s.rewards.iter().all(|&r| r == 0.0), "step {t}: {:?}", s.rewards);
        }
        let sum: f32 = s.policy.iter().sum();
        assert!((sum - 1.0).abs() < 1e-5);
        assert!((0..16).all(|i| s.policy[i] == 0.0 || s.legal.get(i)));
        assert_eq!(s.searched, s.actor == 1);
    }
    let replayed = a.state_at(a.len());
    assert!(replayed.is_over());
    let ranking = Ranking::from_scores(replayed.cumulative_scores());
    assert_eq!(a.outcome.scores, replayed.cumulative_scores());
    assert_eq!(a.outcome.ranks, ranking.ranks);
    for p in 0..2 {
        let better = (0..2).filter(|&o| a.outcome.scores[o] < a.outcome.scores[p]).count();
        assert_eq!(a.outcome.ranks[p], better + 1);
    }
}

#[test]
fn time_penalty_applies_per_step() {
    let c = TrainConfig { time_penalty: 0.01, ..toy(0) };
    let nets = Arc::new(Nets::new(NetConfig::toy(), 1));
    let ep = self_play_episode(&nets, &OpponentPool::new(20), 0, 4, &c);
    for s in &ep.steps[..ep.len() - 1] {
        assert!(s.rewards.iter().all(|&r| close(r, -0.01)));
    }
}

#[test]
fn config_round_trips_through_toml() {
    let c = TrainConfig { checkpoint_dir: Some("runs/a".into()), grad_clip: 0.0, ..toy(9) };
    let back = TrainConfig::from_toml(&c.to_toml()).unwrap();
    assert_eq!(back, c);
    let partial = TrainConfig::from_toml("batch_size = 32\nnet = \"toy\"\n").unwrap();
    assert_eq!(partial.batch_size, 32);
    assert_eq!(partial.net.resolve(), NetConfig::toy());
    assert_eq!(partial.unroll_steps, 8);
    assert!(TrainConfig::from_toml("num_players = 1").is_err());
    assert!(TrainConfig::from_toml("current_share = 1.5").is_err());
}

#[test]
fn underflow_waits_or_aborts() {
    let mut t = Trainer::new(TrainConfig { warmup_episodes: 10, ..toy(1) }).unwrap();
    let row = t.train_iteration().unwrap();
    assert_eq!(row.train_steps, 0);
    assert_eq!(row.buffer_episodes, 2);
    let mut t = Trainer::new(TrainConfig { warmup_episodes: 10, underflow: Underflow::Abort, ..toy(1) }).unwrap();
    assert!(matches!(t.train_iteration(), Err(TrainError::Buffer(_))));
}

#[test]
fn iteration_writes_metrics_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let metrics = dir.path().join("metrics.csv");
    let ckpt = dir.path().join("ckpt");
    let c = TrainConfig {
        iterations: 2,
        checkpoint_interval: 1,
        pool_interval: 1,
        metrics_path: Some(metrics.clone()),
        checkpoint_dir: Some(ckpt.clone()),
        ..toy(2)
    };
    let mut t = Trainer::new(c.clone()).unwrap();
    let rows = t.run().unwrap();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert_eq!(r.train_steps, 2);
        assert!(r.grad_norm.is_finite() && r.grad_norm > 0.0);
        assert!(r.total_loss.is_finite());
        assert!(r.winner_loss.is_some() && r.rank_loss.is_some());
        assert!(r.weight_decay_term > 0.0);
    }
    assert_eq!(t.pool.len(), 2);
    assert_eq!(t.episodes_played, 4);

    let mut reader = csv::Reader::from_path(&metrics).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, METRICS_COLUMNS);
    assert_eq!(reader.records().count(), 2);

    for it in [1, 2] {
        let p = checkpoint_path(&ckpt, it);
        assert!(p.join("manifest.json").exists());
        assert!(p.join("train.toml").exists());
    }
    let latest = latest_checkpoint(&ckpt).unwrap();
    assert_eq!(latest, checkpoint_path(&ckpt, 2));
    let loaded = Nets::load(&latest).unwrap();
    assert_eq!(loaded.param_hash(), t.nets.param_hash());
    let saved = TrainConfig::from_toml(&std::fs::read_to_string(latest.join("train.toml")).unwrap()).unwrap();
    assert_eq!(saved, c);
    assert!(latest_checkpoint(&dir.path().join("missing")).is_none());
}

#[test]
fn training_is_reproducible() {
    let run = || {
        let mut t = Trainer::new(TrainConfig { iterations: 1, ..toy(5) }).unwrap();
        t.run().unwrap();
        t.nets.param_hash()
    };
    assert_eq!(run(), run());
}

fn targets(seed: u64, count: usize, k: usize) -> Vec<TrainTarget> {
    let cfg = TargetConfig { unroll_steps: k, td_steps: 10, discount: 0.997 };
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let ep = synthetic(seed * 1000 + i as u64, 2, 60, |t, p| if t == 59 { 10.0 * p as f32 - 5.0 } else { 0.0 }, |t, _| (t % 7) as f32);
            make_targets(&ep, r.random_range(0..ep.len()), r.random_range(0..2), &cfg)
        })
        .collect()
}

#[test]
fn overfits_a_single_batch() {
    let c = TrainConfig { learning_rate: 4e-3, weight_decay: 0.0, ..toy(3) };
    let mut t = Trainer::new(c).unwrap();
    let batch = targets(1, 16, 8);
    let w = LossWeights::BASELINE;
    let first = t.train_step(&batch, w).unwrap().loss;
    for _ in 0..199 {
        let r = t.train_step(&batch, w).unwrap();
        assert!(r.grad_norm.is_finite());
    }
    let mut tape = Tape::new(t.nets.store());
    let last = batch_loss(&t.nets, &mut tape, &batch, w).1;
    let pv = last.policy + last.value;
    assert!(pv < 0.05, "policy + value {pv} after 200 steps (started at {})", first.policy + first.value);
}

#[test]
fn winner_head_learns_an_observable_outcome() {
    // Winner is seat 0 when the visible discard top is at least 5, else seat 1.
    let cfg = TargetConfig { unroll_steps: 1, td_steps: 10, discount: 0.997 };
    let mut r = ChaCha8Rng::seed_from_u64(11);
    let data: Vec<TrainTarget> = (0..500u64)
        .map(|s| {
            let ep = synthetic(50_000 + s, 2, 40, |_, _| 0.0, |_, _| 0.0);
            let t = r.random_range(0..ep.len());
            let ego = r.random_range(0..2);
            let mut x = make_targets(&ep, t, ego, &cfg);
            let top = ep.state_at(t).discard_top().map_or(0, |c| c.value());
            let winner = if top >= 5 { 0 } else { 1 };
            x.winner = vec![0.0; 2];
            x.winner[relative_seat(winner, ego, 2)] = 1.0;
            x
        })
        .collect();
    let c = TrainConfig { learning_rate: 7e-4, weight_decay: 0.0, ..toy(4) };
    let mut t = Trainer::new(c).unwrap();
    let w = LossWeights { winner: 1.0, rank: 0.0 };
    let mut order: Vec<usize> = (0..data.len()).collect();
    for step in 0..300 {
        if step % (data.len() / 50) == 0 {
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut r);
        }
        let b: Vec<TrainTarget> = (0..50).map(|i| data[order[(step * 50 + i) % data.len()]].clone()).collect();
        t.train_step(&b, w).unwrap();
    }
    let mut tape = Tape::new(t.nets.store());
    // Summed over the two unroll positions; report the per-position mean.
    let l = batch_loss(&t.nets, &mut tape, &data, w).1.winner.unwrap() / 2.0;
    assert!(l < 0.1, "winner loss {l}");
}
