//! Unrolled training loss.
//!
//! Each cross-entropy term is reported as a KL divergence (cross-entropy
//! minus target entropy). The gradient is the same, and a perfect fit
//! reads 0 even for soft targets.

use crate::episode::TrainTarget;
use crate::nets::{HeadSet, Nets, Seats};
use crate::support::masked_softmax;
use serde::Serialize;
use skyjo_autodiff::{Tape, Tensor, Var};
use skyjo_core::{Action, ACTION_COUNT};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub winner: f32,
    pub rank: f32,
}

impl LossWeights {
    pub const BASELINE: LossWeights = LossWeights { winner: 0.0, rank: 0.0 };
}

/// Batch-mean loss components, each summed over unroll positions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub policy: f64,
    pub value: f64,
    pub reward: f64,
    /// Present when the winner weight is non-zero.
    pub winner: Option<f64>,
    pub rank: Option<f64>,
    pub alpha: f64,
    pub beta: f64,
    /// `policy + value + reward + alpha·winner + beta·rank`.
    pub total: f64,
    /// Mean entropy of the predicted root policy over legal actions.
    pub policy_entropy: f64,
}

impl LossBreakdown {
    pub fn muzero(&self) -> f64 {
        self.policy + self.value + self.reward
    }
}

/// Records the loss of `batch` on `t` and returns the scalar plus its parts.
/// Examples are grouped by observation length (player count) for the
/// representation pass; every term is still normalized by the full batch.
pub fn batch_loss(nets: &Nets, t: &mut Tape<'_>, batch: &[TrainTarget], w: LossWeights) -> (Var, LossBreakdown) {
    assert!(!batch.is_empty(), "empty batch");
    let k = batch[0].actions.len();
    assert!(batch.iter().all(|x| x.actions.len() == k), "mixed unroll lengths");
    let mut lens: Vec<usize> = batch.iter().map(|x| x.observation.tokens.len()).collect();
    lens.sort_unstable();
    lens.dedup();
    let mut parts = Terms::default();
    for len in lens {
        let group: Vec<&TrainTarget> = batch.iter().filter(|x| x.observation.tokens.len() == len).collect();
        group_loss(nets, t, &group, batch.len(), w, &mut parts);
    }

    let mut terms: Vec<(Var, f32)> = Vec::new();
    let mut sum = |t: &mut Tape<'_>, vars: &[Var], weight: f32| -> f64 {
        let mut s = 0.0;
        for &v in vars {
            s += t.scalar(v);
            terms.push((v, weight));
        }
        s
    };
    let policy = sum(t, &parts.policy, 1.0);
    let value = sum(t, &parts.value, 1.0);
    let reward = sum(t, &parts.reward, 1.0);
    let winner = (!parts.winner.is_empty()).then(|| sum(t, &parts.winner, w.winner));
    let rank = (!parts.rank.is_empty()).then(|| sum(t, &parts.rank, w.rank));
    let loss = t.weighted_sum(&terms);
    let breakdown = LossBreakdown {
        policy,
        value,
        reward,
        winner,
        rank,
        alpha: w.winner as f64,
        beta: w.rank as f64,
        total: t.scalar(loss),
        policy_entropy: parts.entropy / batch.len() as f64,
    };
    (loss, breakdown)
}

#[derive(Default)]
struct Terms {
    policy: Vec<Var>,
    value: Vec<Var>,
    reward: Vec<Var>,
    winner: Vec<Var>,
    rank: Vec<Var>,
    entropy: f64,
}

fn group_loss(nets: &Nets, t: &mut Tape<'_>, batch: &[&TrainTarget], total: usize, w: LossWeights, out: &mut Terms) {
    let b = batch.len();
    let k = batch[0].actions.len();
    let p = nets.config.max_players;
    let inv_b = 1.0 / total as f32;
    let vs = nets.value_support();
    let rs = nets.reward_support();
    let which = HeadSet { winner: w.winner != 0.0, rank: w.rank != 0.0 };

    let obs: Vec<_> = batch.iter().map(|x| &x.observation).collect();
    let mut h = nets.represent_tape(t, &obs);
    let winner_t = winner_targets(batch, p);
    let (rank_t, rank_mask, rank_w) = rank_targets(batch, p, total);
    let seat_mask: Vec<bool> = batch.iter().flat_map(|x| (0..p).map(move |s| s < x.num_players)).collect();

    for step in 0..=k {
        let seats: Vec<Seats> = batch.iter().map(|x| x.seats[step]).collect();
        let hc = nets.condition_tape(t, h, &seats);
        let heads = nets.heads_tape(t, hc, which);

        let mut pol = Tensor::zeros(b, ACTION_COUNT);
        let mut mask = vec![false; b * ACTION_COUNT];
        let mut pw = vec![0.0; b];
        for (i, x) in batch.iter().enumerate() {
            pol.row_mut(i).copy_from_slice(&x.policy[step]);
            for a in 0..ACTION_COUNT {
                mask[i * ACTION_COUNT + a] = x.policy_mask[step].get(a);
            }
            pw[i] = x.policy_weight[step] * inv_b;
        }
        if step == 0 {
            let logits = t.value(heads.policy);
            for i in 0..b {
                let probs = masked_softmax(logits.row(i), &mask[i * ACTION_COUNT..(i + 1) * ACTION_COUNT]);
                out.entropy -= probs.iter().filter(|&&q| q > 0.0).map(|&q| q as f64 * (q as f64).ln()).sum::<f64>();
            }
        }
        out.policy.push(t.softmax_kl(heads.policy, &pol, Some(&mask), &pw));

        let val = Tensor::from_rows(&batch.iter().map(|x| vs.two_hot(x.value[step])).collect::<Vec<_>>());
        out.value.push(t.softmax_kl(heads.value, &val, None, &vec![inv_b; b]));

        if let Some(wv) = heads.winner {
            out.winner.push(t.softmax_kl(wv, &winner_t, Some(&seat_mask), &vec![inv_b; b]));
        }
        if let Some(rv) = heads.rank {
            out.rank.push(t.softmax_kl(rv, &rank_t, Some(&rank_mask), &rank_w));
        }

        if step < k {
            let actions: Vec<Action> = batch.iter().map(|x| x.actions[step]).collect();
            let (next, reward) = nets.dynamics_tape(t, h, &actions);
            let rew = Tensor::from_rows(&batch.iter().map(|x| rs.two_hot(x.reward[step])).collect::<Vec<_>>());
            out.reward.push(t.softmax_kl(reward, &rew, None, &vec![inv_b; b]));
            h = next;
        }
    }
}

fn winner_targets(batch: &[&TrainTarget], p: usize) -> Tensor {
    let mut out = Tensor::zeros(batch.len(), p);
    for (i, x) in batch.iter().enumerate() {
        out.row_mut(i)[..x.num_players].copy_from_slice(&x.winner);
    }
    out
}

/// Rows `b·P + s` hold seat `s`'s rank; seats past the player count carry
/// weight 0 and a single unmasked dummy entry.
fn rank_targets(batch: &[&TrainTarget], p: usize, total: usize) -> (Tensor, Vec<bool>, Vec<f32>) {
    let b = batch.len();
    let mut t = Tensor::zeros(b * p, p);
    let mut mask = vec![false; b * p * p];
    let mut w = vec![0.0; b * p];
    for (i, x) in batch.iter().enumerate() {
        let n = x.num_players;
        for s in 0..p {
            let row = i * p + s;
            if s < n {
                t.row_mut(row)[x.rank[s]] = 1.0;
                mask[row * p..row * p + n].iter_mut().for_each(|m| *m = true);
                w[row] = 1.0 / (total * n) as f32;
            } else {
                mask[row * p] = true;
            }
        }
    }
    (t, mask, w)
}
