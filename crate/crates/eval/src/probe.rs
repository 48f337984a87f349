//! Ridge-regression probes of game-state features on frozen latents.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use skyjo_autodiff::Tape;
use skyjo_core::encoding::encode_observation;
use skyjo_core::{GameState, Rules};
use skyjo_muzero::agent::Player;
use skyjo_muzero::nets::{LatentState, Nets, Seats};
use std::fmt;
use thiserror::Error;

pub const FOLDS: usize = 5;
pub const RIDGE: f64 = 1.0;
const MIN_ROWS: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum ProbeError {
    #[error("{0} rows, at least {MIN_ROWS} required")]
    TooFewRows(usize),
    #[error("{latents} latent rows but {feature} feature values")]
    Mismatch { latents: usize, feature: usize },
}

/// Probe targets, in report order. All are read from the true state.
pub const FEATURES: [&str; 7] = [
    "face_down_count",
    "deck_size",
    "visible_sum",
    "own_hidden_sum",
    "opponent_hidden_sum",
    "score_advantage",
    "opponent_face_down_count",
];

/// Feature values for `ego`:
/// own face-down cells; deck size; sum of every face-up card on the table;
/// own face-down sum; opponents' face-down sum; best opponent's
/// (cumulative + full board) total minus ego's; opponents' face-down cells.
pub fn features(state: &GameState, ego: usize) -> [f64; 7] {
    let grids = state.grids();
    let opponents = || (0..grids.len()).filter(move |&p| p != ego);
    let total = |p: usize| state.cumulative_scores()[p] + grids[p].board_sum();
    let best_opponent = opponents().map(total).min().unwrap_or(total(ego));
    [
        grids[ego].hidden_count() as f64,
        state.deck().len() as f64,
        grids.iter().map(|g| g.visible_sum()).sum::<i32>() as f64,
        grids[ego].hidden_sum() as f64,
        opponents().map(|p| grids[p].hidden_sum()).sum::<i32>() as f64,
        (best_opponent - total(ego)) as f64,
        opponents().map(|p| grids[p].hidden_count()).sum::<usize>() as f64,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeFit {
    /// Mean held-out R² over folds; may be negative.
    pub r2: f64,
    pub fold_r2: Vec<f64>,
    /// The feature had zero variance; `r2` is reported as 0.
    pub degenerate: bool,
}

fn mean_std(x: &DMatrix<f64>, rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    (0..x.ncols())
        .map(|c| {
            let m = rows.iter().map(|&r| x[(r, c)]).sum::<f64>() / n;
            let v = rows.iter().map(|&r| (x[(r, c)] - m).powi(2)).sum::<f64>() / n;
            (m, v.sqrt())
        })
        .unzip()
}

fn standardized(x: &DMatrix<f64>, rows: &[usize], mean: &[f64], std: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), x.ncols(), |i, c| if std[c] > 0.0 { (x[(rows[i], c)] - mean[c]) / std[c] } else { 0.0 })
}

/// Ridge fit with strength `ridge` on latents standardized per training fold,
/// scored by R² on each of `folds` contiguous held-out blocks.
pub fn linear_probe(latents: &[Vec<f32>], feature: &[f64], ridge: f64, folds: usize) -> Result<ProbeFit, ProbeError> {
    let n = latents.len();
    if n != feature.len() {
        return Err(ProbeError::Mismatch { latents: n, feature: feature.len() });
    }
    if n < MIN_ROWS.max(folds) {
        return Err(ProbeError::TooFewRows(n));
    }
    let mean_y = feature.iter().sum::<f64>() / n as f64;
    if feature.iter().all(|&y| (y - mean_y).abs() < 1e-12) {
        return Ok(ProbeFit { r2: 0.0, fold_r2: vec![0.0; folds], degenerate: true });
    }
    let d = latents[0].len();
    let x = DMatrix::from_fn(n, d, |r, c| latents[r][c] as f64);
    let mut fold_r2 = Vec::with_capacity(folds);
    for f in 0..folds {
        let (lo, hi) = (f * n / folds, (f + 1) * n / folds);
        let test: Vec<usize> = (lo..hi).collect();
        let train: Vec<usize> = (0..lo).chain(hi..n).collect();
        let (mean, std) = mean_std(&x, &train);
        let xt = standardized(&x, &train, &mean, &std);
        let ybar = train.iter().map(|&r| feature[r]).sum::<f64>() / train.len() as f64;
        let y = DVector::from_iterator(train.len(), train.iter().map(|&r| feature[r] - ybar));
        let gram = xt.transpose() * &xt + DMatrix::identity(d, d) * ridge;
        let rhs = xt.transpose() * y;
        let w = gram.cholesky().expect("ridge system is positive definite").solve(&rhs);
        let xs = standardized(&x, &test, &mean, &std);
        let pred = xs * w;
        let ty: Vec<f64> = test.iter().map(|&r| feature[r]).collect();
        let tmean = ty.iter().sum::<f64>() / ty.len() as f64;
        let sst: f64 = ty.iter().map(|y| (y - tmean).powi(2)).sum();
        if sst == 0.0 {
            continue;
        }
        let sse: f64 = ty.iter().zip(pred.iter()).map(|(y, p)| (y - (p + ybar)).powi(2)).sum();
        fold_r2.push(1.0 - sse / sst);
    }
    let r2 = fold_r2.iter().sum::<f64>() / fold_r2.len().max(1) as f64;
    Ok(ProbeFit { r2, fold_r2, degenerate: false })
}

/// A decision point: the state before the action and the player to act.
#[derive(Debug, Clone)]
pub struct ProbeSample {
    pub state: GameState,
    pub ego: usize,
}

/// Every decision state of `games` games played by `seats`.
pub fn collect_samples(seats: &[&Player], games: usize, seed: u64, rules: Rules) -> Vec<ProbeSample> {
    let mut out = Vec::new();
    for g in 0..games as u64 {
        let game_seed = seed.wrapping_add(g);
        let mut rng = ChaCha8Rng::seed_from_u64(game_seed ^ 0x0bad_5eed);
        let mut state = GameState::with_rules(seats.len(), game_seed, rules).expect("valid player count");
        while !state.is_over() {
            let ego = state.current_player();
            out.push(ProbeSample { state: state.clone(), ego });
            let d = seats[ego].decide(&state, None, &mut rng);
            state.step(d.action).expect("players choose legal actions");
        }
    }
    out
}

/// Latents for each sample: pre-conditioning, and post-conditioning on the ego.
pub fn latents(nets: &Nets, samples: &[ProbeSample], conditioned: bool) -> Vec<Vec<f32>> {
    const CHUNK: usize = 64;
    let mut out = Vec::with_capacity(samples.len());
    // Batches must share a sequence length, which depends on the player count.
    let mut start = 0;
    while start < samples.len() {
        let n = samples[start].state.num_players();
        let mut end = start;
        while end < samples.len() && end - start < CHUNK && samples[end].state.num_players() == n {
            end += 1;
        }
        let obs: Vec<_> = samples[start..end].iter().map(|s| encode_observation(&s.state, s.ego)).collect();
        let mut t = Tape::new(nets.store());
        let h = nets.represent_tape(&mut t, &obs.iter().collect::<Vec<_>>());
        for (i, s) in samples[start..end].iter().enumerate() {
            let latent = t.value(h).row(i).to_vec();
            if conditioned {
                let seats = Seats { ego: s.ego, current: s.state.current_player(), num_players: n };
                out.push(nets.ego_condition(&LatentState(latent), seats).0);
            } else {
                out.push(latent);
            }
        }
        start = end;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub features: Vec<String>,
    pub variants: Vec<String>,
    /// `fits[variant][feature]`.
    pub fits: Vec<Vec<ProbeFit>>,
    pub folds: usize,
    pub ridge: f64,
    pub steps: usize,
    pub games: usize,
}

impl ProbeReport {
    pub fn r2(&self, variant: usize, feature: usize) -> f64 {
        self.fits[variant][feature].r2
    }
}

impl fmt::Display for ProbeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "linear probes: {} steps, {} games, {} folds, ridge {}", self.steps, self.games, self.folds, self.ridge)?;
        write!(f, "{:<26}", "feature")?;
        for v in &self.variants {
            write!(f, "{v:>14}")?;
        }
        for (j, name) in self.features.iter().enumerate() {
            write!(f, "\n{name:<26}")?;
            for i in 0..self.variants.len() {
                let fit = &self.fits[i][j];
                if fit.degenerate {
                    write!(f, "{:>14}", "constant")?;
                } else {
                    write!(f, "{:>14.3}", fit.r2)?;
                }
            }
        }
        Ok(())
    }
}

/// Probes the baseline latent, the belief latent before conditioning and the
/// belief latent after ego conditioning on every sample.
pub fn probe_suite(baseline: &Nets, belief: &Nets, samples: &[ProbeSample], games: usize) -> Result<ProbeReport, ProbeError> {
    let sets = [latents(baseline, samples, false), latents(belief, samples, false), latents(belief, samples, true)];
    let values: Vec<[f64; 7]> = samples.iter().map(|s| features(&s.state, s.ego)).collect();
    let mut fits = Vec::new();
    for x in &sets {
        let mut row = Vec::new();
        for j in 0..FEATURES.len() {
            let y: Vec<f64> = values.iter().map(|v| v[j]).collect();
            row.push(linear_probe(x, &y, RIDGE, FOLDS)?);
        }
        fits.push(row);
    }
    Ok(ProbeReport {
        features: FEATURES.iter().map(|s| s.to_string()).collect(),
        variants: vec!["baseline".into(), "belief_pre_ego".into(), "belief_post_ego".into()],
        fits,
        folds: FOLDS,
        ridge: RIDGE,
        steps: samples.len(),
        games,
    })
}
