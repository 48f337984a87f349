//! PUCT tree search over learned latent states.
//!
//! The root is built from the real observation and the real legal mask.
//! Inside the tree the dynamics network unrolls blindly; a small phase
//! machine tracks whose turn it is and which action slots the phase allows,
//! so conditioning and masking follow the turn structure of the game.

use crate::nets::{HeadSet, LatentState, Nets, Seats};
use crate::support::masked_softmax;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use skyjo_autodiff::{Tape, Tensor};
use skyjo_core::encoding::{encode_observation, TokenSequence};
use skyjo_core::{Action, ActionMask, GameState, Phase, ACTION_COUNT};
use std::io::Write;
use thiserror::Error;

/// Leaf evaluation from the acting agent's point of view.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub policy_logits: [f32; ACTION_COUNT],
    pub value: f32,
    /// Ego win probability, when requested.
    pub win_prob: Option<f32>,
}

/// What the search needs from a model. `Nets` is the real implementation;
/// tests plug in hand-written models.
pub trait PlanningModel {
    fn initial(&self, obs: &TokenSequence) -> LatentState;
    /// Next latent and expected reward.
    fn recurrent(&self, h: &LatentState, action: Action) -> (LatentState, f32);
    fn evaluate(&self, h: &LatentState, seats: Seats, want_winner: bool) -> Evaluation;
}

impl PlanningModel for Nets {
    fn initial(&self, obs: &TokenSequence) -> LatentState {
        self.represent(obs)
    }

    fn recurrent(&self, h: &LatentState, action: Action) -> (LatentState, f32) {
        let (next, reward) = self.dynamics(h, action);
        (next, self.reward_support().expectation(&reward))
    }

    fn evaluate(&self, h: &LatentState, seats: Seats, want_winner: bool) -> Evaluation {
        let mut t = Tape::new(self.store());
        let hv = t.input(Tensor::from_vec(1, h.0.len(), h.0.clone()));
        let hc = self.condition_tape(&mut t, hv, &[seats]);
        let which = HeadSet { winner: want_winner, rank: false };
        let heads = self.heads_tape(&mut t, hc, which);
        let out = self.decode_heads(&t, heads, 0, seats.num_players);
        let mut policy_logits = [0.0; ACTION_COUNT];
        policy_logits.copy_from_slice(&out.policy_logits);
        Evaluation {
            policy_logits,
            value: self.value_support().expectation(&out.value_dist),
            win_prob: out.winner_dist.first().copied(),
        }
    }
}

/// How decisions of players other than the ego are scored inside the tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpponentModel {
    /// Every node maximizes the ego value.
    #[default]
    MaxEgo,
    /// Opponent nodes minimize the ego value.
    MinEgo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub simulations: usize,
    pub c1: f64,
    pub c2: f64,
    pub dirichlet_alpha: f64,
    pub dirichlet_fraction: f64,
    pub discount: f64,
    pub temperature: f64,
    /// Weight of the ego win probability added to leaf values. 0 disables.
    pub winner_weight: f64,
    pub opponent_model: OpponentModel,
}

impl Default for SearchConfig {
    fn default() -> SearchConfig {
        SearchConfig {
            simulations: 200,
            c1: 1.25,
            c2: 19652.0,
            dirichlet_alpha: 0.3,
            dirichlet_fraction: 0.25,
            discount: 0.997,
            temperature: 1.0,
            winner_weight: 0.0,
            opponent_model: OpponentModel::MaxEgo,
        }
    }
}

impl SearchConfig {
    /// Evaluation settings: no root noise, greedy selection.
    pub fn greedy(simulations: usize) -> SearchConfig {
        SearchConfig { simulations, dirichlet_fraction: 0.0, temperature: 0.0, ..SearchConfig::default() }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: &str| Err(SearchError::Config(m.to_string()));
        if self.simulations < 1 {
            return bad("simulations must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.dirichlet_fraction) {
            return bad("dirichlet_fraction must lie in [0, 1]");
        }
        if self.dirichlet_fraction > 0.0 && self.dirichlet_alpha <= 0.0 {
            return bad("dirichlet_alpha must be positive");
        }
        if self.temperature.is_nan() || self.temperature < 0.0 || self.discount.is_nan() || self.discount <= 0.0 || self.discount > 1.0 {
            return bad("temperature must be >= 0 and discount in (0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("search started from a terminal state")]
    Terminal,
    #[error("state has no legal actions")]
    NoLegalActions,
    #[error("invalid search config: {0}")]
    Config(String),
}

/// Simulations per move by training iteration.
pub fn simulation_count(iteration: usize) -> usize {
    match iteration {
        0..200 => 200,
        200..500 => 400,
        _ => 600,
    }
}

/// Running bounds used to map backed-up values into [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl Default for MinMax {
    fn default() -> MinMax {
        MinMax { min: f64::INFINITY, max: f64::NEG_INFINITY }
    }
}

impl MinMax {
    pub fn update(&mut self, v: f64) {
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }

    /// Identity until two distinct values have been seen.
    pub fn normalize(&self, v: f64) -> f64 {
        if self.max > self.min {
            (v - self.min) / (self.max - self.min)
        } else {
            v
        }
    }
}

/// `Q̄ + P · sqrt(N_parent) / (1 + N_a) · (c1 + ln((N_parent + c2 + 1) / c2))`.
pub fn puct(parent_visits: u32, child_visits: u32, prior: f64, q_normalized: f64, c1: f64, c2: f64) -> f64 {
    let np = parent_visits as f64;
    let explore = (c1 + ((np + c2 + 1.0) / c2).ln()) * np.sqrt() / (1.0 + child_visits as f64);
    q_normalized + prior * explore
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct TreeCtx {
    phase: Phase,
    current: usize,
}

impl TreeCtx {
    fn after(self, action: Action, num_players: usize) -> TreeCtx {
        match (self.phase, action) {
            (Phase::ChooseSource, Action::TAKE_DISCARD) => TreeCtx { phase: Phase::ChoosePosition, ..self },
            (Phase::ChooseSource, _) => TreeCtx { phase: Phase::KeepOrDiscard, ..self },
            (Phase::KeepOrDiscard, _) => TreeCtx { phase: Phase::ChoosePosition, ..self },
            (Phase::ChoosePosition, _) => {
                TreeCtx { phase: Phase::ChooseSource, current: (self.current + 1) % num_players }
            }
        }
    }
}

const NONE: u32 = u32::MAX;

/// One tree node. `reward` is the reward of the edge leading into the node.
#[derive(Debug, Clone)]
pub struct Node {
    pub prior: f64,
    pub visits: u32,
    pub value_sum: f64,
    pub reward: f64,
    pub mask: ActionMask,
    ctx: TreeCtx,
    latent: Option<LatentState>,
    children: [u32; ACTION_COUNT],
}

impl Node {
    fn new(prior: f64) -> Node {
        Node {
            prior,
            visits: 0,
            value_sum: 0.0,
            reward: 0.0,
            mask: ActionMask::EMPTY,
            ctx: TreeCtx { phase: Phase::ChooseSource, current: 0 },
            latent: None,
            children: [NONE; ACTION_COUNT],
        }
    }

    pub fn value(&self) -> f64 {
        if self.visits == 0 {
            0.0
        } else {
            self.value_sum / self.visits as f64
        }
    }

    pub fn is_expanded(&self) -> bool {
        self.latent.is_some()
    }

    pub fn current_player(&self) -> usize {
        self.ctx.current
    }
}

/// Arena of nodes; index 0 is the root.
#[derive(Debug, Clone, Default)]
pub struct SearchTree {
    pub nodes: Vec<Node>,
}

impl SearchTree {
    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn child(&self, node: usize, action: Action) -> Option<&Node> {
        let c = self.nodes[node].children[action.index()];
        (c != NONE).then(|| &self.nodes[c as usize])
    }

    fn child_index(&self, node: usize, action: usize) -> Option<usize> {
        let c = self.nodes[node].children[action];
        (c != NONE).then_some(c as usize)
    }
}

/// PUCT score of `action` at `node` under the given bounds.
pub fn puct_score(tree: &SearchTree, node: usize, action: Action, config: &SearchConfig, bounds: &MinMax) -> f64 {
    let parent = &tree.nodes[node];
    let Some(child) = tree.child(node, action) else {
        return f64::NEG_INFINITY;
    };
    let q = if child.visits > 0 { bounds.normalize(child.reward + config.discount * child.value()) } else { 0.0 };
    puct(parent.visits, child.visits, child.prior, q, config.c1, config.c2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub simulation: usize,
    pub path: Vec<u8>,
    pub leaf_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub action: u8,
    pub prior: f64,
    pub visits: u32,
    pub q: f64,
}

/// Per-simulation paths plus the final root edge table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub simulations: Vec<SimulationRecord>,
    pub root: Vec<EdgeRecord>,
}

impl SearchTrace {
    /// One JSON object per line: `{"kind":"simulation",...}` records, then
    /// `{"kind":"edge",...}` records.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for s in &self.simulations {
            let mut v = serde_json::to_value(s)?;
            v["kind"] = "simulation".into();
            writeln!(w, "{v}")?;
        }
        for e in &self.root {
            let mut v = serde_json::to_value(e)?;
            v["kind"] = "edge".into();
            writeln!(w, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    /// Visit share per action; 0 on illegal actions.
    pub visit_distribution: [f64; ACTION_COUNT],
    pub visits: [u32; ACTION_COUNT],
    pub root_value: f64,
    /// Root priors after masking and noise.
    pub root_prior: [f64; ACTION_COUNT],
    pub root_win_prob: Option<f32>,
    pub tree: SearchTree,
    pub trace: Option<SearchTrace>,
}

pub fn run_mcts<M: PlanningModel + ?Sized, R: Rng + ?Sized>(
    model: &M,
    state: &GameState,
    ego: usize,
    config: &SearchConfig,
    rng: &mut R,
) -> Result<SearchResult, SearchError> {
    search(model, state, ego, config, rng, false)
}

/// As [`run_mcts`], also recording a [`SearchTrace`].
pub fn run_mcts_traced<M: PlanningModel + ?Sized, R: Rng + ?Sized>(
    model: &M,
    state: &GameState,
    ego: usize,
    config: &SearchConfig,
    rng: &mut R,
) -> Result<SearchResult, SearchError> {
    search(model, state, ego, config, rng, true)
}

fn search<M: PlanningModel + ?Sized, R: Rng + ?Sized>(
    model: &M,
    state: &GameState,
    ego: usize,
    config: &SearchConfig,
    rng: &mut R,
    traced: bool,
) -> Result<SearchResult, SearchError> {
    config.validate()?;
    if state.is_terminal().is_some() {
        return Err(SearchError::Terminal);
    }
    let legal = state.legal_actions();
    if legal.is_empty() {
        return Err(SearchError::NoLegalActions);
    }
    let n = state.num_players();
    let want_winner = config.winner_weight != 0.0 || traced;
    let mut tree = SearchTree { nodes: vec![Node::new(1.0)] };
    let mut bounds = MinMax::default();
    let mut trace = traced.then(SearchTrace::default);

    let root_ctx = TreeCtx { phase: state.phase(), current: state.current_player() };
    let h0 = model.initial(&encode_observation(state, ego));
    let eval = model.evaluate(&h0, Seats { ego, current: root_ctx.current, num_players: n }, want_winner);
    let root_win_prob = eval.win_prob;
    let root_value = leaf_value(&eval, config);
    expand(&mut tree, 0, h0, root_ctx, legal, &eval.policy_logits);
    if config.dirichlet_fraction > 0.0 {
        add_noise(&mut tree, config, rng);
    }
    let mut root_prior = [0.0; ACTION_COUNT];
    for a in legal.iter() {
        root_prior[a.index()] = tree.child(0, a).map_or(0.0, |c| c.prior);
    }
    backup(&mut tree, &[0], root_value, config.discount, &mut bounds);

    for sim in 0..config.simulations.saturating_sub(1) {
        let mut path = vec![0usize];
        let mut actions = Vec::new();
        let mut node = 0;
        while tree.nodes[node].is_expanded() {
            let a = select_child(&tree, node, ego, config, &bounds);
            actions.push(a as u8);
            node = tree.child_index(node, a).expect("selected child exists");
            path.push(node);
        }
        let parent = path[path.len() - 2];
        let action = Action::new(*actions.last().expect("path has an edge") as usize).expect("valid slot");
        let pctx = tree.nodes[parent].ctx;
        let (h, reward) = model.recurrent(tree.nodes[parent].latent.as_ref().expect("parent expanded"), action);
        let ctx = pctx.after(action, n);
        let eval = model.evaluate(&h, Seats { ego, current: ctx.current, num_players: n }, want_winner);
        let value = leaf_value(&eval, config);
        tree.nodes[node].reward = reward as f64;
        expand(&mut tree, node, h, ctx, ActionMask::for_phase(ctx.phase), &eval.policy_logits);
        backup(&mut tree, &path, value, config.discount, &mut bounds);
        if let Some(t) = trace.as_mut() {
            t.simulations.push(SimulationRecord { simulation: sim + 1, path: actions, leaf_value: value });
        }
    }

    let mut visits = [0u32; ACTION_COUNT];
    for a in legal.iter() {
        visits[a.index()] = tree.child(0, a).map_or(0, |c| c.visits);
    }
    let total: u32 = visits.iter().sum();
    let mut visit_distribution = [0.0; ACTION_COUNT];
    if total == 0 {
        // A single simulation only evaluates the root; fall back to the priors.
        visit_distribution = root_prior;
    } else {
        for (d, &v) in visit_distribution.iter_mut().zip(&visits) {
            *d = v as f64 / total as f64;
        }
    }
    if let Some(t) = trace.as_mut() {
        t.root = legal
            .iter()
            .filter_map(|a| {
                let c = tree.child(0, a)?;
                Some(EdgeRecord {
                    action: a.index() as u8,
                    prior: c.prior,
                    visits: c.visits,
                    q: if c.visits > 0 { c.reward + config.discount * c.value() } else { 0.0 },
                })
            })
            .collect();
    }
    let root_value = tree.root().value();
    Ok(SearchResult { visit_distribution, visits, root_value, root_prior, root_win_prob, tree, trace })
}

fn leaf_value(eval: &Evaluation, config: &SearchConfig) -> f64 {
    eval.value as f64 + config.winner_weight * eval.win_prob.unwrap_or(0.0) as f64
}

fn expand(tree: &mut SearchTree, node: usize, h: LatentState, ctx: TreeCtx, mask: ActionMask, logits: &[f32]) {
    let priors = masked_softmax(logits, &mask.to_array());
    for a in mask.iter() {
        let idx = tree.nodes.len() as u32;
        tree.nodes.push(Node::new(priors[a.index()] as f64));
        tree.nodes[node].children[a.index()] = idx;
    }
    let n = &mut tree.nodes[node];
    n.latent = Some(h);
    n.ctx = ctx;
    n.mask = mask;
}

fn add_noise<R: Rng + ?Sized>(tree: &mut SearchTree, config: &SearchConfig, rng: &mut R) {
    let gamma = Gamma::new(config.dirichlet_alpha, 1.0).expect("alpha validated positive");
    let kids: Vec<usize> = tree.nodes[0].children.iter().filter(|&&c| c != NONE).map(|&c| c as usize).collect();
    let draws: Vec<f64> = kids.iter().map(|_| gamma.sample(rng)).collect();
    let sum: f64 = draws.iter().sum();
    let k = kids.len() as f64;
    let f = config.dirichlet_fraction;
    for (&c, &d) in kids.iter().zip(&draws) {
        let noise = if sum > 0.0 { d / sum } else { 1.0 / k };
        let p = &mut tree.nodes[c].prior;
        *p = (1.0 - f) * *p + f * noise;
    }
}

fn select_child(tree: &SearchTree, node: usize, ego: usize, config: &SearchConfig, bounds: &MinMax) -> usize {
    let parent = &tree.nodes[node];
    let minimize = config.opponent_model == OpponentModel::MinEgo && parent.ctx.current != ego;
    let mut best = (f64::NEG_INFINITY, usize::MAX);
    for a in parent.mask.iter() {
        let Some(ci) = tree.child_index(node, a.index()) else { continue };
        let c = &tree.nodes[ci];
        let q = if c.visits > 0 {
            let q = bounds.normalize(c.reward + config.discount * c.value());
            if minimize {
                1.0 - q
            } else {
                q
            }
        } else {
            0.0
        };
        let s = puct(parent.visits, c.visits, c.prior, q, config.c1, config.c2);
        if s > best.0 {
            best = (s, a.index());
        }
    }
    assert!(best.1 != usize::MAX, "expanded node has no children");
    best.1
}

fn backup(tree: &mut SearchTree, path: &[usize], leaf: f64, discount: f64, bounds: &mut MinMax) {
    let mut value = leaf;
    for &i in path.iter().rev() {
        let n = &mut tree.nodes[i];
        n.value_sum += value;
        n.visits += 1;
        bounds.update(n.reward + discount * n.value());
        value = n.reward + discount * value;
    }
}

/// Temperature 0 picks the most visited action (lowest index on ties);
/// otherwise samples proportionally to `p^(1/T)`.
pub fn select_action<R: Rng + ?Sized>(distribution: &[f64; ACTION_COUNT], temperature: f64, rng: &mut R) -> Action {
    let mut best = 0;
    for (i, &p) in distribution.iter().enumerate() {
        if p > distribution[best] {
            best = i;
        }
    }
    if temperature <= 0.0 {
        return Action::new(best).expect("valid slot");
    }
    let max = distribution[best];
    if max.is_nan() || max <= 0.0 {
        return Action::new(best).expect("valid slot");
    }
    let weights: Vec<f64> = distribution.iter().map(|&p| (p / max).powf(1.0 / temperature)).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            if u < w {
                return Action::new(i).expect("valid slot");
            }
            u -= w;
        }
    }
    Action::new(best).expect("valid slot")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_machine_follows_turn_order() {
        let c = TreeCtx { phase: Phase::ChooseSource, current: 2 };
        let take = c.after(Action::TAKE_DISCARD, 3);
        assert_eq!(take, TreeCtx { phase: Phase::ChoosePosition, current: 2 });
        let draw = c.after(Action::DRAW_DECK, 3);
        assert_eq!(draw.phase, Phase::KeepOrDiscard);
        assert_eq!(draw.after(Action::DISCARD, 3).phase, Phase::ChoosePosition);
        let next = take.after(Action::new(7).unwrap(), 3);
        assert_eq!(next, TreeCtx { phase: Phase::ChooseSource, current: 0 });
    }

    #[test]
    fn minmax_is_identity_until_spread() {
        let mut b = MinMax::default();
        assert_eq!(b.normalize(3.0), 3.0);
        b.update(1.0);
        assert_eq!(b.normalize(3.0), 3.0);
        b.update(5.0);
        assert_eq!(b.normalize(3.0), 0.5);
    }
}
