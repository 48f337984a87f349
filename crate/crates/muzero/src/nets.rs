//! Representation, dynamics and prediction networks.
//!
//! Every forward function has a tape form (`*_tape`) used by training and a
//! convenience form over plain vectors used by search and evaluation.

use crate::config::NetConfig;
use crate::support::{masked_softmax, softmax, Support};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use skyjo_autodiff::{init, EmbedEntry, ParamId, ParamStore, StoreError, Tape, Tensor, Var};
use skyjo_core::encoding::{Feature, TokenKind, TokenSequence, SCHEMA_VERSION};
use skyjo_core::Action;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    #[default]
    Full,
    /// Skip the ego, current-player and player-count embeddings.
    EgoOff,
}

#[derive(Debug, Error)]
pub enum NetError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("checkpoint encoding schema {found} does not match {expected}")]
    Schema { expected: u32, found: u32 },
    #[error("checkpoint metadata: {0}")]
    Meta(String),
    #[error("invalid config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentState(pub Vec<f32>);

/// Softmaxed head outputs for one latent.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionOutput {
    pub policy_logits: Vec<f32>,
    pub value_dist: Vec<f32>,
    /// Win probability per seat, ego first, over `num_players` slots.
    pub winner_dist: Vec<f32>,
    /// Per seat (ego first), a distribution over ranks `1..=num_players`.
    pub rank_dist: Vec<Vec<f32>>,
}

#[derive(Debug, Clone, Copy)]
struct Dense {
    w: ParamId,
    b: ParamId,
}

#[derive(Debug, Clone, Copy)]
struct Norm {
    g: ParamId,
    b: ParamId,
}

#[derive(Debug, Clone)]
struct Mlp(Vec<Dense>);

#[derive(Debug, Clone)]
struct EncoderLayer {
    ln1: Norm,
    q: Dense,
    k: Dense,
    v: Dense,
    o: Dense,
    ln2: Norm,
    ff1: Dense,
    ff2: Dense,
}

#[derive(Debug, Clone)]
struct Ids {
    kind: ParamId,
    features: Vec<ParamId>,
    pos: ParamId,
    layers: Vec<EncoderLayer>,
    out_ln: Norm,
    out: Dense,
    action: ParamId,
    dyn_mlp: Mlp,
    dyn_ln: Norm,
    reward: Mlp,
    ego: ParamId,
    current: ParamId,
    nplayers: ParamId,
    cond_ln: Norm,
    policy: Mlp,
    value: Mlp,
    winner: Mlp,
    rank: Mlp,
}

struct Builder<'a> {
    store: &'a mut ParamStore,
    rng: ChaCha8Rng,
}

impl Builder<'_> {
    fn dense(&mut self, name: &str, fan_in: usize, fan_out: usize) -> Dense {
        let w = self.store.add(format!("{name}.w"), init::xavier(fan_in, fan_out, &mut self.rng), true);
        let b = self.store.add(format!("{name}.b"), Tensor::zeros(1, fan_out), false);
        Dense { w, b }
    }

    /// Output layer with small weights so initial predictions are near uniform.
    fn dense_small(&mut self, name: &str, fan_in: usize, fan_out: usize) -> Dense {
        let w = self.store.add(format!("{name}.w"), init::normal(fan_in, fan_out, 1e-3, &mut self.rng), true);
        let b = self.store.add(format!("{name}.b"), Tensor::zeros(1, fan_out), false);
        Dense { w, b }
    }

    fn norm(&mut self, name: &str, width: usize) -> Norm {
        let g = self.store.add(format!("{name}.g"), Tensor::filled(1, width, 1.0), false);
        let b = self.store.add(format!("{name}.b"), Tensor::zeros(1, width), false);
        Norm { g, b }
    }

    fn table(&mut self, name: &str, rows: usize, width: usize) -> ParamId {
        self.store.add(name.to_string(), init::normal(rows, width, 0.02, &mut self.rng), true)
    }

    fn head(&mut self, name: &str, input: usize, hidden: usize, out: usize) -> Mlp {
        Mlp(vec![
            self.dense(&format!("{name}.0"), input, hidden),
            self.dense(&format!("{name}.1"), hidden, hidden),
            self.dense_small(&format!("{name}.2"), hidden, out),
        ])
    }
}

/// Tape handles of the prediction heads for a batch.
#[derive(Debug, Clone, Copy)]
pub struct HeadVars {
    /// `[B, 16]`
    pub policy: Var,
    /// `[B, value atoms]`
    pub value: Var,
    /// `[B, max_players]`, seat-relative to the ego.
    pub winner: Option<Var>,
    /// `[B * max_players, max_players]`: row `b * P + s` is seat `s`'s rank logits.
    pub rank: Option<Var>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeadSet {
    pub winner: bool,
    pub rank: bool,
}

impl HeadSet {
    pub const ALL: HeadSet = HeadSet { winner: true, rank: true };
    pub const CORE: HeadSet = HeadSet { winner: false, rank: false };
}

/// Per-row seat context for ego conditioning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seats {
    pub ego: usize,
    pub current: usize,
    pub num_players: usize,
}

#[derive(Debug, Clone)]
pub struct Nets {
    pub config: NetConfig,
    store: ParamStore,
    ids: Ids,
    ablation: Ablation,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointMeta {
    config: NetConfig,
    schema_version: u32,
    #[serde(default)]
    ablation: Ablation,
}

impl Nets {
    pub fn new(config: NetConfig, seed: u64) -> Nets {
        config.validate().expect("valid network config");
        let c = config;
        let mut store = ParamStore::new();
        let mut b = Builder { store: &mut store, rng: ChaCha8Rng::seed_from_u64(seed) };
        let d = c.d_model;
        let kind = b.table("rep.embed.kind", TokenKind::COUNT, d);
        let features = Feature::ALL.iter().map(|f| b.table(&format!("rep.embed.{}", f.name()), f.vocab(), d)).collect();
        let pos = b.table("rep.embed.position", c.max_len(), d);
        let layers = (0..c.layers)
            .map(|l| {
                let n = format!("rep.layer{l}");
                EncoderLayer {
                    ln1: b.norm(&format!("{n}.ln1"), d),
                    q: b.dense(&format!("{n}.attn.q"), d, d),
                    k: b.dense(&format!("{n}.attn.k"), d, d),
                    v: b.dense(&format!("{n}.attn.v"), d, d),
                    o: b.dense(&format!("{n}.attn.o"), d, d),
                    ln2: b.norm(&format!("{n}.ln2"), d),
                    ff1: b.dense(&format!("{n}.ff1"), d, c.ff_hidden),
                    ff2: b.dense(&format!("{n}.ff2"), c.ff_hidden, d),
                }
            })
            .collect();
        let out_ln = b.norm("rep.out.ln", d);
        let out = b.dense("rep.out.proj", d, c.latent_dim);
        let action = b.table("dyn.embed.action", c.action_count, c.action_embed);
        let dyn_mlp = Mlp(vec![
            b.dense("dyn.mlp.0", c.latent_dim + c.action_embed, c.dynamics_hidden),
            b.dense("dyn.mlp.1", c.dynamics_hidden, c.dynamics_hidden),
            b.dense_small("dyn.mlp.2", c.dynamics_hidden, c.latent_dim),
        ]);
        let dyn_ln = b.norm("dyn.ln", c.latent_dim);
        let reward = b.head("dyn.reward", c.latent_dim, c.head_hidden, c.reward_atoms());
        let ego = b.table("cond.embed.ego", c.max_players, c.latent_dim);
        let current = b.table("cond.embed.current", c.max_players, c.latent_dim);
        let nplayers = b.table("cond.embed.nplayers", c.max_players, c.latent_dim);
        let cond_ln = b.norm("cond.ln", c.latent_dim);
        let policy = b.head("pred.policy", c.latent_dim, c.head_hidden, c.action_count);
        let value = b.head("pred.value", c.latent_dim, c.head_hidden, c.value_atoms());
        let winner = b.head("pred.winner", c.latent_dim, c.head_hidden, c.max_players);
        let rank = b.head("pred.rank", c.latent_dim, c.head_hidden, c.max_players * c.max_players);
        let ids = Ids {
            kind,
            features,
            pos,
            layers,
            out_ln,
            out,
            action,
            dyn_mlp,
            dyn_ln,
            reward,
            ego,
            current,
            nplayers,
            cond_ln,
            policy,
            value,
            winner,
            rank,
        };
        Nets { config, store, ids, ablation: Ablation::Full }
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn ablation(&self) -> Ablation {
        self.ablation
    }

    pub fn set_ablation(&mut self, mode: Ablation) {
        self.ablation = mode;
    }

    pub fn value_support(&self) -> Support {
        Support::new(self.config.value_support)
    }

    pub fn reward_support(&self) -> Support {
        Support::new(self.config.reward_support)
    }

    pub fn param_hash(&self) -> String {
        self.store.sha256()
    }

    /// Zero the three conditioning tables.
    pub fn zero_condition_embeddings(&mut self) {
        for id in [self.ids.ego, self.ids.current, self.ids.nplayers] {
            self.store.get_mut(id).data.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    /// Zero the last dynamics layer, making the transition `LN(h)`.
    pub fn zero_dynamics_output(&mut self) {
        let last = *self.ids.dyn_mlp.0.last().unwrap();
        for id in [last.w, last.b] {
            self.store.get_mut(id).data.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    pub fn save(&self, dir: &Path) -> Result<String, NetError> {
        let meta = CheckpointMeta { config: self.config, schema_version: SCHEMA_VERSION, ablation: self.ablation };
        let meta = serde_json::to_value(meta).map_err(|e| NetError::Meta(e.to_string()))?;
        Ok(self.store.save(dir, meta)?.sha256)
    }

    /// Load a checkpoint, restoring the ablation it was saved with.
    pub fn load(dir: &Path) -> Result<Nets, NetError> {
        let (store, manifest) = ParamStore::load(dir)?;
        let meta: CheckpointMeta =
            serde_json::from_value(manifest.meta).map_err(|e| NetError::Meta(e.to_string()))?;
        if meta.schema_version != SCHEMA_VERSION {
            return Err(NetError::Schema { expected: SCHEMA_VERSION, found: meta.schema_version });
        }
        meta.config.validate().map_err(NetError::Config)?;
        let mut nets = Nets::new(meta.config, 0);
        if nets.store.len() != store.len()
            || nets.store.params().iter().zip(store.params()).any(|(a, b)| a.name != b.name || a.value.shape() != b.value.shape())
        {
            return Err(NetError::Meta("parameter layout does not match config".into()));
        }
        nets.store.copy_values_from(&store);
        nets.ablation = meta.ablation;
        Ok(nets)
    }

    fn dense(&self, t: &mut Tape<'_>, x: Var, d: Dense) -> Var {
        let (w, b) = (t.param(d.w), t.param(d.b));
        t.dense(x, w, b)
    }

    fn norm(&self, t: &mut Tape<'_>, x: Var, n: Norm) -> Var {
        let (g, b) = (t.param(n.g), t.param(n.b));
        t.layernorm(x, g, b)
    }

    fn mlp(&self, t: &mut Tape<'_>, mut x: Var, m: &Mlp) -> Var {
        let last = m.0.len() - 1;
        for (i, &d) in m.0.iter().enumerate() {
            x = self.dense(t, x, d);
            if i < last {
                x = t.gelu(x);
            }
        }
        x
    }

    /// `[B, latent]` latents for a batch of same-length observations.
    pub fn represent_tape(&self, t: &mut Tape<'_>, obs: &[&TokenSequence]) -> Var {
        assert!(!obs.is_empty(), "empty observation batch");
        let len = obs[0].tokens.len() + 1;
        for o in obs {
            assert_eq!(o.schema_version, SCHEMA_VERSION, "observation schema mismatch");
            assert_eq!(o.tokens.len() + 1, len, "observations in a batch must share a length");
        }
        assert!(len <= self.config.max_len(), "sequence longer than positional table");
        let mut entries = Vec::with_capacity(obs.len() * len * 7);
        for (b, o) in obs.iter().enumerate() {
            let base = (b * len) as u32;
            entries.push(EmbedEntry { row: base, table: 0, index: TokenKind::Cls as u32 });
            for (i, tok) in o.tokens.iter().enumerate() {
                let row = base + 1 + i as u32;
                entries.push(EmbedEntry { row, table: 0, index: tok.kind() as u32 });
                tok.for_each_feature(|f, idx| {
                    entries.push(EmbedEntry { row, table: 1 + f.index() as u16, index: idx as u32 });
                });
            }
        }
        let mut tables = vec![t.param(self.ids.kind)];
        tables.extend(self.ids.features.iter().map(|&id| t.param(id)));
        let x = t.embed_sum(&tables, obs.len() * len, entries);
        let pos_all = t.param(self.ids.pos);
        let pos = t.gather_rows(pos_all, (0..len).collect());
        let mut x = t.add_bcast(x, pos);
        for layer in &self.ids.layers {
            let h = self.norm(t, x, layer.ln1);
            let q = self.dense(t, h, layer.q);
            let k = self.dense(t, h, layer.k);
            let v = self.dense(t, h, layer.v);
            let a = t.attention(q, k, v, self.config.heads, len);
            let a = self.dense(t, a, layer.o);
            x = t.add(x, a);
            let h = self.norm(t, x, layer.ln2);
            let h = self.dense(t, h, layer.ff1);
            let h = t.gelu(h);
            let h = self.dense(t, h, layer.ff2);
            x = t.add(x, h);
        }
        let cls = t.gather_rows(x, (0..obs.len()).map(|b| b * len).collect());
        let cls = self.norm(t, cls, self.ids.out_ln);
        let h = self.dense(t, cls, self.ids.out);
        t.tanh(h)
    }

    /// Next latents `[B, latent]` and reward logits `[B, reward atoms]`.
    pub fn dynamics_tape(&self, t: &mut Tape<'_>, h: Var, actions: &[Action]) -> (Var, Var) {
        assert_eq!(t.shape(h)[0], actions.len(), "one action per latent");
        let table = t.param(self.ids.action);
        let a = t.gather_rows(table, actions.iter().map(|a| a.index()).collect());
        let x = t.concat_cols(h, a);
        let m = self.mlp(t, x, &self.ids.dyn_mlp);
        let next = t.add(h, m);
        let next = self.norm(t, next, self.ids.dyn_ln);
        let reward = self.mlp(t, next, &self.ids.reward);
        (next, reward)
    }

    /// `LayerNorm(h + e_ego + e_current + e_nplayers)`, or `LayerNorm(h)` when ablated.
    pub fn condition_tape(&self, t: &mut Tape<'_>, h: Var, seats: &[Seats]) -> Var {
        assert_eq!(t.shape(h)[0], seats.len(), "one seat context per latent");
        let p = self.config.max_players;
        for s in seats {
            assert!(
                s.ego < p && s.current < p && (1..=p).contains(&s.num_players),
                "seat context {s:?} out of range"
            );
        }
        let x = match self.ablation {
            Ablation::EgoOff => h,
            Ablation::Full => {
                let (ego, cur, np) = (t.param(self.ids.ego), t.param(self.ids.current), t.param(self.ids.nplayers));
                let e = t.gather_rows(ego, seats.iter().map(|s| s.ego).collect());
                let c = t.gather_rows(cur, seats.iter().map(|s| s.current).collect());
                let n = t.gather_rows(np, seats.iter().map(|s| s.num_players - 1).collect());
                let x = t.add(h, e);
                let x = t.add(x, c);
                t.add(x, n)
            }
        };
        self.norm(t, x, self.ids.cond_ln)
    }

    pub fn heads_tape(&self, t: &mut Tape<'_>, hc: Var, which: HeadSet) -> HeadVars {
        let policy = self.mlp(t, hc, &self.ids.policy);
        let value = self.mlp(t, hc, &self.ids.value);
        let winner = which.winner.then(|| self.mlp(t, hc, &self.ids.winner));
        let rank = which.rank.then(|| {
            let r = self.mlp(t, hc, &self.ids.rank);
            let b = t.shape(r)[0];
            let p = self.config.max_players;
            t.reshape(r, b * p, p)
        });
        HeadVars { policy, value, winner, rank }
    }

    pub fn represent(&self, obs: &TokenSequence) -> LatentState {
        let mut t = Tape::new(&self.store);
        let h = self.represent_tape(&mut t, &[obs]);
        LatentState(t.value(h).data.clone())
    }

    /// Returns the next latent and the reward distribution.
    pub fn dynamics(&self, h: &LatentState, action: Action) -> (LatentState, Vec<f32>) {
        let mut t = Tape::new(&self.store);
        let hv = t.input(Tensor::from_vec(1, h.0.len(), h.0.clone()));
        let (next, reward) = self.dynamics_tape(&mut t, hv, &[action]);
        (LatentState(t.value(next).data.clone()), softmax(&t.value(reward).data))
    }

    pub fn ego_condition(&self, h: &LatentState, seats: Seats) -> LatentState {
        let mut t = Tape::new(&self.store);
        let hv = t.input(Tensor::from_vec(1, h.0.len(), h.0.clone()));
        let c = self.condition_tape(&mut t, hv, &[seats]);
        LatentState(t.value(c).data.clone())
    }

    /// All heads on a conditioned latent, normalized over `num_players` seats.
    pub fn predict(&self, h_cond: &LatentState, num_players: usize) -> PredictionOutput {
        let mut t = Tape::new(&self.store);
        let hv = t.input(Tensor::from_vec(1, h_cond.0.len(), h_cond.0.clone()));
        let heads = self.heads_tape(&mut t, hv, HeadSet::ALL);
        self.decode_heads(&t, heads, 0, num_players)
    }

    /// Softmaxed outputs for row `row` of a head batch.
    pub fn decode_heads(&self, t: &Tape<'_>, heads: HeadVars, row: usize, num_players: usize) -> PredictionOutput {
        let p = self.config.max_players;
        let policy_logits = t.value(heads.policy).row(row).to_vec();
        let value_dist = softmax(t.value(heads.value).row(row));
        let seat_mask: Vec<bool> = (0..p).map(|s| s < num_players).collect();
        let winner_dist = heads
            .winner
            .map(|w| masked_softmax(t.value(w).row(row), &seat_mask)[..num_players].to_vec())
            .unwrap_or_default();
        let rank_dist = heads
            .rank
            .map(|r| {
                (0..num_players)
                    .map(|s| masked_softmax(t.value(r).row(row * p + s), &seat_mask)[..num_players].to_vec())
                    .collect()
            })
            .unwrap_or_default();
        PredictionOutput { policy_logits, value_dist, winner_dist, rank_dist }
    }
}

/// Seat-relative index of `seat` from `ego`'s point of view.
pub fn relative_seat(seat: usize, ego: usize, num_players: usize) -> usize {
    (seat + num_players - ego) % num_players
}
