//! One human-vs-agent game. The session owns the engine state; every
//! outbound payload goes through the human's privacy projection.

use crate::checkpoints::{CheckpointError, CheckpointStore};
use crate::protocol::{
    mask_vec, AnalysisPayload, CreateRequest, EventsPayload, Frame, RejectPayload, TerminalPayload, ThinkingPayload,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use skyjo_core::encoding::{encode_observation, public_events, PublicView};
use skyjo_core::{Action, GameState, StepEvents, ACTION_COUNT, MAX_PLAYERS, MIN_PLAYERS};
use skyjo_muzero::agent::{Decision, Player};
use skyjo_muzero::nets::{relative_seat, Seats};
use std::sync::Arc;
use thiserror::Error;

const AGENT_SALT: u64 = 0x5eed_a9e7_0c0f_fee5;

#[derive(Debug, Error, PartialEq)]
pub enum SessionError {
    #[error("num_players must be {MIN_PLAYERS}..={MAX_PLAYERS}, got {0}")]
    PlayerCount(usize),
    #[error("human_seat {seat} out of range for {players} players")]
    Seat { seat: usize, players: usize },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    checkpoint: String,
    human: usize,
    seed: u64,
    state: GameState,
    agent: Arc<Player>,
    rng: ChaCha8Rng,
    seq: u64,
    log: Vec<Frame>,
    actions: Vec<Action>,
    human_actions: Vec<Action>,
    analysis: Vec<AnalysisPayload>,
}

/// An agent decision to compute away from the session loop.
#[derive(Debug, Clone)]
pub struct AgentTurn {
    state: GameState,
    agent: Arc<Player>,
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone)]
pub struct AgentMove {
    decision: Decision,
    win_probabilities: Option<Vec<f32>>,
    rng: ChaCha8Rng,
}

impl AgentTurn {
    /// Greedy choice from the agent's own observation, plus its winner-head reading.
    pub fn run(mut self) -> AgentMove {
        let decision = self.agent.decide(&self.state, Some(0.0), &mut self.rng);
        let win_probabilities = match self.agent.as_ref() {
            Player::Mcts(m) => {
                let s = &self.state;
                let (ego, n) = (s.current_player(), s.num_players());
                let h = m.nets.represent(&encode_observation(s, ego));
                let out = m.nets.predict(&m.nets.ego_condition(&h, Seats { ego, current: ego, num_players: n }), n);
                Some((0..n).map(|p| out.winner_dist[relative_seat(p, ego, n)]).collect())
            }
            Player::Bot(_) => None,
        };
        AgentMove { decision, win_probabilities, rng: self.rng }
    }
}

impl Session {
    pub fn open(id: &str, req: &CreateRequest, store: &CheckpointStore) -> Result<Session, SessionError> {
        if !(MIN_PLAYERS..=MAX_PLAYERS).contains(&req.num_players) {
            return Err(SessionError::PlayerCount(req.num_players));
        }
        if req.human_seat >= req.num_players {
            return Err(SessionError::Seat { seat: req.human_seat, players: req.num_players });
        }
        let agent = store.agent(&req.checkpoint)?;
        let seed = req.seed.unwrap_or_else(rand::random);
        Ok(Session {
            id: id.to_string(),
            checkpoint: req.checkpoint.clone(),
            human: req.human_seat,
            seed,
            state: GameState::new(req.num_players, seed).expect("player count checked"),
            agent: Arc::new(agent),
            rng: ChaCha8Rng::seed_from_u64(seed ^ AGENT_SALT),
            seq: 0,
            log: Vec::new(),
            actions: Vec::new(),
            human_actions: Vec::new(),
            analysis: Vec::new(),
        })
    }

    /// Opens the session and plays agent seats up to the human's first decision.
    pub fn create(id: &str, req: &CreateRequest, store: &CheckpointStore) -> Result<(Session, Vec<Frame>), SessionError> {
        let mut s = Session::open(id, req, store)?;
        let frames = s.resolve_agents();
        Ok((s, frames))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn checkpoint(&self) -> &str {
        &self.checkpoint
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn human_seat(&self) -> usize {
        self.human
    }

    /// Full ground truth; never sent to the client.
    pub fn state(&self) -> &GameState {
        &self.state
    }

    /// Every applied action, human and agent, in order.
    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn human_actions(&self) -> &[Action] {
        &self.human_actions
    }

    pub fn analysis(&self) -> &[AnalysisPayload] {
        &self.analysis
    }

    /// Every frame sent so far, in sequence order.
    pub fn log(&self) -> &[Frame] {
        &self.log
    }

    pub fn frames_from(&self, seq: u64) -> Vec<Frame> {
        self.log.iter().filter(|f| f.seq >= seq).cloned().collect()
    }

    pub fn is_over(&self) -> bool {
        self.state.is_over()
    }

    pub fn human_to_move(&self) -> bool {
        !self.state.is_over() && self.state.current_player() == self.human
    }

    pub fn agent_to_move(&self) -> bool {
        !self.state.is_over() && self.state.current_player() != self.human
    }

    pub fn view(&self) -> PublicView {
        PublicView::new(&self.state, self.human)
    }

    fn emit(&mut self, kind: &str, payload: impl serde::Serialize) -> Frame {
        let f = Frame::new(kind, Some(&self.id), payload, self.seq);
        self.seq += 1;
        self.log.push(f.clone());
        f
    }

    fn events_frame(&mut self, step: &StepEvents) -> Frame {
        let payload =
            EventsPayload { actor: step.actor, action: step.action, phase: step.phase, events: public_events(step, self.human) };
        self.emit("events", payload)
    }

    fn reject(&mut self, action: i64, reason: &str) -> Frame {
        let legal_mask = if self.human_to_move() { mask_vec(self.state.legal_actions()) } else { vec![false; ACTION_COUNT] };
        self.emit("reject", RejectPayload { action, reason: reason.to_string(), legal_mask })
    }

    /// The closing frames once control returns to the human: the view, and
    /// the ranking if the game has ended.
    pub fn settle(&mut self) -> Vec<Frame> {
        let mut out = vec![self.emit("view", self.view())];
        if let Some(ranking) = self.state.is_terminal() {
            let payload = TerminalPayload {
                cumulative_scores: self.state.cumulative_scores().to_vec(),
                truncated: self.state.is_truncated(),
                ranking,
            };
            out.push(self.emit("terminal", payload));
        }
        out
    }

    /// Applies the human's move or rejects it and leaves the state untouched.
    /// Returns the emitted frames and whether the action was applied.
    pub fn apply_human(&mut self, action: i64) -> (Vec<Frame>, bool) {
        if self.state.is_over() {
            return (vec![self.reject(action, "game over")], false);
        }
        if !self.human_to_move() {
            return (vec![self.reject(action, "not your turn")], false);
        }
        let Some(a) = usize::try_from(action).ok().and_then(|i| Action::new(i).ok()) else {
            return (vec![self.reject(action, "action index out of range")], false);
        };
        if !self.state.legal_actions().contains(a) {
            return (vec![self.reject(action, "illegal action")], false);
        }
        let step = self.state.step(a).expect("legality checked");
        self.actions.push(a);
        self.human_actions.push(a);
        (vec![self.events_frame(&step)], true)
    }

    /// Starts an agent move: emits `thinking` and hands out the search job.
    pub fn begin_agent_turn(&mut self) -> (Frame, AgentTurn) {
        assert!(self.agent_to_move(), "agent turn while the human is to move");
        let f = self.emit("thinking", ThinkingPayload { player: self.state.current_player() });
        let turn = AgentTurn { state: self.state.clone(), agent: self.agent.clone(), rng: self.rng.clone() };
        (f, turn)
    }

    pub fn finish_agent_turn(&mut self, mv: AgentMove) -> Vec<Frame> {
        let player = self.state.current_player();
        let step = self.state.step(mv.decision.action).expect("agents choose legal actions");
        self.rng = mv.rng;
        self.actions.push(mv.decision.action);
        let analysis = AnalysisPayload {
            player,
            action: mv.decision.action,
            visit_distribution: mv.decision.policy.iter().map(|&p| p as f64).collect(),
            root_value: mv.decision.root_value,
            win_probabilities: mv.win_probabilities,
        };
        self.analysis.push(analysis.clone());
        vec![self.events_frame(&step), self.emit("analysis", analysis)]
    }

    /// Plays agent seats until the human must act or the game ends.
    pub fn resolve_agents(&mut self) -> Vec<Frame> {
        let mut out = Vec::new();
        while self.agent_to_move() {
            let (thinking, turn) = self.begin_agent_turn();
            out.push(thinking);
            out.extend(self.finish_agent_turn(turn.run()));
        }
        out.extend(self.settle());
        out
    }

    /// Human move followed by the agents' replies.
    pub fn submit(&mut self, action: i64) -> Vec<Frame> {
        let (mut out, applied) = self.apply_human(action);
        if applied {
            out.extend(self.resolve_agents());
        }
        out
    }
}
