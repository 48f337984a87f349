//! Per-ego partial observation as typed tokens, plus the public projection of
//! events and views that every outbound payload goes through.
//!
//! Sequence layout, before the network's CLS token: `12 * n` board tokens
//! (ego's grid first, then the following seats), one discard token, one
//! global token, [`HISTORY_TOKENS`] history tokens (left-padded, most recent
//! last) and one decision token.

use crate::card::{Card, Cell, Position, CARD_VALUES, CELLS, DECK_SIZE};
use crate::engine::{ActionMask, Event, GameState, Phase, Ranking, RoundResult, Source, StepEvents, MAX_PLAYERS};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};

/// Bumped whenever token features or vocabularies change.
pub const SCHEMA_VERSION: u32 = 1;
pub const HISTORY_TOKENS: usize = 16;

/// Card-value slot for face-down or otherwise unseen cards.
pub const UNKNOWN: usize = CARD_VALUES;
/// Player slot used only by history padding.
pub const PAD_PLAYER: usize = MAX_PLAYERS;
pub const NO_POSITION: usize = CELLS;
pub const MAX_STEP_FEATURE: usize = 1000;
pub const MAX_ROUND_FEATURE: usize = 31;

/// Tokens for `n` players, excluding CLS.
pub fn sequence_len(num_players: usize) -> usize {
    CELLS * num_players + 1 + 1 + HISTORY_TOKENS + 1
}

fn card_slot(card: Option<Card>) -> usize {
    card.map_or(UNKNOWN, Card::index)
}

fn seat(player: usize, ego: usize, n: usize) -> usize {
    (player + n - ego) % n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RoundBucket {
    Early,
    Mid,
    Late,
}

impl RoundBucket {
    /// Early below 30 round steps, mid below 70, late after.
    pub fn from_round_step(step: u32) -> RoundBucket {
        match step {
            0..30 => RoundBucket::Early,
            30..70 => RoundBucket::Mid,
            _ => RoundBucket::Late,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HistoryKind {
    TakeDiscard,
    DrawDeck,
    Keep,
    Discard,
    Replace,
    Flip,
}

/// Public record of one decision. Values are `None` when they were not revealed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub actor: usize,
    pub kind: HistoryKind,
    pub source: Option<Source>,
    pub target: Option<Position>,
    pub value_a: Option<Card>,
    pub value_b: Option<Card>,
}

impl HistoryEntry {
    /// What every player learns from `step`.
    pub fn public(step: &StepEvents) -> HistoryEntry {
        let mut entry = HistoryEntry {
            actor: step.actor,
            kind: HistoryKind::DrawDeck,
            source: None,
            target: None,
            value_a: None,
            value_b: None,
        };
        for event in &step.events {
            match *event {
                Event::TookDiscard { card } => {
                    entry.kind = HistoryKind::TakeDiscard;
                    entry.source = Some(Source::Discard);
                    entry.value_a = Some(card);
                }
                Event::DrewFromDeck { .. } => {
                    entry.kind = HistoryKind::DrawDeck;
                    entry.source = Some(Source::Deck);
                }
                Event::KeptDrawn { .. } => entry.kind = HistoryKind::Keep,
                Event::DiscardedDrawn { card } => {
                    entry.kind = HistoryKind::Discard;
                    entry.value_a = Some(card);
                }
                Event::Replaced { pos, placed, replaced, from } => {
                    entry.kind = HistoryKind::Replace;
                    entry.source = Some(from);
                    entry.target = Some(pos);
                    entry.value_a = Some(placed);
                    entry.value_b = Some(replaced);
                }
                Event::Flipped { pos, card } => {
                    entry.kind = HistoryKind::Flip;
                    entry.target = Some(pos);
                    entry.value_a = Some(card);
                }
                _ => {}
            }
        }
        entry
    }
}

/// Ring of the last [`HISTORY_TOKENS`] public decisions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct History {
    entries: VecDeque<HistoryEntry>,
}

impl History {
    pub fn new() -> History {
        History::default()
    }

    pub fn push(&mut self, step: &StepEvents) {
        if self.entries.len() == HISTORY_TOKENS {
            self.entries.pop_front();
        }
        self.entries.push_back(HistoryEntry::public(step));
    }

    pub fn entries(&self) -> impl Iterator<Item = &HistoryEntry> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Exactly [`HISTORY_TOKENS`] tokens, PAD first, actors seat-relative to `ego`.
    pub fn tokens(&self, ego: usize, num_players: usize) -> Vec<Token> {
        let pad = HISTORY_TOKENS - self.entries.len();
        let mut out = vec![Token::HISTORY_PAD; pad];
        out.extend(self.entries.iter().map(|e| Token::History {
            actor: seat(e.actor, ego, num_players) as u8,
            kind: e.kind as u8,
            source: match e.source {
                None => 0,
                Some(Source::Deck) => 1,
                Some(Source::Discard) => 2,
            },
            target: e.target.map_or(NO_POSITION, Position::index) as u8,
            value_a: card_slot(e.value_a) as u8,
            value_b: card_slot(e.value_b) as u8,
        }));
        out
    }
}

/// Pure form of [`History::push`].
pub fn history_push(mut history: History, step: &StepEvents) -> History {
    history.push(step);
    history
}

/// A token with every feature already mapped to its vocabulary index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Token {
    Board { owner: u8, position: u8, visible: bool, value: u8, removed: bool },
    Discard { top: u8, size: u8 },
    Global { deck_size: u8, step: u16, current: u8, phase: u8, bucket: u8, round: u8 },
    History { actor: u8, kind: u8, source: u8, target: u8, value_a: u8, value_b: u8 },
    Decision { phase: u8, mode: u8, drawn: u8 },
}

impl Token {
    pub const HISTORY_PAD: Token = Token::History {
        actor: PAD_PLAYER as u8,
        kind: HISTORY_KIND_PAD as u8,
        source: 0,
        target: NO_POSITION as u8,
        value_a: UNKNOWN as u8,
        value_b: UNKNOWN as u8,
    };

    pub fn kind(&self) -> TokenKind {
        match self {
            Token::Board { .. } => TokenKind::Board,
            Token::Discard { .. } => TokenKind::Discard,
            Token::Global { .. } => TokenKind::Global,
            Token::History { .. } => TokenKind::History,
            Token::Decision { .. } => TokenKind::Decision,
        }
    }

    /// Calls `f` with each (feature, vocabulary index) pair of the token.
    pub fn for_each_feature(&self, mut f: impl FnMut(Feature, usize)) {
        use Feature::*;
        match *self {
            Token::Board { owner, position, visible, value, removed } => {
                f(BoardOwner, owner as usize);
                f(BoardPosition, position as usize);
                f(BoardVisible, visible as usize);
                f(BoardValue, value as usize);
                f(BoardRemoved, removed as usize);
            }
            Token::Discard { top, size } => {
                f(DiscardTop, top as usize);
                f(DiscardSize, size as usize);
            }
            Token::Global { deck_size, step, current, phase, bucket, round } => {
                f(GlobalDeckSize, deck_size as usize);
                f(GlobalStep, step as usize);
                f(GlobalCurrent, current as usize);
                f(GlobalPhase, phase as usize);
                f(GlobalBucket, bucket as usize);
                f(GlobalRound, round as usize);
            }
            Token::History { actor, kind, source, target, value_a, value_b } => {
                f(HistoryActor, actor as usize);
                f(HistoryKindF, kind as usize);
                f(HistorySource, source as usize);
                f(HistoryTarget, target as usize);
                f(HistoryValueA, value_a as usize);
                f(HistoryValueB, value_b as usize);
            }
            Token::Decision { phase, mode, drawn } => {
                f(DecisionPhase, phase as usize);
                f(DecisionMode, mode as usize);
                f(DecisionDrawn, drawn as usize);
            }
        }
    }
}

pub const HISTORY_KIND_PAD: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    Cls,
    Board,
    Discard,
    Global,
    History,
    Decision,
}

impl TokenKind {
    pub const COUNT: usize = 6;
}

/// Every embedded feature. One embedding table per variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Feature {
    BoardOwner,
    BoardPosition,
    BoardVisible,
    BoardValue,
    BoardRemoved,
    DiscardTop,
    DiscardSize,
    GlobalDeckSize,
    GlobalStep,
    GlobalCurrent,
    GlobalPhase,
    GlobalBucket,
    GlobalRound,
    HistoryActor,
    HistoryKindF,
    HistorySource,
    HistoryTarget,
    HistoryValueA,
    HistoryValueB,
    DecisionPhase,
    DecisionMode,
    DecisionDrawn,
}

impl Feature {
    pub const ALL: [Feature; 22] = {
        use Feature::*;
        [
            BoardOwner, BoardPosition, BoardVisible, BoardValue, BoardRemoved, DiscardTop, DiscardSize,
            GlobalDeckSize, GlobalStep, GlobalCurrent, GlobalPhase, GlobalBucket, GlobalRound, HistoryActor,
            HistoryKindF, HistorySource, HistoryTarget, HistoryValueA, HistoryValueB, DecisionPhase,
            DecisionMode, DecisionDrawn,
        ]
    };

    pub fn name(self) -> &'static str {
        use Feature::*;
        match self {
            BoardOwner => "board.owner",
            BoardPosition => "board.position",
            BoardVisible => "board.visible",
            BoardValue => "board.value",
            BoardRemoved => "board.removed",
            DiscardTop => "discard.top",
            DiscardSize => "discard.size",
            GlobalDeckSize => "global.deck_size",
            GlobalStep => "global.step",
            GlobalCurrent => "global.current",
            GlobalPhase => "global.phase",
            GlobalBucket => "global.round_bucket",
            GlobalRound => "global.round",
            HistoryActor => "history.actor",
            HistoryKindF => "history.kind",
            HistorySource => "history.source",
            HistoryTarget => "history.target",
            HistoryValueA => "history.value_a",
            HistoryValueB => "history.value_b",
            DecisionPhase => "decision.phase",
            DecisionMode => "decision.mode",
            DecisionDrawn => "decision.drawn",
        }
    }

    pub fn vocab(self) -> usize {
        use Feature::*;
        let card = CARD_VALUES + 1;
        let player = MAX_PLAYERS + 1;
        match self {
            BoardOwner | GlobalCurrent | HistoryActor => player,
            BoardPosition => CELLS,
            BoardVisible | BoardRemoved => 2,
            BoardValue | DiscardTop | HistoryValueA | HistoryValueB | DecisionDrawn => card,
            DiscardSize | GlobalDeckSize => DECK_SIZE + 1,
            GlobalStep => MAX_STEP_FEATURE + 1,
            GlobalPhase | DecisionPhase | GlobalBucket => 3,
            GlobalRound => MAX_ROUND_FEATURE + 1,
            HistoryKindF => HISTORY_KIND_PAD + 1,
            HistorySource => 3,
            HistoryTarget => CELLS + 1,
            DecisionMode => 4,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Feature name to cardinality, consumed by the embedding layers.
pub fn vocabulary_sizes() -> BTreeMap<&'static str, usize> {
    Feature::ALL.iter().map(|f| (f.name(), f.vocab())).collect()
}

/// One row of the documented token schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaRow {
    pub feature: String,
    pub index: usize,
    pub vocab: usize,
}

pub fn schema_table() -> Vec<SchemaRow> {
    Feature::ALL
        .iter()
        .map(|f| SchemaRow { feature: f.name().to_string(), index: f.index(), vocab: f.vocab() })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ego: usize,
    pub num_players: usize,
    pub schema_version: u32,
    pub tokens: Vec<Token>,
}

/// Decision-token mode: what the pending position choice will do.
fn decision_mode(state: &GameState) -> usize {
    match (state.phase(), state.pending_flip(), state.drawn_card()) {
        (Phase::ChoosePosition, true, _) => 3,
        (Phase::ChoosePosition, false, Some(_)) => 1,
        (Phase::ChoosePosition, false, None) => 2,
        _ => 0,
    }
}

/// The observation `ego` is entitled to: hidden cards become UNKNOWN and a
/// deck-drawn card is visible only to the player who drew it.
pub fn encode_observation(state: &GameState, ego: usize) -> TokenSequence {
    let n = state.num_players();
    assert!(ego < n, "ego {ego} out of range for {n} players");
    let mut tokens = Vec::with_capacity(sequence_len(n));
    for rel in 0..n {
        let grid = state.grid((ego + rel) % n);
        for pos in Position::all() {
            let cell = grid.cell(pos);
            tokens.push(Token::Board {
                owner: rel as u8,
                position: pos.index() as u8,
                visible: cell.is_visible(),
                value: card_slot(cell.is_visible().then_some(cell.card)) as u8,
                removed: cell.removed,
            });
        }
    }
    tokens.push(Token::Discard {
        top: card_slot(state.discard_top()) as u8,
        size: state.discard().len().min(DECK_SIZE) as u8,
    });
    tokens.push(Token::Global {
        deck_size: state.deck().len().min(DECK_SIZE) as u8,
        step: (state.step_count() as usize).min(MAX_STEP_FEATURE) as u16,
        current: seat(state.current_player(), ego, n) as u8,
        phase: state.phase().index() as u8,
        bucket: RoundBucket::from_round_step(state.round_step()) as u8,
        round: (state.round_index() as usize).min(MAX_ROUND_FEATURE) as u8,
    });
    let mut history = History::new();
    for step in state.recent_events() {
        history.push(step);
    }
    tokens.extend(history.tokens(ego, n));
    tokens.push(Token::Decision {
        phase: state.phase().index() as u8,
        mode: decision_mode(state) as u8,
        drawn: card_slot(visible_pending_card(state, ego)) as u8,
    });
    TokenSequence { ego, num_players: n, schema_version: SCHEMA_VERSION, tokens }
}

/// The card awaiting a decision, if `ego` may see it.
fn visible_pending_card(state: &GameState, ego: usize) -> Option<Card> {
    match state.drawn_card() {
        Some(card) => (ego == state.current_player()).then_some(card),
        None => state.card_to_place(),
    }
}

/// Same mask as the engine; the encoding layer owns the 16-slot index space.
pub fn legal_mask(state: &GameState) -> ActionMask {
    state.legal_actions()
}

/// Events as `ego` is allowed to see them.
pub fn public_events(step: &StepEvents, ego: usize) -> Vec<Event> {
    step.events
        .iter()
        .filter_map(|e| match e {
            Event::DrewFromDeck { .. } | Event::KeptDrawn { .. } if ego != step.actor => None,
            other => Some(other.clone()),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellView {
    /// `None` while face-down.
    pub value: Option<i8>,
    pub face_up: bool,
    pub removed: bool,
}

/// Everything a client seated at `ego` may be shown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicView {
    pub ego: usize,
    pub num_players: usize,
    pub current_player: usize,
    pub phase: Phase,
    pub pending_flip: bool,
    /// Indexed by absolute player.
    pub grids: Vec<Vec<CellView>>,
    pub discard_top: Option<i8>,
    pub discard_size: usize,
    pub deck_size: usize,
    pub pending_card: Option<i8>,
    pub cumulative_scores: Vec<i32>,
    pub round_index: u32,
    pub step_count: u32,
    pub round_trigger: Option<usize>,
    /// Set only when `ego` is to move.
    pub legal_mask: Option<Vec<bool>>,
    pub history: Vec<HistoryEntry>,
    pub last_round: Option<RoundResult>,
    pub ranking: Option<Ranking>,
    pub truncated: bool,
}

impl PublicView {
    pub fn new(state: &GameState, ego: usize) -> PublicView {
        let grids = state
            .grids()
            .iter()
            .map(|g| {
                g.cells()
                    .iter()
                    .map(|c: &Cell| CellView {
                        value: c.is_visible().then(|| c.card.value()),
                        face_up: c.face_up,
                        removed: c.removed,
                    })
                    .collect()
            })
            .collect();
        let mut history = History::new();
        for step in state.recent_events() {
            history.push(step);
        }
        let ranking = state.is_terminal();
        let to_move = ranking.is_none() && state.current_player() == ego;
        PublicView {
            ego,
            num_players: state.num_players(),
            current_player: state.current_player(),
            phase: state.phase(),
            pending_flip: state.pending_flip(),
            grids,
            discard_top: state.discard_top().map(Card::value),
            discard_size: state.discard().len(),
            deck_size: state.deck().len(),
            pending_card: visible_pending_card(state, ego).map(Card::value),
            cumulative_scores: state.cumulative_scores().to_vec(),
            round_index: state.round_index(),
            step_count: state.step_count(),
            round_trigger: state.round_trigger(),
            legal_mask: to_move.then(|| state.legal_actions().to_array().to_vec()),
            history: history.entries().copied().collect(),
            last_round: state.last_round().cloned(),
            ranking,
            truncated: state.is_truncated(),
        }
    }
}

