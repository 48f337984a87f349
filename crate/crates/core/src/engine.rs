//! Skyjo rules as a pure state machine over decision-granularity actions.
//!
//! A turn is split into up to three decisions: choose a source (take the
//! discard or draw from the deck), keep or discard a deck-drawn card, and
//! choose a grid position to replace or flip. Every decision is one [`Action`]
//! in a fixed 16-slot index space.

use crate::card::{full_deck, Card, Cell, Grid, Position, CELLS, COLS, DECK_SIZE};
use crate::rng::SplitMix64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::VecDeque;
use std::fmt;
use thiserror::Error;

pub const MIN_PLAYERS: usize = 2;
pub const MAX_PLAYERS: usize = 8;
pub const ACTION_COUNT: usize = 16;
/// Number of most recent [`StepEvents`] kept on the state for the observation history.
pub const HISTORY_LEN: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("player count {0} outside 2..=8")]
    PlayerCount(usize),
    #[error("action index {0} outside 0..16")]
    ActionOutOfRange(usize),
    #[error("action {action} is illegal in phase {phase:?}")]
    IllegalAction { action: usize, phase: Phase },
    #[error("game is already over")]
    Terminal,
    #[error("round is still in progress")]
    RoundInProgress,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    ChooseSource,
    KeepOrDiscard,
    ChoosePosition,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::ChooseSource, Phase::KeepOrDiscard, Phase::ChoosePosition];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Action slots that can ever be legal in this phase.
    pub fn action_range(self) -> std::ops::Range<usize> {
        match self {
            Phase::ChooseSource => 0..2,
            Phase::KeepOrDiscard => 2..4,
            Phase::ChoosePosition => 4..16,
        }
    }
}

/// One decision. 0 take discard, 1 draw deck, 2 keep drawn, 3 discard drawn
/// (then flip), 4..=15 grid position `4 + row * 4 + col`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Action(u8);

impl Action {
    pub const TAKE_DISCARD: Action = Action(0);
    pub const DRAW_DECK: Action = Action(1);
    pub const KEEP: Action = Action(2);
    pub const DISCARD: Action = Action(3);

    pub fn new(index: usize) -> Result<Action, EngineError> {
        if index < ACTION_COUNT {
            Ok(Action(index as u8))
        } else {
            Err(EngineError::ActionOutOfRange(index))
        }
    }

    pub fn at(pos: Position) -> Action {
        Action(4 + pos.index() as u8)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn position(self) -> Option<Position> {
        self.index().checked_sub(4).and_then(Position::new)
    }

    pub fn all() -> impl Iterator<Item = Action> {
        (0..ACTION_COUNT as u8).map(Action)
    }
}

impl TryFrom<u8> for Action {
    type Error = EngineError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Action::new(value as usize)
    }
}

impl From<Action> for u8 {
    fn from(a: Action) -> u8 {
        a.0
    }
}

/// 16-bit legality mask over the action space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ActionMask(u16);

impl ActionMask {
    pub const EMPTY: ActionMask = ActionMask(0);

    pub fn from_bits(bits: u16) -> ActionMask {
        ActionMask(bits)
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn set(&mut self, action: Action) {
        self.0 |= 1 << action.index();
    }

    pub fn contains(self, action: Action) -> bool {
        self.get(action.index())
    }

    pub fn get(self, index: usize) -> bool {
        index < ACTION_COUNT && self.0 & (1 << index) != 0
    }

    pub fn count(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Action> {
        Action::all().filter(move |a| self.contains(*a))
    }

    pub fn to_array(self) -> [bool; ACTION_COUNT] {
        std::array::from_fn(|i| self.get(i))
    }

    /// Mask of every action slot belonging to `phase`.
    pub fn for_phase(phase: Phase) -> ActionMask {
        let mut mask = ActionMask::EMPTY;
        for i in phase.action_range() {
            mask.0 |= 1 << i;
        }
        mask
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    Deck,
    Discard,
}

/// Rule switches. The defaults follow standard Skyjo practice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rules {
    /// Double the round-ender's score even when it is zero or negative.
    pub double_non_positive: bool,
    /// Decision steps after which the game is truncated and scored as is.
    pub max_steps: u32,
    /// Cumulative score that ends the game.
    pub end_score: i32,
}

impl Default for Rules {
    fn default() -> Self {
        Rules { double_non_positive: false, max_steps: 1000, end_score: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RoundResult {
    /// Round score per player after doubling.
    pub scores: Vec<i32>,
    pub doubled: Vec<bool>,
    pub trigger_player: usize,
    /// Cards turned face-up by the end-of-round reveal.
    pub revealed: Vec<(usize, Position, Card)>,
    pub cumulative: Vec<i32>,
}

/// Final standings. `ranks` are 1-based and tied players share the better rank.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ranking {
    /// Player indices sorted by ascending cumulative score (stable on ties).
    pub order: Vec<usize>,
    pub ranks: Vec<usize>,
    pub scores: Vec<i32>,
}

impl Ranking {
    pub fn from_scores(scores: &[i32]) -> Ranking {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by_key(|&p| scores[p]);
        let ranks = scores
            .iter()
            .map(|&s| 1 + scores.iter().filter(|&&o| o < s).count())
            .collect();
        Ranking { order, ranks, scores: scores.to_vec() }
    }

    pub fn winners(&self) -> Vec<usize> {
        (0..self.ranks.len()).filter(|&p| self.ranks[p] == 1).collect()
    }

    pub fn is_draw(&self) -> bool {
        self.winners().len() > 1
    }
}

/// Consequences of one action. `DrewFromDeck` and `KeptDrawn` carry a card
/// only the actor may see; everything else is public.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    TookDiscard { card: Card },
    Reshuffled { deck_size: usize },
    DrewFromDeck { card: Card },
    KeptDrawn { card: Card },
    DiscardedDrawn { card: Card },
    Replaced { pos: Position, placed: Card, replaced: Card, from: Source },
    Flipped { pos: Position, card: Card },
    ColumnRemoved { player: usize, col: usize, card: Card },
    RoundTriggered { player: usize },
    RoundEnded { result: RoundResult },
    NewRound { round_index: u32, first_player: usize, reveals: Vec<(usize, Position, Card)> },
    GameOver { ranking: Ranking, truncated: bool },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StepEvents {
    pub actor: usize,
    pub action: Action,
    pub phase: Phase,
    pub events: Vec<Event>,
}

/// Full hidden ground truth of a match.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameState {
    pub(crate) num_players: usize,
    pub(crate) grids: Vec<Grid>,
    /// Top of deck is the last element.
    pub(crate) deck: Vec<Card>,
    /// Top of discard is the last element.
    pub(crate) discard: Vec<Card>,
    pub(crate) current_player: usize,
    pub(crate) phase: Phase,
    pub(crate) drawn_card: Option<Card>,
    pub(crate) pending_flip: bool,
    pub(crate) round_index: u32,
    pub(crate) round_start_step: u32,
    pub(crate) cumulative_scores: Vec<i32>,
    pub(crate) round_trigger: Option<usize>,
    pub(crate) final_turns_remaining: Option<usize>,
    pub(crate) step_count: u32,
    pub(crate) game_over: bool,
    pub(crate) truncated: bool,
    pub(crate) last_round: Option<RoundResult>,
    pub(crate) recent: VecDeque<StepEvents>,
    pub(crate) rules: Rules,
    pub(crate) seed: u64,
    pub(crate) rng: SplitMix64,
}

impl GameState {
    pub fn new(num_players: usize, seed: u64) -> Result<GameState, EngineError> {
        GameState::with_rules(num_players, seed, Rules::default())
    }

    pub fn with_rules(num_players: usize, seed: u64, rules: Rules) -> Result<GameState, EngineError> {
        if !(MIN_PLAYERS..=MAX_PLAYERS).contains(&num_players) {
            return Err(EngineError::PlayerCount(num_players));
        }
        let mut state = GameState {
            num_players,
            grids: Vec::with_capacity(num_players),
            deck: full_deck(),
            discard: Vec::new(),
            current_player: 0,
            phase: Phase::ChooseSource,
            drawn_card: None,
            pending_flip: false,
            round_index: 0,
            round_start_step: 0,
            cumulative_scores: vec![0; num_players],
            round_trigger: None,
            final_turns_remaining: None,
            step_count: 0,
            game_over: false,
            truncated: false,
            last_round: None,
            recent: VecDeque::with_capacity(HISTORY_LEN),
            rules,
            seed,
            rng: SplitMix64::new(seed),
        };
        state.deal_round();
        Ok(state)
    }

    pub fn num_players(&self) -> usize {
        self.num_players
    }

    pub fn grid(&self, player: usize) -> &Grid {
        &self.grids[player]
    }

    pub fn grids(&self) -> &[Grid] {
        &self.grids
    }

    pub fn deck(&self) -> &[Card] {
        &self.deck
    }

    pub fn discard(&self) -> &[Card] {
        &self.discard
    }

    pub fn discard_top(&self) -> Option<Card> {
        self.discard.last().copied()
    }

    pub fn current_player(&self) -> usize {
        self.current_player
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// The deck-drawn card awaiting a decision. Hidden from everyone but the actor.
    pub fn drawn_card(&self) -> Option<Card> {
        self.drawn_card
    }

    pub fn pending_flip(&self) -> bool {
        self.pending_flip
    }

    /// Card that will land on the grid in a replace decision.
    pub fn card_to_place(&self) -> Option<Card> {
        match (self.phase, self.pending_flip) {
            (Phase::ChoosePosition, false) => self.drawn_card.or(self.discard_top()),
            _ => None,
        }
    }

    pub fn round_index(&self) -> u32 {
        self.round_index
    }

    /// Decisions taken since the current round was dealt.
    pub fn round_step(&self) -> u32 {
        self.step_count - self.round_start_step
    }

    pub fn cumulative_scores(&self) -> &[i32] {
        &self.cumulative_scores
    }

    pub fn round_trigger(&self) -> Option<usize> {
        self.round_trigger
    }

    pub fn final_turns_remaining(&self) -> Option<usize> {
        self.final_turns_remaining
    }

    pub fn step_count(&self) -> u32 {
        self.step_count
    }

    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    pub fn last_round(&self) -> Option<&RoundResult> {
        self.last_round.as_ref()
    }

    pub fn recent_events(&self) -> &VecDeque<StepEvents> {
        &self.recent
    }

    pub fn rules(&self) -> Rules {
        self.rules
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Total cards across deck, discard, grids and the drawn card. Always 150.
    pub fn card_count(&self) -> usize {
        self.deck.len()
            + self.discard.len()
            + self.drawn_card.iter().count()
            + self.grids.iter().map(Grid::remaining_count).sum::<usize>()
    }

    /// Legal actions for the player to move. Empty once the game is over.
    pub fn legal_actions(&self) -> ActionMask {
        let mut mask = ActionMask::EMPTY;
        if self.game_over {
            return mask;
        }
        let grid = &self.grids[self.current_player];
        match self.phase {
            Phase::ChooseSource => {
                if !self.discard.is_empty() {
                    mask.set(Action::TAKE_DISCARD);
                }
                if !self.deck.is_empty() || self.discard.len() > 1 {
                    mask.set(Action::DRAW_DECK);
                }
            }
            Phase::KeepOrDiscard => {
                mask.set(Action::KEEP);
                if grid.hidden_count() > 0 {
                    mask.set(Action::DISCARD);
                }
            }
            Phase::ChoosePosition => {
                let target: fn(&Cell) -> bool = if self.pending_flip { Cell::is_hidden } else { |c| !c.removed };
                for p in grid.positions_where(target) {
                    mask.set(Action::at(p));
                }
            }
        }
        mask
    }

    /// Pure transition: returns the successor and leaves `self` untouched.
    pub fn apply_action(&self, action: Action) -> Result<(GameState, StepEvents), EngineError> {
        let mut next = self.clone();
        let events = next.step(action)?;
        Ok((next, events))
    }

    /// In-place transition. On error the state is unchanged.
    pub fn step(&mut self, action: Action) -> Result<StepEvents, EngineError> {
        if self.game_over {
            return Err(EngineError::Terminal);
        }
        if !self.legal_actions().contains(action) {
            return Err(EngineError::IllegalAction { action: action.index(), phase: self.phase });
        }
        let actor = self.current_player;
        let phase = self.phase;
        let mut events = Vec::new();
        self.step_count += 1;

        match phase {
            Phase::ChooseSource if action == Action::TAKE_DISCARD => {
                let card = *self.discard.last().expect("discard is never empty at source choice");
                events.push(Event::TookDiscard { card });
                self.phase = Phase::ChoosePosition;
                self.pending_flip = false;
            }
            Phase::ChooseSource => {
                if self.deck.is_empty() {
                    self.reshuffle_discard();
                    events.push(Event::Reshuffled { deck_size: self.deck.len() });
                }
                let card = self.deck.pop().expect("draw is legal only with cards available");
                self.drawn_card = Some(card);
                events.push(Event::DrewFromDeck { card });
                self.phase = Phase::KeepOrDiscard;
            }
            Phase::KeepOrDiscard if action == Action::KEEP => {
                let card = self.drawn_card.expect("drawn card present in keep-or-discard");
                events.push(Event::KeptDrawn { card });
                self.phase = Phase::ChoosePosition;
                self.pending_flip = false;
            }
            Phase::KeepOrDiscard => {
                let card = self.drawn_card.take().expect("drawn card present in keep-or-discard");
                self.discard.push(card);
                events.push(Event::DiscardedDrawn { card });
                self.phase = Phase::ChoosePosition;
                self.pending_flip = true;
            }
            Phase::ChoosePosition => {
                let pos = action.position().expect("position phase only admits grid actions");
                self.resolve_position(actor, pos, &mut events);
                self.end_turn(&mut events);
            }
        }

        if !self.game_over && self.step_count >= self.rules.max_steps {
            self.game_over = true;
            self.truncated = true;
            events.push(Event::GameOver { ranking: Ranking::from_scores(&self.cumulative_scores), truncated: true });
        }

        let record = StepEvents { actor, action, phase, events };
        if self.recent.len() == HISTORY_LEN {
            self.recent.pop_front();
        }
        self.recent.push_back(record.clone());
        Ok(record)
    }

    fn resolve_position(&mut self, actor: usize, pos: Position, events: &mut Vec<Event>) {
        if self.pending_flip {
            let cell = self.grids[actor].cell_mut(pos);
            cell.face_up = true;
            events.push(Event::Flipped { pos, card: cell.card });
        } else {
            let (placed, from) = match self.drawn_card.take() {
                Some(card) => (card, Source::Deck),
                None => (self.discard.pop().expect("taken discard card still on pile"), Source::Discard),
            };
            let cell = self.grids[actor].cell_mut(pos);
            let replaced = cell.card;
            *cell = Cell { card: placed, face_up: true, removed: false };
            self.discard.push(replaced);
            events.push(Event::Replaced { pos, placed, replaced, from });
        }
        self.pending_flip = false;
        if let Some(cards) = self.grids[actor].try_remove_column(pos.col()) {
            self.discard.extend(cards);
            events.push(Event::ColumnRemoved { player: actor, col: pos.col(), card: cards[0] });
        }
    }

    fn end_turn(&mut self, events: &mut Vec<Event>) {
        let player = self.current_player;
        self.phase = Phase::ChooseSource;
        match self.final_turns_remaining {
            Some(left) => self.final_turns_remaining = Some(left - 1),
            None if self.grids[player].hidden_count() == 0 => {
                self.round_trigger = Some(player);
                self.final_turns_remaining = Some(self.num_players - 1);
                events.push(Event::RoundTriggered { player });
            }
            None => {}
        }
        if self.final_turns_remaining == Some(0) {
            let result = self.score_round().expect("round end condition just reached");
            events.push(Event::RoundEnded { result });
            if self.cumulative_scores.iter().any(|&s| s >= self.rules.end_score) {
                self.game_over = true;
                events.push(Event::GameOver {
                    ranking: Ranking::from_scores(&self.cumulative_scores),
                    truncated: false,
                });
            } else {
                self.round_index += 1;
                let reveals = self.deal_round();
                events.push(Event::NewRound {
                    round_index: self.round_index,
                    first_player: self.current_player,
                    reveals,
                });
            }
        } else {
            self.current_player = (player + 1) % self.num_players;
        }
    }

    /// Reveals every hidden card, scores the round with the doubling rule and
    /// adds it to the cumulative totals. Only valid once the final turns are used up.
    pub fn score_round(&mut self) -> Result<RoundResult, EngineError> {
        let trigger = match (self.round_trigger, self.final_turns_remaining) {
            (Some(t), Some(0)) => t,
            _ => return Err(EngineError::RoundInProgress),
        };
        let mut revealed = Vec::new();
        for (player, grid) in self.grids.iter_mut().enumerate() {
            revealed.extend(grid.reveal_all().into_iter().map(|(pos, card)| (player, pos, card)));
        }
        let mut scores: Vec<i32> = self.grids.iter().map(Grid::visible_sum).collect();
        let mut doubled = vec![false; self.num_players];
        let trigger_score = scores[trigger];
        let strictly_lowest = scores.iter().enumerate().all(|(p, &s)| p == trigger || trigger_score < s);
        if !strictly_lowest && (trigger_score > 0 || self.rules.double_non_positive) {
            scores[trigger] *= 2;
            doubled[trigger] = true;
        }
        for (total, s) in self.cumulative_scores.iter_mut().zip(&scores) {
            *total += s;
        }
        self.round_trigger = None;
        self.final_turns_remaining = None;
        let result = RoundResult {
            scores,
            doubled,
            trigger_player: trigger,
            revealed,
            cumulative: self.cumulative_scores.clone(),
        };
        self.last_round = Some(result.clone());
        Ok(result)
    }

    /// Final ranking once the game has ended (naturally or by truncation).
    pub fn is_terminal(&self) -> Option<Ranking> {
        self.game_over.then(|| Ranking::from_scores(&self.cumulative_scores))
    }

    pub fn is_over(&self) -> bool {
        self.game_over
    }

    /// Digest over every field except the generator state.
    pub fn state_hash(&self) -> u64 {
        let mut canonical = self.clone();
        canonical.rng = SplitMix64::new(0);
        let bytes = serde_json::to_vec(&canonical).expect("game state serializes");
        let digest = Sha256::digest(&bytes);
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }

    /// A state consistent with everything `ego` can observe, with the unseen
    /// cards (face-down cells, deck, another player's drawn card) reshuffled.
    pub fn determinize(&self, ego: usize, seed: u64) -> GameState {
        let mut next = self.clone();
        let drawn_hidden = ego != self.current_player && self.drawn_card.is_some();
        let mut pool: Vec<Card> = next.deck.clone();
        for grid in &next.grids {
            pool.extend(grid.cells().iter().filter(|c| c.is_hidden()).map(|c| c.card));
        }
        if drawn_hidden {
            pool.extend(next.drawn_card);
        }
        SplitMix64::new(seed).shuffle(&mut pool);
        let mut pool = pool.into_iter();
        for card in next.deck.iter_mut() {
            *card = pool.next().unwrap();
        }
        for grid in next.grids.iter_mut() {
            let hidden: Vec<Position> = grid.positions_where(Cell::is_hidden).collect();
            for pos in hidden {
                grid.cell_mut(pos).card = pool.next().unwrap();
            }
        }
        if drawn_hidden {
            next.drawn_card = pool.next();
        }
        next
    }

    fn reshuffle_discard(&mut self) {
        let top = self.discard.pop().expect("discard has a top card");
        self.deck.append(&mut self.discard);
        self.rng.shuffle(&mut self.deck);
        self.discard.push(top);
    }

    /// Gathers all 150 cards, shuffles, deals 12 per player, starts the
    /// discard, reveals two random cells per player and picks the opener.
    fn deal_round(&mut self) -> Vec<(usize, Position, Card)> {
        let mut cards = std::mem::take(&mut self.deck);
        cards.append(&mut self.discard);
        cards.extend(self.drawn_card.take());
        for grid in &self.grids {
            cards.extend(grid.cards_on_board());
        }
        debug_assert_eq!(cards.len(), DECK_SIZE);
        self.rng.shuffle(&mut cards);

        let mut reveals = Vec::new();
        self.grids.clear();
        for player in 0..self.num_players {
            let dealt: [Card; CELLS] = std::array::from_fn(|_| cards.pop().unwrap());
            let mut grid = Grid::new(dealt);
            let first = self.rng.below(CELLS);
            let mut second = self.rng.below(CELLS - 1);
            if second >= first {
                second += 1;
            }
            for idx in [first, second] {
                let pos = Position::new(idx).unwrap();
                let cell = grid.cell_mut(pos);
                cell.face_up = true;
                reveals.push((player, pos, cell.card));
            }
            self.grids.push(grid);
        }
        self.discard = vec![cards.pop().unwrap()];
        self.deck = cards;

        let revealed_sum = |p: usize| self.grids[p].visible_sum();
        let mut first_player = 0;
        for p in 1..self.num_players {
            if revealed_sum(p) > revealed_sum(first_player) {
                first_player = p;
            }
        }
        self.current_player = first_player;
        self.phase = Phase::ChooseSource;
        self.pending_flip = false;
        self.round_trigger = None;
        self.final_turns_remaining = None;
        self.round_start_step = self.step_count;
        reveals
    }
}

impl fmt::Display for GameState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "players: {}", self.num_players)?;
        writeln!(f, "round: {}", self.round_index)?;
        writeln!(f, "step: {}", self.step_count)?;
        writeln!(f, "current: {}", self.current_player)?;
        writeln!(f, "phase: {:?}", self.phase)?;
        writeln!(f, "pending_flip: {}", self.pending_flip)?;
        match self.drawn_card {
            Some(c) => writeln!(f, "drawn: {c}")?,
            None => writeln!(f, "drawn: -")?,
        }
        writeln!(f, "deck: {}", self.deck.len())?;
        match self.discard_top() {
            Some(c) => writeln!(f, "discard: {} (top {c})", self.discard.len())?,
            None => writeln!(f, "discard: 0")?,
        }
        writeln!(f, "cumulative: {:?}", self.cumulative_scores)?;
        writeln!(f, "trigger: {:?}", self.round_trigger)?;
        writeln!(f, "final_turns: {:?}", self.final_turns_remaining)?;
        writeln!(f, "over: {} truncated: {}", self.game_over, self.truncated)?;
        for (p, grid) in self.grids.iter().enumerate() {
            writeln!(f, "grid {p}:")?;
            for row in 0..3 {
                let line: Vec<String> = (0..COLS)
                    .map(|col| {
                        let cell = grid.cell(Position::from_row_col(row, col));
                        if cell.removed {
                            "  x".to_string()
                        } else if cell.face_up {
                            format!("{:>3}", cell.card.value())
                        } else {
                            format!("{:>2}?", cell.card.value())
                        }
                    })
                    .collect();
                writeln!(f, "  {}", line.join(" "))?;
            }
        }
        Ok(())
    }
}

