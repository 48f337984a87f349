//! Hand-crafted heuristic opponents and a uniform-random baseline.
//!
//! Each bot answers four questions: which source to take, whether to keep a
//! deck-drawn card, where to place a card and which cell to flip. Anything a
//! rule proposes that is not legal falls back to a uniform legal action.

use crate::card::{Card, Cell, Grid, Position, ROWS};
use crate::engine::{Action, GameState, Phase};
use rand::seq::IteratorRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BotKind {
    GreedyValue,
    InfoFirst,
    ColumnHunter,
    RiskAware,
    EndRoundAggro,
    AntiDiscard,
    Random,
}

impl BotKind {
    pub const ROSTER: [BotKind; 6] = [
        BotKind::GreedyValue,
        BotKind::InfoFirst,
        BotKind::ColumnHunter,
        BotKind::RiskAware,
        BotKind::EndRoundAggro,
        BotKind::AntiDiscard,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BotKind::GreedyValue => "greedy-value",
            BotKind::InfoFirst => "info-first",
            BotKind::ColumnHunter => "column-hunter",
            BotKind::RiskAware => "risk-aware",
            BotKind::EndRoundAggro => "end-round-aggro",
            BotKind::AntiDiscard => "anti-discard",
            BotKind::Random => "random",
        }
    }
}

impl fmt::Display for BotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BotKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BotKind::ROSTER
            .iter()
            .chain(&[BotKind::Random])
            .find(|k| k.name() == s)
            .copied()
            .ok_or_else(|| format!("unknown bot '{s}'"))
    }
}

/// Thresholds used by the rules. Defaults are the documented rule set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BotParams {
    /// greedy-value takes the discard when it undercuts the worst visible card by this much.
    pub greedy_take_margin: i8,
    /// greedy-value and anti-discard keep deck cards up to this value.
    pub greedy_keep_max: i8,
    /// info-first keeps deck cards up to this value.
    pub info_keep_max: i8,
    /// risk-aware only puts cards up to this value on face-down cells.
    pub risk_hidden_max: i8,
    /// risk-aware replaces a visible card only if that gains at least this much.
    pub risk_min_gain: i8,
    /// Expected value of an unseen card when estimating boards (760/150 rounded).
    pub hidden_estimate: i32,
    /// end-round-aggro keeps deck cards up to this value while ahead.
    pub aggro_keep_max: i8,
}

impl Default for BotParams {
    fn default() -> Self {
        BotParams {
            greedy_take_margin: 2,
            greedy_keep_max: 4,
            info_keep_max: 2,
            risk_hidden_max: 5,
            risk_min_gain: 3,
            hidden_estimate: 5,
            aggro_keep_max: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BotPolicy {
    pub kind: BotKind,
    #[serde(default)]
    pub params: BotParams,
}

impl BotPolicy {
    pub fn new(kind: BotKind) -> BotPolicy {
        BotPolicy { kind, params: BotParams::default() }
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn act<R: Rng + ?Sized>(&self, state: &GameState, rng: &mut R) -> Action {
        bot_act(self, state, rng)
    }
}

/// The six curriculum bots in a fixed order (the random baseline is excluded).
pub fn bot_roster() -> Vec<BotPolicy> {
    BotKind::ROSTER.iter().map(|&k| BotPolicy::new(k)).collect()
}

struct View<'a> {
    grid: &'a Grid,
    state: &'a GameState,
    params: BotParams,
}

impl View<'_> {
    fn max_visible(&self) -> Option<(Position, Card)> {
        self.grid.max_visible()
    }

    fn first_hidden(&self) -> Option<Position> {
        self.grid.positions_where(Cell::is_hidden).next()
    }

    /// First hidden cell of the live column with the most face-up cards.
    fn hidden_in_most_revealed_column(&self) -> Option<Position> {
        (0..4)
            .filter(|&c| !self.grid.is_column_removed(c))
            .filter_map(|c| {
                let cells = self.grid.column(c);
                let hidden = cells.iter().copied().find(|&p| self.grid.cell(p).is_hidden())?;
                let up = cells.iter().filter(|&&p| self.grid.cell(p).is_visible()).count();
                Some((up, c, hidden))
            })
            .max_by_key(|&(up, c, _)| (up, std::cmp::Reverse(c)))
            .map(|(_, _, p)| p)
    }

    /// Slot that moves a column toward three of `card`: the column must hold a
    /// face-up `card` and a cell that does not match it.
    fn column_target(&self, card: Card) -> Option<Position> {
        let mut best: Option<(usize, Position)> = None;
        for c in (0..4).filter(|&c| !self.grid.is_column_removed(c)) {
            let cells = self.grid.column(c).map(|p| (p, *self.grid.cell(p)));
            let matches = cells.iter().filter(|(_, x)| x.is_visible() && x.card == card).count();
            if matches == 0 || matches == ROWS {
                continue;
            }
            // Prefer overwriting the worst mismatched visible card, else a hidden one.
            let slot = cells
                .iter()
                .filter(|(_, x)| x.is_visible() && x.card != card)
                .max_by_key(|(_, x)| x.card)
                .or_else(|| cells.iter().find(|(_, x)| x.is_hidden()))
                .map(|(p, _)| *p)?;
            if best.is_none_or(|(m, _)| matches > m) {
                best = Some((matches, slot));
            }
        }
        best.map(|(_, p)| p)
    }

    fn estimate(&self, grid: &Grid) -> i32 {
        grid.visible_sum() + self.params.hidden_estimate * grid.hidden_count() as i32
    }

    /// Own estimated board is below every opponent's.
    fn ahead(&self) -> bool {
        let me = self.state.current_player();
        let mine = self.estimate(self.grid);
        (0..self.state.num_players()).filter(|&p| p != me).all(|p| mine < self.estimate(self.state.grid(p)))
    }

    fn greedy_place(&self, card: Card) -> Option<Position> {
        match self.max_visible() {
            Some((p, v)) if v > card => Some(p),
            _ => self.first_hidden().or(self.max_visible().map(|(p, _)| p)),
        }
    }

    fn info_place(&self) -> Option<Position> {
        self.hidden_in_most_revealed_column().or(self.max_visible().map(|(p, _)| p))
    }

    fn risk_place(&self, card: Card) -> Option<Position> {
        if let Some((p, v)) = self.max_visible() {
            if v.value() - card.value() >= self.params.risk_min_gain {
                return Some(p);
            }
        }
        if card.value() <= self.params.risk_hidden_max {
            return self.hidden_in_most_revealed_column();
        }
        None
    }
}

enum Plan {
    TakeDiscard(bool),
    Keep(bool),
    At(Option<Position>),
}

fn plan(kind: BotKind, v: &View, phase: Phase, card: Option<Card>, flip: bool) -> Plan {
    use BotKind::*;
    let p = v.params;
    let kind = match kind {
        EndRoundAggro if !v.ahead() => RiskAware,
        k => k,
    };
    match (phase, kind) {
        (Phase::ChooseSource, GreedyValue) => {
            let top = v.state.discard_top().map_or(i8::MAX, Card::value);
            Plan::TakeDiscard(v.max_visible().is_some_and(|(_, m)| top <= m.value() - p.greedy_take_margin))
        }
        (Phase::ChooseSource, ColumnHunter) => {
            Plan::TakeDiscard(v.state.discard_top().is_some_and(|c| v.column_target(c).is_some()))
        }
        (Phase::ChooseSource, RiskAware) => {
            Plan::TakeDiscard(v.state.discard_top().is_some_and(|c| v.risk_place(c).is_some()))
        }
        (Phase::ChooseSource, _) => Plan::TakeDiscard(false),

        (Phase::KeepOrDiscard, k) => {
            let c = card.expect("drawn card in keep-or-discard");
            Plan::Keep(match k {
                GreedyValue | AntiDiscard => c.value() <= p.greedy_keep_max,
                InfoFirst => c.value() <= p.info_keep_max,
                ColumnHunter => v.column_target(c).is_some() || c.value() <= p.info_keep_max,
                RiskAware => v.risk_place(c).is_some(),
                EndRoundAggro => c.value() <= p.aggro_keep_max,
                Random => unreachable!("random bot has no plan"),
            })
        }

        (Phase::ChoosePosition, k) if flip => Plan::At(match k {
            GreedyValue | AntiDiscard | EndRoundAggro => v.first_hidden(),
            _ => v.hidden_in_most_revealed_column(),
        }),
        (Phase::ChoosePosition, k) => {
            let c = card.expect("card to place in replace phase");
            Plan::At(match k {
                GreedyValue | AntiDiscard | EndRoundAggro => v.greedy_place(c),
                InfoFirst => v.info_place(),
                ColumnHunter => v.column_target(c).or_else(|| v.info_place()),
                RiskAware => v.risk_place(c).or_else(|| v.greedy_place(c)),
                Random => unreachable!("random bot has no plan"),
            })
        }
    }
}

/// The bot's action for the player to move. Always legal.
pub fn bot_act<R: Rng + ?Sized>(policy: &BotPolicy, state: &GameState, rng: &mut R) -> Action {
    let legal = state.legal_actions();
    assert!(!legal.is_empty(), "bot asked to act in a terminal state");
    if policy.kind == BotKind::Random {
        return legal.iter().choose(rng).unwrap();
    }
    let view = View { grid: state.grid(state.current_player()), state, params: policy.params };
    let card = match state.phase() {
        Phase::KeepOrDiscard => state.drawn_card(),
        _ => state.card_to_place(),
    };
    let proposal = match plan(policy.kind, &view, state.phase(), card, state.pending_flip()) {
        Plan::TakeDiscard(true) => Some(Action::TAKE_DISCARD),
        Plan::TakeDiscard(false) => Some(Action::DRAW_DECK),
        Plan::Keep(true) => Some(Action::KEEP),
        Plan::Keep(false) => Some(Action::DISCARD),
        Plan::At(pos) => pos.map(Action::at),
    };
    match proposal {
        Some(a) if legal.contains(a) => a,
        // The other half of a binary choice before going random.
        Some(a) if a.index() < 4 => {
            let other = Action::new(a.index() ^ 1).unwrap();
            if legal.contains(other) {
                other
            } else {
                legal.iter().choose(rng).unwrap()
            }
        }
        _ => legal.iter().choose(rng).unwrap(),
    }
}

/// Play a full game with one policy per seat; returns the final state.
pub fn play_bots<R: Rng + ?Sized>(policies: &[BotPolicy], seed: u64, rng: &mut R) -> GameState {
    let mut state = GameState::new(policies.len(), seed).expect("valid player count");
    while !state.is_over() {
        let a = policies[state.current_player()].act(&state, rng);
        state.step(a).expect("bot actions are legal");
    }
    state
}

