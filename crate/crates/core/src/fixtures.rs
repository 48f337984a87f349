//! Hand-built positions for tests. Every edit swaps cards with the deck so
//! the 150-card conservation invariant still holds.

use crate::card::{Card, Cell, Position, ROWS};
use crate::engine::{GameState, Phase, Rules};

pub struct Scenario {
    state: GameState,
    pinned: Vec<(usize, usize)>,
    loose: bool,
}

impl Scenario {
    pub fn new(num_players: usize, seed: u64) -> Scenario {
        Scenario {
            state: GameState::new(num_players, seed).expect("valid player count"),
            pinned: Vec::new(),
            loose: false,
        }
    }

    /// Swap `value` into `slot` from the deck, the buried discard or an unpinned grid cell.
    fn fetch(&mut self, value: i8, slot: &mut Card) {
        if slot.value() == value {
            return;
        }
        if let Some(c) = self.state.deck.iter_mut().find(|c| c.value() == value) {
            std::mem::swap(c, slot);
            return;
        }
        let buried = self.state.discard.len().saturating_sub(1);
        if let Some(c) = self.state.discard[..buried].iter_mut().find(|c| c.value() == value) {
            std::mem::swap(c, slot);
            return;
        }
        for player in 0..self.state.num_players {
            for pos in Position::all() {
                if self.pinned.contains(&(player, pos.index())) {
                    continue;
                }
                let cell = self.state.grids[player].cell_mut(pos);
                if !cell.removed && cell.card.value() == value {
                    std::mem::swap(&mut cell.card, slot);
                    return;
                }
            }
        }
        panic!("no free card of value {value}");
    }

    fn take_from_deck(&mut self, value: i8) -> Card {
        let mut slot = self.state.deck.remove(0);
        self.fetch(value, &mut slot);
        slot
    }

    /// Put `value` at `pos` of `player`; the displaced card takes the donor's place.
    pub fn card(mut self, player: usize, pos: usize, value: i8, face_up: bool) -> Scenario {
        self.pinned.push((player, pos));
        let pos = Position::new(pos).expect("position < 12");
        let mut slot = self.state.grids[player].cell(pos).card;
        self.fetch(value, &mut slot);
        *self.state.grids[player].cell_mut(pos) = Cell { card: slot, face_up, removed: false };
        self
    }

    /// Set a whole grid row-major.
    pub fn grid(mut self, player: usize, values: [i8; 12], face_up: [bool; 12]) -> Scenario {
        for pos in 0..12 {
            self = self.card(player, pos, values[pos], face_up[pos]);
        }
        self
    }

    /// Remove a column, moving its cards to the discard beneath the top card.
    pub fn removed_column(mut self, player: usize, col: usize) -> Scenario {
        for row in 0..ROWS {
            self.pinned.push((player, row * 4 + col));
            let cell = self.state.grids[player].cell_mut(Position::from_row_col(row, col));
            cell.removed = true;
            cell.face_up = true;
            let card = cell.card;
            self.state.discard.insert(0, card);
        }
        self
    }

    /// Replace the discard top with `value` from the deck.
    pub fn discard_top(mut self, value: i8) -> Scenario {
        let mut top = self.state.discard.pop().expect("discard has a top");
        self.fetch(value, &mut top);
        self.state.discard.push(top);
        self
    }

    pub fn current(mut self, player: usize) -> Scenario {
        self.state.current_player = player;
        self
    }

    /// Current player has drawn `value` from the deck and must keep or discard.
    pub fn drawn(mut self, value: i8) -> Scenario {
        let card = self.take_from_deck(value);
        self.state.drawn_card = Some(card);
        self.state.phase = Phase::KeepOrDiscard;
        self
    }

    /// Current player must flip a face-down cell.
    pub fn choosing_flip(mut self) -> Scenario {
        if let Some(card) = self.state.drawn_card.take() {
            self.state.discard.push(card);
        }
        self.state.phase = Phase::ChoosePosition;
        self.state.pending_flip = true;
        self
    }

    /// Current player must place the kept card (or the discard top if nothing was drawn).
    pub fn choosing_replace(mut self) -> Scenario {
        self.state.phase = Phase::ChoosePosition;
        self.state.pending_flip = false;
        self
    }

    pub fn cumulative(mut self, scores: &[i32]) -> Scenario {
        self.state.cumulative_scores = scores.to_vec();
        self
    }

    pub fn trigger(mut self, player: usize, final_turns: usize) -> Scenario {
        self.state.round_trigger = Some(player);
        self.state.final_turns_remaining = Some(final_turns);
        self
    }

    pub fn game_over(mut self) -> Scenario {
        self.state.game_over = true;
        self
    }

    pub fn rules(mut self, rules: Rules) -> Scenario {
        self.state.rules = rules;
        self
    }

    /// Move the whole deck beneath the discard top.
    pub fn bury_deck(mut self) -> Scenario {
        let top = self.state.discard.pop().expect("discard has a top");
        self.state.discard.append(&mut self.state.deck);
        self.state.discard.push(top);
        self
    }

    /// Throw away the deck and everything under the discard top. The only
    /// edit that breaks card conservation.
    pub fn drop_piles(mut self) -> Scenario {
        self.state.deck.clear();
        let top = self.state.discard.pop().expect("discard has a top");
        self.state.discard = vec![top];
        self.loose = true;
        self
    }

    pub fn build(self) -> GameState {
        if self.loose {
            return self.state;
        }
        assert_eq!(self.state.card_count(), crate::card::DECK_SIZE, "fixture broke card conservation");
        self.state
    }
}
