//! Cards, the 150-card deck and the 3x4 player grid.

use serde::{Deserialize, Serialize};
use std::fmt;

pub const MIN_CARD: i8 = -2;
pub const MAX_CARD: i8 = 12;
/// Number of distinct card values (-2..=12).
pub const CARD_VALUES: usize = 15;
pub const DECK_SIZE: usize = 150;

pub const ROWS: usize = 3;
pub const COLS: usize = 4;
pub const CELLS: usize = ROWS * COLS;

/// A Skyjo card, value in `-2..=12`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub struct Card(i8);

impl Card {
    pub fn new(value: i8) -> Option<Card> {
        (MIN_CARD..=MAX_CARD).contains(&value).then_some(Card(value))
    }

    pub fn value(self) -> i8 {
        self.0
    }

    /// Dense index `0..15`, with -2 at 0.
    pub fn index(self) -> usize {
        (self.0 - MIN_CARD) as usize
    }
}

impl TryFrom<i8> for Card {
    type Error = String;

    fn try_from(value: i8) -> Result<Self, Self::Error> {
        Card::new(value).ok_or_else(|| format!("card value {value} outside -2..=12"))
    }
}

impl From<Card> for i8 {
    fn from(card: Card) -> i8 {
        card.0
    }
}

impl fmt::Display for Card {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// How many copies of `value` are in the full deck.
pub fn copies_of(value: i8) -> usize {
    match value {
        -2 => 5,
        0 => 15,
        -1 | 1..=12 => 10,
        _ => 0,
    }
}

/// The unshuffled 150-card deck, ascending by value.
pub fn full_deck() -> Vec<Card> {
    (MIN_CARD..=MAX_CARD)
        .flat_map(|v| std::iter::repeat_n(Card(v), copies_of(v)))
        .collect()
}

/// Position on a grid, row-major `row * 4 + col`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Position(u8);

impl Position {
    pub fn new(index: usize) -> Option<Position> {
        (index < CELLS).then_some(Position(index as u8))
    }

    pub fn from_row_col(row: usize, col: usize) -> Position {
        assert!(row < ROWS && col < COLS, "({row},{col}) outside 3x4 grid");
        Position((row * COLS + col) as u8)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn row(self) -> usize {
        self.index() / COLS
    }

    pub fn col(self) -> usize {
        self.index() % COLS
    }

    pub fn all() -> impl Iterator<Item = Position> {
        (0..CELLS as u8).map(Position)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub card: Card,
    pub face_up: bool,
    pub removed: bool,
}

impl Cell {
    pub fn face_down(card: Card) -> Cell {
        Cell { card, face_up: false, removed: false }
    }

    /// Present on the board and not yet revealed.
    pub fn is_hidden(&self) -> bool {
        !self.removed && !self.face_up
    }

    /// Present on the board and revealed.
    pub fn is_visible(&self) -> bool {
        !self.removed && self.face_up
    }
}

/// A player's 3x4 grid. Removal is always whole-column.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    cells: [Cell; CELLS],
}

impl Grid {
    pub fn new(cards: [Card; CELLS]) -> Grid {
        Grid { cells: cards.map(Cell::face_down) }
    }

    pub fn cell(&self, pos: Position) -> &Cell {
        &self.cells[pos.index()]
    }

    pub(crate) fn cell_mut(&mut self, pos: Position) -> &mut Cell {
        &mut self.cells[pos.index()]
    }

    pub fn cells(&self) -> &[Cell; CELLS] {
        &self.cells
    }

    pub fn positions_where<F: Fn(&Cell) -> bool>(&self, pred: F) -> impl Iterator<Item = Position> + use<'_, F> {
        Position::all().filter(move |&p| pred(self.cell(p)))
    }

    pub fn hidden_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_hidden()).count()
    }

    pub fn remaining_count(&self) -> usize {
        self.cells.iter().filter(|c| !c.removed).count()
    }

    pub fn visible_sum(&self) -> i32 {
        self.cells.iter().filter(|c| c.is_visible()).map(|c| c.card.value() as i32).sum()
    }

    pub fn hidden_sum(&self) -> i32 {
        self.cells.iter().filter(|c| c.is_hidden()).map(|c| c.card.value() as i32).sum()
    }

    /// Sum over every card still on the board, hidden or not.
    pub fn board_sum(&self) -> i32 {
        self.cells.iter().filter(|c| !c.removed).map(|c| c.card.value() as i32).sum()
    }

    /// Largest revealed card, with its position (first in row-major order on ties).
    pub fn max_visible(&self) -> Option<(Position, Card)> {
        let mut best: Option<(Position, Card)> = None;
        for p in self.positions_where(Cell::is_visible) {
            let card = self.cell(p).card;
            if best.is_none_or(|(_, b)| card > b) {
                best = Some((p, card));
            }
        }
        best
    }

    pub fn column(&self, col: usize) -> [Position; ROWS] {
        std::array::from_fn(|row| Position::from_row_col(row, col))
    }

    pub fn is_column_removed(&self, col: usize) -> bool {
        self.cells[col].removed
    }

    /// If the column holds three equal face-up cards, mark it removed and return them.
    pub(crate) fn try_remove_column(&mut self, col: usize) -> Option<[Card; ROWS]> {
        let cells = self.column(col).map(|p| *self.cell(p));
        let matched = cells.iter().all(|c| c.is_visible() && c.card == cells[0].card);
        if !matched {
            return None;
        }
        for p in self.column(col) {
            self.cell_mut(p).removed = true;
        }
        Some(cells.map(|c| c.card))
    }

    /// Turns every hidden card face-up, returning what was revealed.
    pub(crate) fn reveal_all(&mut self) -> Vec<(Position, Card)> {
        let hidden: Vec<Position> = self.positions_where(Cell::is_hidden).collect();
        hidden
            .into_iter()
            .map(|p| {
                let cell = self.cell_mut(p);
                cell.face_up = true;
                (p, cell.card)
            })
            .collect()
    }

    /// Cards physically on the board (removed cells excluded).
    pub(crate) fn cards_on_board(&self) -> impl Iterator<Item = Card> + '_ {
        self.cells.iter().filter(|c| !c.removed).map(|c| c.card)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deck_composition() {
        let deck = full_deck();
        assert_eq!(deck.len(), DECK_SIZE);
        let count = |v: i8| deck.iter().filter(|c| c.value() == v).count();
        assert_eq!(count(0), 15);
        assert_eq!(count(-2), 5);
        assert_eq!(count(-1), 10);
        for v in 1..=12 {
            assert_eq!(count(v), 10);
        }
        let total: i32 = deck.iter().map(|c| c.value() as i32).sum();
        assert_eq!(total, 760);
    }

    #[test]
    fn card_bounds() {
        assert!(Card::new(-3).is_none());
        assert!(Card::new(13).is_none());
        assert_eq!(Card::new(12).unwrap().index(), 14);
    }

    #[test]
    fn column_removal_is_whole_column() {
        let mut grid = Grid::new([Card(7); CELLS]);
        for p in grid.column(2) {
            grid.cell_mut(p).face_up = true;
        }
        assert_eq!(grid.try_remove_column(2), Some([Card(7); 3]));
        assert!(grid.column(2).iter().all(|&p| grid.cell(p).removed));
        assert_eq!(grid.remaining_count(), 9);
        assert!(grid.try_remove_column(1).is_none());
    }
}
