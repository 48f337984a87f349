use skyjo_core::engine::*;
use skyjo_core::*;
use skyjo_core::card::{Position, DECK_SIZE};
use skyjo_core::fixtures::Scenario;
use proptest::prelude::*;
use rand::seq::IteratorRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const UP: [bool; 12] = [true; 12];
const DOWN: [bool; 12] = [false; 12];

fn pos(row: usize, col: usize) -> Action {
    Action::at(Position::from_row_col(row, col))
}

#[test]
fn player_count_bounds() {
    assert_eq!(GameState::new(1, 0), Err(EngineError::PlayerCount(1)));
    assert_eq!(GameState::new(9, 0), Err(EngineError::PlayerCount(9)));
    for n in 2..=8 {
        let s = GameState::new(n, 3).unwrap();
        assert_eq!(s.card_count(), DECK_SIZE);
        assert_eq!(s.deck().len(), DECK_SIZE - 12 * n - 1);
        for p in 0..n {
            assert_eq!(s.grid(p).hidden_count(), 10);
        }
    }
}

#[test]
fn same_seed_same_state() {
    let a = GameState::new(2, 77).unwrap();
    let b = GameState::new(2, 77).unwrap();
    assert_eq!(a.state_hash(), b.state_hash());
    assert_eq!(a, b);
    assert_ne!(a.state_hash(), GameState::new(2, 78).unwrap().state_hash());
}

#[test]
fn opener_has_highest_revealed_sum() {
    for seed in 0..50 {
        let s = GameState::new(4, seed).unwrap();
        let sums: Vec<i32> = (0..4).map(|p| s.grid(p).visible_sum()).collect();
        let best = *sums.iter().max().unwrap();
        let first = sums.iter().position(|&x| x == best).unwrap();
        assert_eq!(s.current_player(), first);
    }
}

#[test]
fn fresh_game_mask_is_source_choice() {
    let s = GameState::new(2, 1).unwrap();
    let mask = s.legal_actions();
    assert_eq!(mask.iter().collect::<Vec<_>>(), vec![Action::TAKE_DISCARD, Action::DRAW_DECK]);
}

#[test]
fn flip_mask_lists_face_down_cells() {
    let mut up = UP;
    up[1] = false;
    up[6] = false;
    up[11] = false;
    let s = Scenario::new(2, 5).grid(0, [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12], up).current(0).choosing_flip().build();
    let mask = s.legal_actions();
    assert_eq!(mask.count(), 3);
    assert!(mask.iter().all(|a| (4..16).contains(&a.index())));
    assert!(mask.contains(Action::at(Position::new(6).unwrap())));
}

#[test]
fn replace_mask_skips_removed_column() {
    let s = Scenario::new(2, 5).removed_column(1, 2).current(1).drawn(3).build();
    let (s, _) = s.apply_action(Action::KEEP).unwrap();
    assert_eq!(s.legal_actions().count(), 9);
    assert!(!s.legal_actions().contains(pos(0, 2)));
}

#[test]
fn discard_illegal_without_face_down_cells() {
    let s = Scenario::new(2, 2).grid(0, [3, 4, 5, 6, 3, 4, 5, 6, 7, 8, 9, 10], UP).current(0).drawn(1).build();
    let mask = s.legal_actions();
    assert!(mask.contains(Action::KEEP));
    assert!(!mask.contains(Action::DISCARD));
}

#[test]
fn flipping_third_equal_card_removes_column() {
    let s = Scenario::new(2, 9)
        .card(0, 0, 7, true)
        .card(0, 4, 7, true)
        .card(0, 8, 7, false)
        .current(0)
        .choosing_flip()
        .build();
    let discard_before = s.discard().len();
    let (next, ev) = s.apply_action(pos(2, 0)).unwrap();
    assert!(next.grid(0).is_column_removed(0));
    assert_eq!(next.discard().len(), discard_before + 3);
    assert_eq!(&next.discard()[discard_before..], &[Card::new(7).unwrap(); 3]);
    assert!(ev.events.iter().any(|e| matches!(e, Event::ColumnRemoved { player: 0, col: 0, .. })));
    assert_eq!(next.card_count(), DECK_SIZE);
}

#[test]
fn take_discard_then_place() {
    let s = Scenario::new(2, 4).discard_top(-1).current(0).build();
    let old = s.grid(0).cell(Position::from_row_col(1, 0)).card;
    let (s, _) = s.apply_action(Action::TAKE_DISCARD).unwrap();
    assert_eq!(s.phase(), Phase::ChoosePosition);
    assert_eq!(s.drawn_card(), None);
    assert_eq!(s.legal_actions().count(), 12);
    let (s, _) = s.apply_action(Action::new(8).unwrap()).unwrap();
    let cell = s.grid(0).cell(Position::from_row_col(1, 0));
    assert_eq!(cell.card.value(), -1);
    assert!(cell.face_up);
    assert_eq!(s.discard_top(), Some(old));
    assert_eq!(s.current_player(), 1);
    assert_eq!(s.phase(), Phase::ChooseSource);
}

#[test]
fn draw_keep_discard_flows() {
    let s = GameState::new(2, 11).unwrap();
    let actor = s.current_player();
    let (s, ev) = s.apply_action(Action::DRAW_DECK).unwrap();
    let drawn = s.drawn_card().unwrap();
    assert_eq!(ev.events, vec![Event::DrewFromDeck { card: drawn }]);
    assert_eq!(s.phase(), Phase::KeepOrDiscard);
    let (flip, _) = s.apply_action(Action::DISCARD).unwrap();
    assert!(flip.pending_flip());
    assert_eq!(flip.discard_top(), Some(drawn));
    assert_eq!(flip.legal_actions().count(), 10);
    let (keep, _) = s.apply_action(Action::KEEP).unwrap();
    assert_eq!(keep.card_to_place(), Some(drawn));
    assert_eq!(keep.legal_actions().count(), 12);
    assert_eq!(keep.current_player(), actor);
}

#[test]
fn illegal_action_leaves_state_unchanged() {
    let mut s = GameState::new(3, 8).unwrap();
    let before = s.state_hash();
    let err = s.step(Action::KEEP).unwrap_err();
    assert!(matches!(err, EngineError::IllegalAction { action: 2, .. }));
    assert_eq!(s.state_hash(), before);
    assert!(Action::new(16).is_err());
}

#[test]
fn doubling_when_not_strictly_lowest() {
    // Player 0 ends the round with 12, player 1 holds 9.
    let mut s = Scenario::new(2, 21)
        .grid(0, [2, 2, 2, 2, 2, 2, 0, 0, 0, 0, 0, 0], UP)
        .grid(1, [3, 3, 3, 0, 0, 0, 0, 0, 0, 0, 0, 0], UP)
        .trigger(0, 0)
        .build();
    let r = s.score_round().unwrap();
    assert_eq!(r.scores, vec![24, 9]);
    assert_eq!(r.doubled, vec![true, false]);
    assert_eq!(s.cumulative_scores(), &[24, 9]);
}

#[test]
fn tie_with_trigger_doubles() {
    let mut s = Scenario::new(2, 21)
        .grid(0, [3, 3, 3, 0, 0, 0, 0, 0, 0, 0, 0, 0], UP)
        .grid(1, [1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0], UP)
        .trigger(1, 0)
        .build();
    let r = s.score_round().unwrap();
    assert_eq!(r.scores, vec![9, 18]);
}

#[test]
fn strictly_lowest_trigger_keeps_score() {
    let mut s = Scenario::new(2, 3)
        .grid(0, [-2, -1, 1, -1, 0, 0, 0, 0, 0, 0, 0, 0], UP)
        .grid(1, [5, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 0], UP)
        .trigger(0, 0)
        .build();
    let r = s.score_round().unwrap();
    assert_eq!(r.scores, vec![-3, 25]);
    assert_eq!(r.doubled, vec![false, false]);
}

#[test]
fn non_positive_trigger_score_doubles_only_when_configured() {
    let build = || {
        Scenario::new(2, 3)
            .grid(0, [-2, -1, -1, 1, 0, 0, 0, 0, 0, 0, 0, 0], UP)
            .grid(1, [-2, -2, -1, -1, 2, 0, 0, 0, 0, 0, 0, 0], UP)
            .trigger(0, 0)
    };
    let mut standard = build().build();
    assert_eq!(standard.score_round().unwrap().scores, vec![-3, -4]);
    let mut literal = build().rules(Rules { double_non_positive: true, ..Rules::default() }).build();
    assert_eq!(literal.score_round().unwrap().scores, vec![-6, -4]);
}

#[test]
fn score_round_sums() {
    let mut zeros = Scenario::new(2, 6).grid(0, [0; 12], UP).trigger(1, 0).build();
    assert_eq!(zeros.score_round().unwrap().scores[0], 0);

    let mut removed = Scenario::new(2, 6)
        .grid(0, [1, 2, 3, 12, 4, 5, 6, 12, 7, 8, 9, 12], UP)
        .removed_column(0, 3)
        .trigger(1, 0)
        .build();
    assert_eq!(removed.score_round().unwrap().scores[0], 45);
}

#[test]
fn end_of_round_reveal_does_not_remove_columns() {
    let mut s = Scenario::new(2, 6)
        .grid(0, [4, 0, 0, 0, 4, 0, 0, 0, 4, 0, 0, 0], DOWN)
        .trigger(1, 0)
        .build();
    let r = s.score_round().unwrap();
    assert_eq!(r.scores[0], 12);
    assert!(!s.grid(0).is_column_removed(0));
    assert_eq!(r.revealed.iter().filter(|(p, _, _)| *p == 0).count(), 12);
}

#[test]
fn score_round_mid_round_is_error() {
    let mut s = GameState::new(2, 1).unwrap();
    assert_eq!(s.score_round(), Err(EngineError::RoundInProgress));
    let mut s = Scenario::new(2, 1).trigger(0, 1).build();
    assert_eq!(s.score_round(), Err(EngineError::RoundInProgress));
}

#[test]
fn terminal_rankings() {
    let s = Scenario::new(2, 1).cumulative(&[98, 97]).build();
    assert_eq!(s.is_terminal(), None);
    let s = Scenario::new(2, 1).cumulative(&[102, 85]).game_over().build();
    let r = s.is_terminal().unwrap();
    assert_eq!(r.order, vec![1, 0]);
    assert_eq!(r.ranks, vec![2, 1]);
    let s = Scenario::new(2, 1).cumulative(&[100, 100]).game_over().build();
    let r = s.is_terminal().unwrap();
    assert_eq!(r.ranks, vec![1, 1]);
    assert!(r.is_draw());
}

#[test]
fn trigger_schedules_one_final_turn_per_opponent() {
    // Player 0 flips their last face-down cell.
    let mut up = UP;
    up[5] = false;
    let s = Scenario::new(3, 14)
        .grid(0, [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12], up)
        .current(0)
        .choosing_flip()
        .build();
    let (s, ev) = s.apply_action(Action::new(4 + 5).unwrap()).unwrap();
    assert!(ev.events.contains(&Event::RoundTriggered { player: 0 }));
    assert_eq!(s.round_trigger(), Some(0));
    assert_eq!(s.final_turns_remaining(), Some(2));
    assert_eq!(s.current_player(), 1);
}

#[test]
fn deck_exhaustion_reshuffles_discard_below_top() {
    let mut s = Scenario::new(2, 5).bury_deck().build();
    let top = *s.discard().last().unwrap();
    assert!(s.deck().is_empty());
    let ev = s.step(Action::DRAW_DECK).unwrap();
    assert!(matches!(ev.events[0], Event::Reshuffled { .. }));
    assert_eq!(s.discard(), &[top]);
    assert_eq!(s.card_count(), DECK_SIZE);

    // With nothing to reshuffle the deck cannot be drawn.
    let s = Scenario::new(2, 5).drop_piles().build();
    assert!(!s.legal_actions().contains(Action::DRAW_DECK));
}

#[test]
fn truncation_at_step_cap() {
    let rules = Rules { max_steps: 7, ..Rules::default() };
    let mut s = GameState::with_rules(2, 1, rules).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    while !s.is_over() {
        let a = s.legal_actions().iter().choose(&mut rng).unwrap();
        s.step(a).unwrap();
    }
    assert!(s.is_truncated());
    assert_eq!(s.step_count(), 7);
    assert_eq!(s.legal_actions(), ActionMask::EMPTY);
    assert_eq!(s.step(Action::DRAW_DECK), Err(EngineError::Terminal));
}

/// Play uniformly random legal actions and check invariants after every step.
fn random_game(num_players: usize, seed: u64) -> (GameState, Vec<Action>) {
    let mut s = GameState::new(num_players, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
    let mut actions = Vec::new();
    while !s.is_over() {
        let mask = s.legal_actions();
        assert!(!mask.is_empty(), "non-terminal state without legal actions");
        let a = mask.iter().choose(&mut rng).unwrap();
        let before = s.clone();
        let ev = s.step(a).unwrap();
        actions.push(a);
        assert_eq!(s.card_count(), DECK_SIZE);
        if s.phase() == Phase::ChooseSource && !s.is_over() {
            assert!(!s.discard().is_empty());
        }
        // Removed columns stay removed within a round.
        if s.round_index() == before.round_index() {
            for p in 0..num_players {
                for col in 0..4 {
                    if before.grid(p).is_column_removed(col) {
                        assert!(s.grid(p).is_column_removed(col));
                    }
                }
            }
        }
        for e in &ev.events {
            match e {
                Event::RoundTriggered { player } => {
                    assert_eq!(before.round_trigger(), None);
                    assert_eq!(s.grid(*player).hidden_count(), 0);
                }
                Event::RoundEnded { result } => {
                    for p in 0..num_players {
                        if result.doubled[p] {
                            assert_eq!(p, result.trigger_player);
                            let others_min = (0..num_players)
                                .filter(|&q| q != p)
                                .map(|q| result.scores[q])
                                .min()
                                .unwrap();
                            assert!(others_min <= result.scores[p] / 2);
                            assert!(result.scores[p] > 0);
                        }
                    }
                }
                _ => {}
            }
        }
        if before.round_trigger().is_none() && s.round_index() == before.round_index() && s.round_trigger().is_none() {
            assert!((0..num_players).all(|p| s.grid(p).hidden_count() > 0));
        }
    }
    (s, actions)
}

#[test]
fn random_games_hold_invariants() {
    for seed in 0..300 {
        let (s, _) = random_game(2 + (seed as usize % 7), seed);
        let ranking = s.is_terminal().unwrap();
        assert!(s.is_truncated() || s.cumulative_scores().iter().any(|&c| c >= 100));
        assert_eq!(ranking.order.len(), s.num_players());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn replay_is_deterministic(seed in any::<u64>(), n in 2usize..=8) {
        let (end, actions) = random_game(n, seed);
        let mut replay = GameState::new(n, seed).unwrap();
        for a in actions {
            replay.step(a).unwrap();
        }
        prop_assert_eq!(replay.state_hash(), end.state_hash());
    }
}
