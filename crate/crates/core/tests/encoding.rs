use skyjo_core::encoding::*;
use skyjo_core::*;
use skyjo_core::engine::Action;
use skyjo_core::fixtures::Scenario;
use rand::seq::IteratorRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn board_tokens(seq: &TokenSequence) -> impl Iterator<Item = &Token> {
    seq.tokens.iter().filter(|t| t.kind() == TokenKind::Board)
}

fn decision(seq: &TokenSequence) -> Token {
    *seq.tokens.last().unwrap()
}

#[test]
fn two_player_sequence_has_43_tokens() {
    let s = GameState::new(2, 3).unwrap();
    assert_eq!(encode_observation(&s, 0).tokens.len(), 43);
    assert_eq!(sequence_len(2), 43);
}

#[test]
fn length_formula_for_all_player_counts() {
    for n in 2..=8 {
        let s = GameState::new(n, n as u64).unwrap();
        for ego in 0..n {
            let seq = encode_observation(&s, ego);
            assert_eq!(seq.tokens.len(), 12 * n + 19);
            assert_eq!(seq.tokens.iter().filter(|t| t.kind() == TokenKind::History).count(), 16);
        }
    }
}

#[test]
fn face_down_cells_are_unknown() {
    let s = GameState::new(2, 7).unwrap();
    let seq = encode_observation(&s, 0);
    for t in board_tokens(&seq) {
        if let Token::Board { visible, value, owner, .. } = *t {
            assert_eq!(visible, value as usize != UNKNOWN);
            let _ = owner;
        }
    }
    // Opponent (seat 1) has ten hidden cells.
    let hidden = board_tokens(&seq)
        .filter(|t| matches!(t, Token::Board { owner: 1, value, .. } if *value as usize == UNKNOWN))
        .count();
    assert_eq!(hidden, 10);
}

#[test]
fn drawn_card_private_to_actor() {
    let s = Scenario::new(2, 3).current(1).drawn(9).build();
    let Token::Decision { drawn, phase, .. } = decision(&encode_observation(&s, 0)) else { panic!() };
    assert_eq!(drawn as usize, UNKNOWN);
    assert_eq!(phase as usize, Phase::KeepOrDiscard.index());
    let Token::Decision { drawn, .. } = decision(&encode_observation(&s, 1)) else { panic!() };
    assert_eq!(drawn as usize, Card::new(9).unwrap().index());
}

#[test]
fn ego_rotation_puts_own_grid_first() {
    let s = Scenario::new(3, 3).card(2, 0, 12, true).build();
    let seq = encode_observation(&s, 2);
    assert_eq!(seq.tokens[0], Token::Board { owner: 0, position: 0, visible: true, value: 14, removed: false });
}

#[test]
fn history_ring_behaviour() {
    let mut s = Scenario::new(2, 3).current(0).choosing_flip().build();
    let ev = s.step(Action::at(Position::new(4).unwrap())).unwrap();
    let h = history_push(History::new(), &ev);
    let tokens = h.tokens(0, 2);
    assert_eq!(tokens.len(), 16);
    assert_eq!(tokens.iter().filter(|t| **t == Token::HISTORY_PAD).count(), 15);
    assert!(matches!(tokens[15], Token::History { kind: 5, target: 4, .. }));

    let mut h = History::new();
    let mut g = GameState::new(2, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut all = Vec::new();
    for _ in 0..17 {
        let a = g.legal_actions().iter().choose(&mut rng).unwrap();
        let ev = g.step(a).unwrap();
        all.push(HistoryEntry::public(&ev));
        h.push(&ev);
    }
    assert_eq!(h.len(), 16);
    assert_eq!(h.entries().next(), Some(&all[1]));
}

#[test]
fn discarded_draw_becomes_public() {
    let mut s = Scenario::new(2, 3).current(0).build();
    let draw = s.step(Action::DRAW_DECK).unwrap();
    let card = s.drawn_card().unwrap();
    let discard = s.step(Action::DISCARD).unwrap();
    let draw_entry = HistoryEntry::public(&draw);
    assert_eq!(draw_entry.kind, HistoryKind::DrawDeck);
    assert_eq!(draw_entry.value_a, None);
    let discard_entry = HistoryEntry::public(&discard);
    assert_eq!(discard_entry.kind, HistoryKind::Discard);
    assert_eq!(discard_entry.value_a, Some(card));

    let keep_state = Scenario::new(2, 3).current(0).drawn(11).build();
    let mut k = keep_state.clone();
    let keep = k.step(Action::KEEP).unwrap();
    assert_eq!(HistoryEntry::public(&keep).value_a, None);
    assert_eq!(public_events(&keep, 1), vec![]);
    assert_eq!(public_events(&keep, 0).len(), 1);
}

#[test]
fn vocabulary_table() {
    let v = vocabulary_sizes();
    assert_eq!(v["board.value"], 16);
    assert_eq!(v["global.phase"], 3);
    assert_eq!(v["board.owner"], MAX_PLAYERS + 1);
    assert_eq!(schema_table().len(), Feature::ALL.len());
    for (i, f) in Feature::ALL.iter().enumerate() {
        assert_eq!(f.index(), i);
    }
}

fn assert_in_vocab(seq: &TokenSequence) {
    for t in &seq.tokens {
        t.for_each_feature(|f, idx| assert!(idx < f.vocab(), "{} index {idx} >= {}", f.name(), f.vocab()));
    }
}

/// Play random games; for every state and ego, the encoding must not change
/// when the cards ego cannot see are reshuffled, and must scan clean.
#[test]
fn information_hiding_fuzz() {
    let mut checked = 0;
    let mut seed = 0;
    while checked < 4000 {
        let n = 2 + (seed as usize % 3);
        let mut s = GameState::new(n, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut replayed = History::new();
        while !s.is_over() && checked < 4000 {
            for ego in 0..n {
                let seq = encode_observation(&s, ego);
                assert_in_vocab(&seq);
                let twin = s.determinize(ego, seed * 31 + checked as u64);
                assert_eq!(encode_observation(&twin, ego), seq);
                assert_eq!(
                    serde_json::to_vec(&PublicView::new(&twin, ego)).unwrap(),
                    serde_json::to_vec(&PublicView::new(&s, ego)).unwrap()
                );
                if let Token::Decision { drawn, .. } = decision(&seq) {
                    if ego != s.current_player() && s.drawn_card().is_some() {
                        assert_eq!(drawn as usize, UNKNOWN);
                    }
                }
            }
            assert_eq!(encode_observation(&s, 0), encode_observation(&s.clone(), 0));
            let a = s.legal_actions().iter().choose(&mut rng).unwrap();
            let ev = s.step(a).unwrap();
            replayed.push(&ev);
            let seq = encode_observation(&s, 0);
            let hist: Vec<Token> = seq.tokens.iter().filter(|t| t.kind() == TokenKind::History).copied().collect();
            assert_eq!(hist, replayed.tokens(0, n));
            checked += 1;
        }
        seed += 1;
    }
}

#[test]
fn round_buckets() {
    assert_eq!(RoundBucket::from_round_step(0), RoundBucket::Early);
    assert_eq!(RoundBucket::from_round_step(29), RoundBucket::Early);
    assert_eq!(RoundBucket::from_round_step(30), RoundBucket::Mid);
    assert_eq!(RoundBucket::from_round_step(69), RoundBucket::Mid);
    assert_eq!(RoundBucket::from_round_step(70), RoundBucket::Late);
}

#[test]
fn public_view_mask_only_for_mover() {
    let s = GameState::new(2, 5).unwrap();
    let mover = s.current_player();
    assert_eq!(PublicView::new(&s, mover).legal_mask.unwrap().iter().filter(|b| **b).count(), 2);
    assert!(PublicView::new(&s, 1 - mover).legal_mask.is_none());
    let v = PublicView::new(&s, 0);
    assert_eq!(v.grids[1].iter().filter(|c| c.value.is_none()).count(), 10);
}
