//! Random client traffic against the hub: nothing a client sends may cause
//! an illegal engine transition or leak hidden card values.

use rand::seq::{IndexedRandom, IteratorRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use skyjo_arena::{CheckpointStore, Frame, Hub, Session};
use skyjo_core::encoding::PublicView;
use skyjo_core::GameState;
use skyjo_muzero::search::SearchConfig;
use skyjo_muzero::{NetConfig, Nets};
use std::collections::BTreeMap;
use std::sync::Arc;

const CHECKPOINTS: [&str; 6] = ["toy", "bot:greedy-value", "bot:random", "missing", "../toy", ""];

fn hub() -> Hub {
    let store = CheckpointStore::new(None, SearchConfig::greedy(2));
    store.register("toy", Nets::new(NetConfig::toy(), 3));
    Hub::new(Arc::new(store))
}

fn random_message(rng: &mut ChaCha8Rng, hub: &Hub) -> String {
    let ids: Vec<String> = hub.sessions().map(|s| s.id().to_string()).collect();
    let live: Vec<&Session> = hub.sessions().filter(|s| !s.is_over()).collect();
    let roll = rng.random_range(0..100);
    let frame = |kind: &str, session: Option<&str>, payload: Value| json!({"type": kind, "session": session, "payload": payload, "seq": 0});
    match roll {
        0..6 => {
            let mut p = json!({
                "num_players": rng.random_range(0..10),
                "human_seat": rng.random_range(0..9),
                "checkpoint": CHECKPOINTS.choose(rng).unwrap(),
            });
            if rng.random_bool(0.7) {
                p["seed"] = json!(rng.random::<u32>());
            }
            if live.len() < 3 {
                p["num_players"] = json!(rng.random_range(2..5));
                p["human_seat"] = json!(0);
                p["checkpoint"] = json!(CHECKPOINTS[rng.random_range(0..3)]);
            }
            frame("create", None, p).to_string()
        }
        6..70 if !live.is_empty() => {
            let s = live.choose(rng).unwrap();
            let action: i64 = if rng.random_bool(0.75) {
                s.state().legal_actions().iter().choose(rng).map_or(0, |a| a.index() as i64)
            } else {
                [-1i64, 16, 17, 99, i64::MIN, i64::MAX].choose(rng).unwrap().wrapping_mul(rng.random_range(0..2)).wrapping_add(rng.random_range(0..16))
            };
            frame("action", Some(s.id()), json!({ "action": action })).to_string()
        }
        70..76 => frame("action", Some("s999999"), json!({"action": 1})).to_string(),
        76..82 if !ids.is_empty() => {
            frame("resume", Some(ids.choose(rng).unwrap()), json!({"from_seq": rng.random_range(0..50)})).to_string()
        }
        82..86 if !ids.is_empty() => {
            let bad = [json!({"action": "3"}), json!({"action": 2.5}), json!({}), json!(null), json!({"action": 1, "x": 2})];
            frame("action", Some(ids.choose(rng).unwrap()), bad.choose(rng).unwrap().clone()).to_string()
        }
        86..90 => frame(["join", "", "view", "terminal"].choose(rng).unwrap(), None, json!({})).to_string(),
        90..94 => json!({"type": "action", "payload": {"action": 0}}).to_string(),
        _ => {
            let n = rng.random_range(0..40);
            (0..n).map(|_| rng.random_range(0x20u8..0x7f) as char).collect()
        }
    }
}

/// Full engine replay from the seed; every recorded action must be legal.
fn check_replay(s: &Session) {
    let mut g = GameState::new(s.state().num_players(), s.seed()).unwrap();
    for &a in s.actions() {
        assert!(g.legal_actions().contains(a), "session {} applied illegal {a:?}", s.id());
        g.step(a).unwrap();
    }
    assert_eq!(g.state_hash(), s.state().state_hash());
    assert_eq!(s.state().card_count(), 150);
}

/// Outbound payload privacy: views must be independent of every hidden
/// card, and another player's private draw must never be reported.
fn check_privacy(s: &Session, frames: &[&Frame], salt: u64) {
    let human = s.human_seat();
    if let Some(view) = frames.iter().rev().find(|f| f.kind == "view") {
        for k in 0..2 {
            let twin = s.state().determinize(human, salt.wrapping_add(k));
            assert_eq!(view.payload, serde_json::to_value(PublicView::new(&twin, human)).unwrap());
        }
        let bytes = serde_json::to_string(&view.payload).unwrap();
        assert_eq!(bytes, serde_json::to_string(&serde_json::to_value(s.view()).unwrap()).unwrap());
    }
    for f in frames.iter().filter(|f| f.kind == "events") {
        if f.payload["actor"] != json!(human) {
            for e in f.payload["events"].as_array().unwrap() {
                let kind = e["kind"].as_str().unwrap();
                assert!(kind != "drew_from_deck" && kind != "kept_drawn", "private {kind} sent to seat {human}");
            }
        }
    }
}

#[test]
fn ten_thousand_random_messages() {
    let mut hub = hub();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut last_seq: BTreeMap<String, u64> = BTreeMap::new();
    let (mut rejects, mut errors, mut applied) = (0, 0, 0);
    for i in 0..10_000u64 {
        let msg = random_message(&mut rng, &hub);
        let out = hub.handle_text(&msg);
        let resumed = msg.contains("\"resume\"");
        assert!(resumed || !out.is_empty(), "no reply to {msg}");
        let mut touched: BTreeMap<String, Vec<&Frame>> = BTreeMap::new();
        for f in &out {
            match f.kind.as_str() {
                "error" => {
                    errors += 1;
                    continue;
                }
                "reject" => rejects += 1,
                "events" => applied += 1,
                _ => {}
            }
            let id = f.session.clone().expect("session frames carry their id");
            if !resumed {
                let next = last_seq.get(&id).map_or(0, |s| s + 1);
                assert_eq!(f.seq, next, "seq gap in {id}");
                last_seq.insert(id.clone(), f.seq);
            }
            touched.entry(id).or_default().push(f);
        }
        for (id, frames) in touched {
            let s = hub.session(&id).unwrap();
            check_replay(s);
            if !resumed {
                check_privacy(s, &frames, i);
            }
        }
    }
    for s in hub.sessions() {
        check_replay(s);
        assert_eq!(s.log().last().map(|f| f.seq), last_seq.get(s.id()).copied());
    }
    assert!(hub.sessions().count() >= 3);
    assert!(rejects > 100 && errors > 500 && applied > 1000, "{rejects} rejects, {errors} errors, {applied} steps");
}
