//! A single-page browser demo: one human seat against heuristic bots.
//!
//! Build with `cargo build -p skyjo-web --target wasm32-unknown-unknown --release`
//! and `wasm-bindgen --target web --out-dir crates/web/www/pkg` on the output.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use skyjo_core::bots::{BotKind, BotPolicy};
use skyjo_core::encoding::{public_events, PublicView};
use skyjo_core::{Action, GameState};
use wasm_bindgen::prelude::*;

const HUMAN: usize = 0;

#[wasm_bindgen]
pub struct Demo {
    state: GameState,
    bot: BotPolicy,
    hint: BotPolicy,
    rng: ChaCha8Rng,
}

#[wasm_bindgen]
impl Demo {
    /// A new game; the human sits in seat 0 and every other seat runs `bot`.
    #[wasm_bindgen(constructor)]
    pub fn new(players: usize, seed: u32, bot: &str) -> Result<Demo, String> {
        let kind: BotKind = bot.parse()?;
        let state = GameState::new(players, seed as u64).map_err(|e| e.to_string())?;
        let mut demo = Demo {
            state,
            bot: BotPolicy::new(kind),
            hint: BotPolicy::new(BotKind::GreedyValue),
            rng: ChaCha8Rng::seed_from_u64(seed as u64 ^ 0x5eed),
        };
        demo.run_bots();
        Ok(demo)
    }

    /// The human's public view as JSON.
    pub fn view(&self) -> String {
        serde_json::to_string(&PublicView::new(&self.state, HUMAN)).expect("view serializes")
    }

    /// Applies a human action, then lets the bots move until the human is
    /// to act again. Returns the public event log of every step as JSON.
    pub fn play(&mut self, action: usize) -> Result<String, String> {
        if self.state.is_terminal().is_some() {
            return Err("game over".into());
        }
        let a = Action::new(action).map_err(|e| e.to_string())?;
        if !self.state.legal_actions().get(action) {
            return Err(format!("illegal action {action}"));
        }
        let mut steps = vec![self.state.step(a).map_err(|e| e.to_string())?];
        steps.extend(self.run_bots());
        let public: Vec<_> = steps
            .iter()
            .map(|s| serde_json::json!({"actor": s.actor, "action": s.action, "events": public_events(s, HUMAN)}))
            .collect();
        Ok(serde_json::to_string(&public).expect("events serialize"))
    }

    /// What the greedy-value bot would play in the human's place.
    pub fn hint(&mut self) -> Option<usize> {
        self.human_to_move().then(|| self.hint.act(&self.state, &mut self.rng).index())
    }

    pub fn over(&self) -> bool {
        self.state.is_terminal().is_some()
    }
}

impl Demo {
    fn human_to_move(&self) -> bool {
        self.state.is_terminal().is_none() && self.state.current_player() == HUMAN
    }

    fn run_bots(&mut self) -> Vec<skyjo_core::StepEvents> {
        let mut steps = Vec::new();
        while self.state.is_terminal().is_none() && self.state.current_player() != HUMAN {
            let a = self.bot.act(&self.state, &mut self.rng);
            steps.push(self.state.step(a).expect("bots play legal actions"));
        }
        steps
    }
}
