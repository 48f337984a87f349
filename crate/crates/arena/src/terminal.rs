//! Plain-text play loop over a [`Session`], for use without a browser.

use crate::protocol::{Frame, ServerMessage};
use crate::session::Session;
use skyjo_core::encoding::PublicView;
use skyjo_core::{Phase, Ranking};
use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

pub fn action_label(index: usize) -> String {
    match index {
        0 => "take discard".into(),
        1 => "draw from deck".into(),
        2 => "keep drawn card".into(),
        3 => "discard drawn card".into(),
        i => format!("cell r{} c{}", (i - 4) / 4, (i - 4) % 4),
    }
}

pub fn render_view(v: &PublicView) -> String {
    let mut s = String::new();
    let phase = match v.phase {
        Phase::ChooseSource => "choose a source",
        Phase::KeepOrDiscard => "keep or discard",
        Phase::ChoosePosition => {
            if v.pending_flip {
                "flip a card"
            } else {
                "place the card"
            }
        }
    };
    for (p, grid) in v.grids.iter().enumerate() {
        let who = if p == v.ego { "you" } else { "agent" };
        let turn = if p == v.current_player && v.ranking.is_none() { " <" } else { "" };
        let _ = writeln!(s, "player {p} ({who}) total {}{turn}", v.cumulative_scores[p]);
        for r in 0..3 {
            s.push_str("   ");
            for c in 0..4 {
                let cell = &grid[r * 4 + c];
                let text = match (cell.removed, cell.value) {
                    (true, _) => "  .".to_string(),
                    (false, Some(x)) => format!("{x:>3}"),
                    (false, None) => "  #".to_string(),
                };
                s.push_str(&text);
            }
            s.push('\n');
        }
    }
    let top = v.discard_top.map_or("-".to_string(), |c| c.to_string());
    let _ = writeln!(s, "discard {top} ({} cards), deck {}", v.discard_size, v.deck_size);
    if let Some(c) = v.pending_card {
        let _ = writeln!(s, "card in hand: {c}");
    }
    if let Some(mask) = &v.legal_mask {
        let _ = writeln!(s, "your move, {phase}:");
        for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
            let _ = writeln!(s, "  {i:>2}  {}", action_label(i));
        }
    }
    s
}

fn render_frame(f: &Frame, out: &mut dyn Write) -> io::Result<()> {
    match ServerMessage::from_frame(f) {
        Ok(ServerMessage::View(v)) => write!(out, "{}", render_view(&v)),
        Ok(ServerMessage::Events(e)) => writeln!(out, "player {} {}", e.actor, action_label(e.action.index())),
        Ok(ServerMessage::Analysis(a)) => match (&a.win_probabilities, a.root_value) {
            (Some(w), Some(v)) => writeln!(out, "  agent value {v:.2}, win probabilities {w:.2?}"),
            _ => Ok(()),
        },
        Ok(ServerMessage::Reject(r)) => writeln!(out, "rejected: {}", r.reason),
        Ok(ServerMessage::Terminal(t)) => {
            writeln!(out, "game over, final totals {:?}", t.cumulative_scores)?;
            for (place, p) in t.ranking.order.iter().enumerate() {
                writeln!(out, "  {}. player {p} ({})", place + 1, t.ranking.scores[*p])?;
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

/// Reads one action index per line until the game ends. Returns `None`
/// when input runs out first.
pub fn play(mut session: Session, input: &mut dyn BufRead, out: &mut dyn Write) -> io::Result<Option<Ranking>> {
    for f in session.resolve_agents() {
        render_frame(&f, out)?;
    }
    let mut line = String::new();
    while !session.is_over() {
        write!(out, "> ")?;
        out.flush()?;
        line.clear();
        if input.read_line(&mut line)? == 0 {
            return Ok(None);
        }
        let Ok(action) = line.trim().parse::<i64>() else {
            writeln!(out, "enter an action number")?;
            continue;
        };
        for f in session.submit(action) {
            render_frame(&f, out)?;
        }
    }
    Ok(session.state().is_terminal())
}
