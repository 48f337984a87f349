//! Wire format. Every message in either direction is a JSON frame
//! `{type, session, payload, seq}`.
//!
//! Client to server:
//! - `create`: `{num_players, human_seat, checkpoint, seed?}`
//! - `action`: `{action}` with an index into the 16-slot action space
//! - `resume`: `{from_seq}`, resend the session's frames from `from_seq` on
//!
//! Server to client (`seq` counts up from 0 per session):
//! - `view`: the human's [`PublicView`]
//! - `events`: one engine step as the human may see it
//! - `thinking`: the agent is searching for `player`
//! - `analysis`: the agent's search summary for the move it just made
//! - `reject`: the action was not applied; carries the legal mask
//! - `terminal`: final ranking and cumulative scores
//! - `error`: malformed request, unknown session or checkpoint

use serde::{Deserialize, Serialize};
use serde_json::Value;
use skyjo_core::encoding::PublicView;
use skyjo_core::{Action, Event, Phase, Ranking, ACTION_COUNT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    #[serde(rename = "type")]
    pub kind: String,
    pub session: Option<String>,
    #[serde(default)]
    pub payload: Value,
    #[serde(default)]
    pub seq: u64,
}

impl Frame {
    pub fn new(kind: &str, session: Option<&str>, payload: impl Serialize, seq: u64) -> Frame {
        Frame {
            kind: kind.to_string(),
            session: session.map(str::to_string),
            payload: serde_json::to_value(payload).expect("payload serializes"),
            seq,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("frame serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub num_players: usize,
    pub human_seat: usize,
    pub checkpoint: String,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionRequest {
    pub action: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResumeRequest {
    pub from_seq: u64,
}

/// A parsed client frame.
#[derive(Debug, Clone, PartialEq)]
pub enum ClientMessage {
    Create(CreateRequest),
    Action { session: String, action: i64 },
    Resume { session: String, from_seq: u64 },
}

impl ClientMessage {
    pub fn parse(text: &str) -> Result<ClientMessage, String> {
        let frame: Frame = serde_json::from_str(text).map_err(|e| format!("malformed frame: {e}"))?;
        ClientMessage::from_frame(frame)
    }

    pub fn from_frame(frame: Frame) -> Result<ClientMessage, String> {
        let payload = |f: &Frame| f.payload.clone();
        let session = |f: &Frame| f.session.clone().ok_or_else(|| format!("{} frame without a session", f.kind));
        match frame.kind.as_str() {
            "create" => serde_json::from_value(payload(&frame))
                .map(ClientMessage::Create)
                .map_err(|e| format!("malformed create payload: {e}")),
            "action" => {
                let r: ActionRequest =
                    serde_json::from_value(payload(&frame)).map_err(|e| format!("malformed action payload: {e}"))?;
                Ok(ClientMessage::Action { session: session(&frame)?, action: r.action })
            }
            "resume" => {
                let r: ResumeRequest =
                    serde_json::from_value(payload(&frame)).map_err(|e| format!("malformed resume payload: {e}"))?;
                Ok(ClientMessage::Resume { session: session(&frame)?, from_seq: r.from_seq })
            }
            other => Err(format!("unknown frame type {other:?}")),
        }
    }

    pub fn to_frame(&self, seq: u64) -> Frame {
        match self {
            ClientMessage::Create(r) => Frame::new("create", None, r, seq),
            ClientMessage::Action { session, action } => {
                Frame::new("action", Some(session), ActionRequest { action: *action }, seq)
            }
            ClientMessage::Resume { session, from_seq } => {
                Frame::new("resume", Some(session), ResumeRequest { from_seq: *from_seq }, seq)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventsPayload {
    pub actor: usize,
    pub action: Action,
    pub phase: Phase,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThinkingPayload {
    pub player: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisPayload {
    pub player: usize,
    pub action: Action,
    pub visit_distribution: Vec<f64>,
    pub root_value: Option<f32>,
    /// Winner-head probability per absolute seat.
    pub win_probabilities: Option<Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectPayload {
    pub action: i64,
    pub reason: String,
    pub legal_mask: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalPayload {
    pub ranking: Ranking,
    pub cumulative_scores: Vec<i32>,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub message: String,
}

/// Server frames decoded by type.
#[derive(Debug, Clone, PartialEq)]
pub enum ServerMessage {
    View(Box<PublicView>),
    Events(EventsPayload),
    Thinking(ThinkingPayload),
    Analysis(AnalysisPayload),
    Reject(RejectPayload),
    Terminal(TerminalPayload),
    Error(ErrorPayload),
}

impl ServerMessage {
    pub fn from_frame(frame: &Frame) -> Result<ServerMessage, String> {
        let p = frame.payload.clone();
        let r = match frame.kind.as_str() {
            "view" => serde_json::from_value(p).map(|v| ServerMessage::View(Box::new(v))),
            "events" => serde_json::from_value(p).map(ServerMessage::Events),
            "thinking" => serde_json::from_value(p).map(ServerMessage::Thinking),
            "analysis" => serde_json::from_value(p).map(ServerMessage::Analysis),
            "reject" => serde_json::from_value(p).map(ServerMessage::Reject),
            "terminal" => serde_json::from_value(p).map(ServerMessage::Terminal),
            "error" => serde_json::from_value(p).map(ServerMessage::Error),
            other => return Err(format!("unknown frame type {other:?}")),
        };
        r.map_err(|e| format!("bad {} payload: {e}", frame.kind))
    }
}

pub fn mask_vec(mask: skyjo_core::ActionMask) -> Vec<bool> {
    (0..ACTION_COUNT).map(|i| mask.get(i)).collect()
}
