//! Synchronous message dispatch over many sessions. The websocket server
//! runs the same session logic with one task per session.

use crate::checkpoints::CheckpointStore;
use crate::protocol::{ClientMessage, ErrorPayload, Frame};
use crate::session::Session;
use std::collections::BTreeMap;
use std::sync::Arc;

pub fn error_frame(session: Option<&str>, message: impl Into<String>) -> Frame {
    Frame::new("error", session, ErrorPayload { message: message.into() }, 0)
}

#[derive(Debug)]
pub struct Hub {
    store: Arc<CheckpointStore>,
    sessions: BTreeMap<String, Session>,
    created: u64,
}

impl Hub {
    pub fn new(store: Arc<CheckpointStore>) -> Hub {
        Hub { store, sessions: BTreeMap::new(), created: 0 }
    }

    pub fn session(&self, id: &str) -> Option<&Session> {
        self.sessions.get(id)
    }

    pub fn sessions(&self) -> impl Iterator<Item = &Session> {
        self.sessions.values()
    }

    pub fn close(&mut self, id: &str) -> Option<Session> {
        self.sessions.remove(id)
    }

    /// Handles one raw client frame and returns the frames to send back.
    pub fn handle_text(&mut self, text: &str) -> Vec<Frame> {
        match ClientMessage::parse(text) {
            Ok(m) => self.handle(m),
            Err(e) => vec![error_frame(None, e)],
        }
    }

    pub fn handle(&mut self, msg: ClientMessage) -> Vec<Frame> {
        match msg {
            ClientMessage::Create(req) => {
                self.created += 1;
                let id = format!("s{}", self.created);
                match Session::create(&id, &req, &self.store) {
                    Ok((s, frames)) => {
                        self.sessions.insert(id, s);
                        frames
                    }
                    Err(e) => vec![error_frame(None, e.to_string())],
                }
            }
            ClientMessage::Action { session, action } => match self.sessions.get_mut(&session) {
                Some(s) => s.submit(action),
                None => vec![error_frame(Some(&session), "unknown or expired session")],
            },
            ClientMessage::Resume { session, from_seq } => match self.sessions.get(&session) {
                Some(s) => s.frames_from(from_seq),
                None => vec![error_frame(Some(&session), "unknown or expired session")],
            },
        }
    }
}
