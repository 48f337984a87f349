//! Named agents: saved checkpoints, in-memory nets and scripted bots.

use skyjo_core::bots::{BotKind, BotPolicy};
use skyjo_muzero::agent::Player;
use skyjo_muzero::search::SearchConfig;
use skyjo_muzero::trainer::latest_checkpoint;
use skyjo_muzero::Nets;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use thiserror::Error;

pub const CHECKPOINT_DIR_ENV: &str = "SKYJO_CHECKPOINT_DIR";

#[derive(Debug, Error, PartialEq)]
pub enum CheckpointError {
    #[error("unknown checkpoint {0:?}")]
    Unknown(String),
    #[error("checkpoint {id:?} failed to load: {reason}")]
    Load { id: String, reason: String },
}

/// Resolves checkpoint ids to agents and shares loaded weights.
///
/// Ids are tried in order: `bot:<name>`, a registered name, `latest`, a
/// directory under the checkpoint root, then (if enabled) a filesystem path.
#[derive(Debug)]
pub struct CheckpointStore {
    root: Option<PathBuf>,
    search: SearchConfig,
    allow_paths: bool,
    loaded: Mutex<BTreeMap<String, Arc<Nets>>>,
}

impl CheckpointStore {
    pub fn new(root: Option<PathBuf>, search: SearchConfig) -> CheckpointStore {
        CheckpointStore { root, search, allow_paths: false, loaded: Mutex::new(BTreeMap::new()) }
    }

    /// Lets ids name arbitrary checkpoint directories. Off for the server.
    pub fn with_paths(mut self, allow: bool) -> CheckpointStore {
        self.allow_paths = allow;
        self
    }

    /// Root taken from `SKYJO_CHECKPOINT_DIR` when set.
    pub fn from_env(search: SearchConfig) -> CheckpointStore {
        CheckpointStore::new(std::env::var_os(CHECKPOINT_DIR_ENV).map(PathBuf::from), search)
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    pub fn search(&self) -> &SearchConfig {
        &self.search
    }

    pub fn register(&self, id: &str, nets: Nets) {
        self.loaded.lock().unwrap().insert(id.to_string(), Arc::new(nets));
    }

    /// Registered ids plus `iter_N` directories under the root.
    pub fn list(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.loaded.lock().unwrap().keys().cloned().collect();
        if let Some(entries) = self.root.as_ref().and_then(|r| std::fs::read_dir(r).ok()) {
            for e in entries.flatten() {
                if e.path().join("manifest.json").exists() {
                    if let Some(name) = e.file_name().to_str() {
                        ids.push(name.to_string());
                    }
                }
            }
        }
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn agent(&self, id: &str) -> Result<Player, CheckpointError> {
        if let Some(name) = id.strip_prefix("bot:") {
            let kind: BotKind = name.parse().map_err(|_| CheckpointError::Unknown(id.to_string()))?;
            return Ok(Player::Bot(BotPolicy::new(kind)));
        }
        Ok(Player::mcts(self.nets(id)?, self.search.clone()))
    }

    pub fn nets(&self, id: &str) -> Result<Arc<Nets>, CheckpointError> {
        if let Some(n) = self.loaded.lock().unwrap().get(id) {
            return Ok(n.clone());
        }
        let path = self.locate(id).ok_or_else(|| CheckpointError::Unknown(id.to_string()))?;
        let nets = Nets::load(&path).map_err(|e| CheckpointError::Load { id: id.to_string(), reason: e.to_string() })?;
        let nets = Arc::new(nets);
        self.loaded.lock().unwrap().insert(id.to_string(), nets.clone());
        Ok(nets)
    }

    fn locate(&self, id: &str) -> Option<PathBuf> {
        let is_ckpt = |p: &Path| p.join("manifest.json").exists();
        if let Some(root) = &self.root {
            if id == "latest" {
                return latest_checkpoint(root);
            }
            // Ids are single path components under the root.
            if !id.is_empty() && !id.contains(['/', '\\']) && id != ".." && is_ckpt(&root.join(id)) {
                return Some(root.join(id));
            }
        }
        let p = PathBuf::from(id);
        (self.allow_paths && is_ckpt(&p)).then_some(p)
    }
}
