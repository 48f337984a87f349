//! Binary game record: enough to rebuild any game bit for bit.
//!
//! Layout, little endian:
//! `b"SKJR"`, u16 version, u8 num_players, u8 rule flags, u32 max_steps,
//! i32 end_score, u64 seed, u32 action count, one u8 per action.

use crate::engine::{Action, EngineError, GameState, Rules};
use std::io::{self, Read, Write};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"SKJR";
pub const FORMAT_VERSION: u16 = 1;

const FLAG_DOUBLE_NON_POSITIVE: u8 = 1;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("not a replay file")]
    BadMagic,
    #[error("unsupported replay version {0}")]
    Version(u16),
    #[error("unknown rule flags {0:#04x}")]
    Flags(u8),
    #[error("replay diverged at step {step}: {source}")]
    Engine { step: usize, source: EngineError },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameRecord {
    pub num_players: u8,
    pub rules: Rules,
    pub seed: u64,
    pub actions: Vec<Action>,
}

impl GameRecord {
    pub fn new(num_players: usize, seed: u64, rules: Rules) -> GameRecord {
        GameRecord { num_players: num_players as u8, rules, seed, actions: Vec::new() }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(&MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&[self.num_players])?;
        let flags = if self.rules.double_non_positive { FLAG_DOUBLE_NON_POSITIVE } else { 0 };
        w.write_all(&[flags])?;
        w.write_all(&self.rules.max_steps.to_le_bytes())?;
        w.write_all(&self.rules.end_score.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&(self.actions.len() as u32).to_le_bytes())?;
        let bytes: Vec<u8> = self.actions.iter().map(|a| a.index() as u8).collect();
        w.write_all(&bytes)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(28 + self.actions.len());
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<GameRecord, ReplayError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != MAGIC {
            return Err(ReplayError::BadMagic);
        }
        let version = u16::from_le_bytes(read_array(&mut r)?);
        if version != FORMAT_VERSION {
            return Err(ReplayError::Version(version));
        }
        let [num_players, flags] = read_array(&mut r)?;
        if flags & !FLAG_DOUBLE_NON_POSITIVE != 0 {
            return Err(ReplayError::Flags(flags));
        }
        let max_steps = u32::from_le_bytes(read_array(&mut r)?);
        let end_score = i32::from_le_bytes(read_array(&mut r)?);
        let seed = u64::from_le_bytes(read_array(&mut r)?);
        let count = u32::from_le_bytes(read_array(&mut r)?) as usize;
        let mut bytes = Vec::new();
        r.take(count as u64).read_to_end(&mut bytes)?;
        if bytes.len() != count {
            return Err(io::Error::from(io::ErrorKind::UnexpectedEof).into());
        }
        let actions = bytes
            .iter()
            .enumerate()
            .map(|(step, &b)| Action::new(b as usize).map_err(|source| ReplayError::Engine { step, source }))
            .collect::<Result<_, _>>()?;
        let rules = Rules { double_non_positive: flags & FLAG_DOUBLE_NON_POSITIVE != 0, max_steps, end_score };
        Ok(GameRecord { num_players, rules, seed, actions })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<GameRecord, ReplayError> {
        GameRecord::read_from(bytes)
    }

    /// Rebuild the final state by replaying every action.
    pub fn replay(&self) -> Result<GameState, ReplayError> {
        let mut state = GameState::with_rules(self.num_players as usize, self.seed, self.rules)
            .map_err(|source| ReplayError::Engine { step: 0, source })?;
        for (step, &a) in self.actions.iter().enumerate() {
            state.step(a).map_err(|source| ReplayError::Engine { step, source })?;
        }
        Ok(state)
    }
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> io::Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}
