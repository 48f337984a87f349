//! Episode ring with phase-stratified step sampling.

use crate::episode::Episode;
use rand::Rng;
use skyjo_core::Phase;
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BufferError {
    #[error("replay buffer holds {have} episodes, {need} required")]
    Underflow { have: usize, need: usize },
}

/// A sampled step: episode id, step index within it, and the ego stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepRef {
    pub episode: u64,
    pub step: usize,
    pub ego: usize,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    first_id: u64,
    episodes: VecDeque<Episode>,
    /// Per phase, `(episode id, step)` in insertion order.
    strata: [VecDeque<(u64, u32)>; 3],
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> ReplayBuffer {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer { capacity, first_id: 0, episodes: VecDeque::new(), strata: Default::default() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    /// Id the next pushed episode will receive.
    pub fn next_id(&self) -> u64 {
        self.first_id + self.episodes.len() as u64
    }

    pub fn push(&mut self, ep: Episode) -> u64 {
        if self.episodes.len() == self.capacity {
            self.episodes.pop_front();
            let gone = self.first_id;
            for s in &mut self.strata {
                while s.front().is_some_and(|&(id, _)| id == gone) {
                    s.pop_front();
                }
            }
            self.first_id += 1;
        }
        let id = self.next_id();
        for (t, step) in ep.steps.iter().enumerate() {
            self.strata[step.phase.index()].push_back((id, t as u32));
        }
        self.episodes.push_back(ep);
        id
    }

    pub fn get(&self, id: u64) -> Option<&Episode> {
        id.checked_sub(self.first_id).and_then(|i| self.episodes.get(i as usize))
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &Episode)> {
        self.episodes.iter().enumerate().map(|(i, e)| (self.first_id + i as u64, e))
    }

    pub fn phase_counts(&self) -> [usize; 3] {
        [self.strata[0].len(), self.strata[1].len(), self.strata[2].len()]
    }

    /// Samples `batch` step references: each phase present gets at least
    /// `ceil(floor · batch)` slots, the rest follow phase frequency.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        batch: usize,
        floor: f64,
        warmup: usize,
        rng: &mut R,
    ) -> Result<Vec<StepRef>, BufferError> {
        if self.len() < warmup.max(1) {
            return Err(BufferError::Underflow { have: self.len(), need: warmup.max(1) });
        }
        let counts = stratum_sizes(self.phase_counts(), batch, floor);
        let mut out = Vec::with_capacity(batch);
        for (phase, &k) in Phase::ALL.iter().zip(&counts) {
            let stratum = &self.strata[phase.index()];
            for _ in 0..k {
                let (id, step) = stratum[rng.random_range(0..stratum.len())];
                let n = self.get(id).expect("stratum entries are live").num_players;
                out.push(StepRef { episode: id, step: step as usize, ego: rng.random_range(0..n) });
            }
        }
        Ok(out)
    }
}

/// Per-phase slot counts summing to `batch`. Phases with no steps get 0.
pub fn stratum_sizes(phase_counts: [usize; 3], batch: usize, floor: f64) -> [usize; 3] {
    let total: usize = phase_counts.iter().sum();
    let present: Vec<usize> = (0..3).filter(|&p| phase_counts[p] > 0).collect();
    let mut out = [0usize; 3];
    if total == 0 || batch == 0 {
        return out;
    }
    let min = ((floor * batch as f64).ceil() as usize).min(batch / present.len());
    // Phases whose proportional share falls under the floor are pinned to it;
    // the remainder is split by largest remainder among the others.
    let mut pinned = [false; 3];
    loop {
        let free: Vec<usize> = present.iter().copied().filter(|&p| !pinned[p]).collect();
        let budget = batch - min * (present.len() - free.len());
        let free_total: usize = free.iter().map(|&p| phase_counts[p]).sum();
        let mut changed = false;
        for &p in &free {
            if (phase_counts[p] as f64 / free_total as f64) * (budget as f64) < min as f64 {
                pinned[p] = true;
                changed = true;
            }
        }
        if changed && free.iter().any(|&p| !pinned[p]) {
            continue;
        }
        for &p in &present {
            if pinned[p] {
                out[p] = min;
            }
        }
        let free: Vec<usize> = present.iter().copied().filter(|&p| !pinned[p]).collect();
        let budget = batch - min * (present.len() - free.len());
        let free_total: usize = free.iter().map(|&p| phase_counts[p]).sum();
        let mut rema: Vec<(f64, usize)> = Vec::new();
        let mut used = 0;
        for &p in &free {
            let exact = phase_counts[p] as f64 / free_total as f64 * budget as f64;
            out[p] = exact.floor() as usize;
            used += out[p];
            rema.push((exact - exact.floor(), p));
        }
        rema.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, p) in rema.iter().take(budget - used) {
            out[p] += 1;
        }
        if free.is_empty() {
            // Everything pinned: hand leftovers to the most frequent phase.
            let left = batch - out.iter().sum::<usize>();
            let top = *present.iter().max_by_key(|&&p| (phase_counts[p], usize::MAX - p)).unwrap();
            out[top] += left;
        }
        return out;
    }
}
