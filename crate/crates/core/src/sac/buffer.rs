use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::simulator::Observation;

/// One environment transition with the auxiliaries the IR weight needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Arc<Observation>,
    /// Action chosen by the agent, `[steer, speed]` in `[-1, 1]`.
    pub action: [f32; 2],
    pub reward: f32,
    pub next_obs: Arc<Observation>,
    /// True only for failure terminations; the value bootstraps otherwise.
    pub done: bool,
    /// `(speed_norm + 1) / 2` of the commanded action.
    pub speed_norm01: f32,
    /// Measured speed over the top speed.
    pub measured_speed01: f32,
    pub reward_norm01: f32,
}

/// Fixed-capacity ring buffer; overwrites the oldest entry when full.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::param("replay capacity must be at least 1"));
        }
        Ok(Self {
            items: Vec::with_capacity(capacity.min(1 << 16)),
            capacity,
            cursor: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Index of the next slot to be written.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// Distinct indices drawn uniformly.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<usize>> {
        if batch == 0 || batch > self.items.len() {
            return Err(Error::param(format!(
                "cannot sample {batch} transitions from a buffer of {}",
                self.items.len()
            )));
        }
        Ok(rand::seq::index::sample(rng, self.items.len(), batch).into_vec())
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        Ok(self
            .sample_indices(batch, rng)?
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }
}
