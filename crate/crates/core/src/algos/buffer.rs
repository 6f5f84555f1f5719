use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::sim::AgentId;

/// Network-ready input features, shared between buffers without copying.
pub type Features = Arc<[f32]>;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub features: Features,
    pub action: usize,
    pub reward: f64,
    pub done: bool,
    pub behavior_log_prob: f64,
    pub behavior_value: f64,
    pub behavior_logits: Vec<f64>,
}

/// A contiguous slice of one agent's experience within one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub agent: AgentId,
    pub episode: u64,
    pub steps: Vec<TrajectoryStep>,
    /// State after the last step when the slice was cut without termination.
    pub bootstrap: Option<Features>,
    /// Parameter version the behavior policy used.
    pub version: u64,
}

impl Trajectory {
    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::protocol("empty trajectory"));
        }
        for (t, s) in self.steps.iter().enumerate() {
            if !s.reward.is_finite() {
                return Err(Error::numeric(format!("non-finite reward at step {t}")));
            }
            if s.behavior_log_prob > 1e-12 || s.behavior_log_prob.is_nan() {
                return Err(Error::protocol(format!("log-prob {} > 0 at step {t}", s.behavior_log_prob)));
            }
        }
        Ok(())
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    pub fn dones(&self) -> Vec<bool> {
        self.steps.iter().map(|s| s.done).collect()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Action as stored in replay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StoredAction {
    Discrete(usize),
    Continuous([f64; 2]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub features: Features,
    pub action: StoredAction,
    pub reward: f64,
    pub next_features: Features,
    pub done: bool,
}

impl Transition {
    pub fn discrete_action(&self) -> usize {
        match self.action {
            StoredAction::Discrete(a) => a,
            StoredAction::Continuous(_) => panic!("continuous action in a discrete batch"),
        }
    }

    pub fn continuous_action(&self) -> [f64; 2] {
        match self.action {
            StoredAction::Continuous(a) => a,
            StoredAction::Discrete(_) => panic!("discrete action in a continuous batch"),
        }
    }
}

/// Fixed-capacity ring buffer with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: Vec<T>,
    next: usize,
}

impl<T: Clone> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(4096)),
            next: 0,
        }
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.next] = item;
        }
        self.next = (self.next + 1) % self.capacity;
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

    /// Uniform sample with replacement; `None` until `batch` items are stored.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Option<Vec<T>> {
        if self.items.len() < batch || batch == 0 {
            return None;
        }
        Some((0..batch).map(|_| self.items[rng.random_range(0..self.items.len())].clone()).collect())
    }
}
