use rand::Rng;

use super::AgentError;

/// One environment interaction. `action` holds the two control values in
/// `[-1, 1]`; `shaped_reward` is the value computed when it was stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: [f64; 2],
    pub duration: f64,
    pub task_reward: f64,
    pub shaped_reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Fixed-capacity ring buffer with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    inserted: u64,
    duration_bounds: (f64, f64),
}

impl ReplayBuffer {
    pub fn new(capacity: usize, duration_bounds: (f64, f64)) -> Result<Self, AgentError> {
        if capacity == 0 {
            return Err(AgentError::Config("replay capacity must be positive".into()));
        }
        Ok(Self { items: Vec::with_capacity(capacity.min(1 << 16)), capacity, inserted: 0, duration_bounds })
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

    /// Total number of pushes, including overwritten ones.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn push(&mut self, t: Transition) -> Result<(), AgentError> {
        let (lo, hi) = self.duration_bounds;
        if !(t.duration >= lo - 1e-12 && t.duration <= hi + 1e-12) {
            return Err(AgentError::Domain(format!("duration {} outside [{lo}, {hi}]", t.duration)));
        }
        if t.state.len() != t.next_state.len() {
            return Err(AgentError::Domain("state and next state differ in length".into()));
        }
        let slot = (self.inserted % self.capacity as u64) as usize;
        if slot < self.items.len() {
            self.items[slot] = t;
        } else {
            self.items.push(t);
        }
        self.inserted += 1;
        Ok(())
    }

    /// Uniform sample with replacement.
    pub fn sample<'a, R: Rng + ?Sized>(&'a self, batch: usize, rng: &mut R) -> Result<Vec<&'a Transition>, AgentError> {
        if batch == 0 || self.items.len() < batch {
            return Err(AgentError::Precondition(format!(
                "cannot sample {batch} transitions from a buffer of {}",
                self.items.len()
            )));
        }
        Ok((0..batch).map(|_| &self.items[rng.random_range(0..self.items.len())]).collect())
    }
}
