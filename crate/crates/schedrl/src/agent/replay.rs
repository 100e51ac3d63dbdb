//! Fixed-capacity experience replay: a ring that evicts the oldest entry
//! and samples uniformly with replacement.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: usize,
    pub r: f64,
    pub s_next: Vec<f64>,
    pub done: bool,
    /// Simulated ticks the step spanned. The environment is event-compressed,
    /// so steps have unequal durations; targets discount by elapsed time
    /// (gamma^dt on the bootstrap, a discounted-integral re-weighting of `r`),
    /// never per step — otherwise a policy could dilute future penalties just
    /// by taking more decision points per tick.
    pub dt: u64,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    /// Ring write head once `items` is full.
    next: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<ReplayBuffer> {
        if capacity == 0 {
            return Err(Error::Config("replay buffer capacity must be >= 1".into()));
        }
        Ok(ReplayBuffer { capacity, items: Vec::new(), next: 0, inserted: 0 })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
            self.next = (self.next + 1) % self.capacity;
        }
        self.inserted += 1;
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Uniform-with-replacement sample of `n` indices. Requires at least `n`
    /// stored transitions so early training cannot oversample a tiny buffer.
    pub fn sample_indices(&self, n: usize, rng: &mut impl Rng, out: &mut Vec<usize>) -> Result<()> {
        if self.items.len() < n {
            return Err(Error::State(format!(
                "replay sample of {n} from a buffer holding {}",
                self.items.len()
            )));
        }
        out.clear();
        out.extend((0..n).map(|_| rng.random_range(0..self.items.len())));
        Ok(())
    }
}
