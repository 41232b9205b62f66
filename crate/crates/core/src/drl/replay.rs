use std::collections::VecDeque;

use rand::Rng;

use crate::env::acts::ActionSet;

#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
    /// Actions the learner could pick in `next_state`; the target maximises over these.
    pub next_candidates: ActionSet,
}

/// Bounded FIFO of experiences with uniform sampling (with replacement).
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    buffer: VecDeque<Experience>,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        ReplayMemory {
            capacity,
            buffer: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    /// Appends `e`, evicting the oldest experience when full.
    pub fn push(&mut self, e: Experience) {
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
        }
        self.buffer.push_back(e);
    }

    /// Experience at position `i`, oldest first.
    pub fn get(&self, i: usize) -> &Experience {
        &self.buffer[i]
    }

    /// Fills `out` with `n` positions drawn uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R, out: &mut Vec<usize>) {
        out.clear();
        if self.buffer.is_empty() {
            return;
        }
        out.extend((0..n).map(|_| rng.gen_range(0..self.buffer.len())));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp(tag: usize) -> Experience {
        Experience {
            state: vec![tag as f64],
            action: 0,
            reward: 0.0,
            next_state: vec![],
            terminal: false,
            next_candidates: ActionSet::empty(),
        }
    }

    #[test]
    fn evicts_oldest_first() {
        let mut m = ReplayMemory::new(3);
        for i in 0..5 {
            m.push(exp(i));
        }
        assert_eq!(m.len(), 3);
        assert_eq!(m.get(0).state, vec![2.0]);
        assert_eq!(m.get(2).state, vec![4.0]);
    }
}
