use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::types::Transition;

/// Bounded FIFO of transitions; the oldest are evicted first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    transitions: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("buffer capacity must be positive".into()));
        }
        Ok(ReplayBuffer { transitions: VecDeque::with_capacity(capacity.min(1 << 16)), capacity })
    }

    pub fn push(&mut self, t: Transition) {
        if self.transitions.len() == self.capacity {
            self.transitions.pop_front();
        }
        self.transitions.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.transitions.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> + Clone {
        self.transitions.iter()
    }
}

impl Extend<Transition> for ReplayBuffer {
    fn extend<I: IntoIterator<Item = Transition>>(&mut self, iter: I) {
        for t in iter {
            self.push(t);
        }
    }
}
