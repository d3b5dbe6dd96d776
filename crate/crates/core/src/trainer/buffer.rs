use std::collections::VecDeque;

use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::transition::Episode;

/// FIFO store of complete episodes.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    episodes: VecDeque<Episode<T>>,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("buffer", "capacity must be positive"));
        }
        Ok(Self { capacity, episodes: VecDeque::with_capacity(capacity.min(1 << 16)) })
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

    /// Appends, evicting the oldest episode when full.
    pub fn push(&mut self, episode: Episode<T>) {
        if self.episodes.len() == self.capacity {
            self.episodes.pop_front();
        }
        self.episodes.push_back(episode);
    }

    pub fn get(&self, i: usize) -> Option<&Episode<T>> {
        self.episodes.get(i)
    }

    /// `n` distinct episodes chosen uniformly, in draw order.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Result<Vec<&Episode<T>>> {
        if n > self.episodes.len() || n == 0 {
            return Err(Error::InsufficientBuffer { have: self.episodes.len(), need: n.max(1) });
        }
        Ok(sample(rng, self.episodes.len(), n).into_iter().map(|i| &self.episodes[i]).collect())
    }
}
