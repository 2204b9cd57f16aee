use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::store::LatentDataset;

/// Fixed-capacity reservoir over the stream of past `(latent, label)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirBuffer {
    capacity: usize,
    seen: u64,
    items: Vec<(Vec<f64>, usize)>,
}

impl ReservoirBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            seen: 0,
            items: Vec::with_capacity(capacity),
        }
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

    /// Number of items offered so far.
    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn items(&self) -> &[(Vec<f64>, usize)] {
        &self.items
    }

    pub fn offer(&mut self, latent: Vec<f64>, label: usize, rng: &mut Rng) {
        self.seen += 1;
        if self.items.len() < self.capacity {
            self.items.push((latent, label));
        } else if self.capacity > 0 {
            let j = rng.random_range(0..self.seen);
            if j < self.capacity as u64 {
                self.items[j as usize] = (latent, label);
            }
        }
    }

    /// Offers every sample of `dataset` in order.
    pub fn extend_from(&mut self, dataset: &LatentDataset, rng: &mut Rng) {
        for (row, &label) in dataset.features().outer_iter().zip(dataset.labels()) {
            self.offer(row.to_vec(), label, rng);
        }
    }

    /// `n` stored items drawn uniformly with replacement.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
        if self.items.is_empty() && n > 0 {
            return Err(Error::Empty("replay buffer"));
        }
        let mut latents = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let (x, y) = &self.items[rng.random_range(0..self.items.len())];
            latents.push(x.clone());
            labels.push(*y);
        }
        Ok((latents, labels))
    }
}
