use std::collections::VecDeque;

use rand::Rng;

use super::{Tracker, TrackerError, TrackerRng};
use crate::stream::RowAddress;

/// Bernoulli sampling into a FIFO buffer; each REF mitigates from the head.
#[derive(Debug, Clone)]
pub struct PrideTracker {
    capacity: usize,
    p: f64,
    fifo: VecDeque<RowAddress>,
    evictions: u64,
    missed_refs: u64,
    rng: TrackerRng,
}

impl PrideTracker {
    pub fn new(capacity: usize, p: f64, seed: u64) -> Result<Self, TrackerError> {
        if capacity == 0 {
            return Err(TrackerError::ZeroCapacity);
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(TrackerError::ParameterRange {
                name: "p",
                value: p.to_string(),
                range: "[0, 1]",
            });
        }
        Ok(Self {
            capacity,
            p,
            fifo: VecDeque::with_capacity(capacity),
            evictions: 0,
            missed_refs: 0,
            rng: TrackerRng::new(seed),
        })
    }

    pub fn buffer(&self) -> &VecDeque<RowAddress> {
        &self.fifo
    }

    /// Rows dropped from the head by overflow.
    pub fn evictions(&self) -> u64 {
        self.evictions
    }

    /// REFs that found the buffer empty.
    pub fn missed_refs(&self) -> u64 {
        self.missed_refs
    }
}

impl Tracker for PrideTracker {
    fn name(&self) -> &'static str {
        "pride"
    }

    fn on_activation(&mut self, row: RowAddress) {
        let sampled = match self.p {
            p if p >= 1.0 => true,
            p if p <= 0.0 => false,
            p => self.rng.random_bool(p),
        };
        if !sampled {
            return;
        }
        if self.fifo.len() == self.capacity {
            self.fifo.pop_front();
            self.evictions += 1;
        }
        self.fifo.push_back(row);
    }

    fn on_ref(&mut self, slot_budget: usize) -> Vec<RowAddress> {
        if self.fifo.is_empty() && slot_budget > 0 {
            self.missed_refs += 1;
        }
        let n = slot_budget.min(self.fifo.len());
        self.fifo.drain(..n).collect()
    }

    fn estimate(&self, _row: RowAddress) -> Option<u64> {
        None
    }

    fn reset(&mut self) {
        self.fifo.clear();
    }

    fn rng_draws(&self) -> u64 {
        self.rng.draws()
    }

    fn reseed(&mut self, seed: u64) {
        self.rng = TrackerRng::new(seed);
    }

    fn clone_box(&self) -> Box<dyn Tracker> {
        Box::new(self.clone())
    }
}
