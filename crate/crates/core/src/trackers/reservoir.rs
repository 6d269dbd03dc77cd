use rand::Rng;

use super::{Tracker, TrackerError, TrackerRng};
use crate::stream::RowAddress;

/// Hardware-friendly reservoir: each item gets a uniform tag and the k
/// smallest tags seen so far are kept. Tags are 64-bit fixed-point values
/// in [0, 1).
#[derive(Debug, Clone)]
pub struct Reservoir {
    capacity: usize,
    slots: Vec<(RowAddress, u64)>,
    max_slot: usize,
}

impl Reservoir {
    pub fn new(capacity: usize) -> Result<Self, TrackerError> {
        if capacity == 0 {
            return Err(TrackerError::ZeroCapacity);
        }
        Ok(Self {
            capacity,
            slots: Vec::with_capacity(capacity),
            max_slot: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn update<R: Rng + ?Sized>(&mut self, row: RowAddress, rng: &mut R) {
        let tag = rng.random::<u64>();
        if self.slots.len() < self.capacity {
            self.slots.push((row, tag));
            if self.slots.len() == self.capacity {
                self.rederive_max();
            }
            return;
        }
        if tag < self.slots[self.max_slot].1 {
            self.slots[self.max_slot] = (row, tag);
            self.rederive_max();
        }
    }

    fn rederive_max(&mut self) {
        self.max_slot = self
            .slots
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .1.cmp(&b.1 .1).then(b.0.cmp(&a.0)))
            .map_or(0, |(i, _)| i);
    }

    pub fn samples(&self) -> impl Iterator<Item = RowAddress> + '_ {
        self.slots.iter().map(|&(r, _)| r)
    }

    pub fn tags(&self) -> impl Iterator<Item = u64> + '_ {
        self.slots.iter().map(|&(_, t)| t)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn clear(&mut self) {
        self.slots.clear();
        self.max_slot = 0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReservoirMode {
    /// Sample k rows per tREFI; the reservoir empties at every REF.
    PerRef,
    /// One sample over the whole stream; REFs mitigate nothing.
    WholeWindow,
}

#[derive(Debug, Clone)]
pub struct ReservoirTracker {
    reservoir: Reservoir,
    mode: ReservoirMode,
    rng: TrackerRng,
}

impl ReservoirTracker {
    pub fn new(capacity: usize, mode: ReservoirMode, seed: u64) -> Result<Self, TrackerError> {
        Ok(Self {
            reservoir: Reservoir::new(capacity)?,
            mode,
            rng: TrackerRng::new(seed),
        })
    }

    pub fn reservoir(&self) -> &Reservoir {
        &self.reservoir
    }
}

impl Tracker for ReservoirTracker {
    fn name(&self) -> &'static str {
        "reservoir"
    }

    fn on_activation(&mut self, row: RowAddress) {
        self.reservoir.update(row, &mut self.rng);
    }

    fn on_ref(&mut self, slot_budget: usize) -> Vec<RowAddress> {
        if self.mode == ReservoirMode::WholeWindow {
            return Vec::new();
        }
        let mut rows: Vec<RowAddress> = Vec::with_capacity(self.reservoir.len());
        for row in self.reservoir.samples() {
            if rows.len() < slot_budget && !rows.contains(&row) {
                rows.push(row);
            }
        }
        self.reservoir.clear();
        rows
    }

    fn estimate(&self, _row: RowAddress) -> Option<u64> {
        None
    }

    fn reset(&mut self) {
        self.reservoir.clear();
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
