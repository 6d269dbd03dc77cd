use rand::seq::index::sample;

use super::{Tracker, TrackerError, TrackerRng};
use crate::stream::RowAddress;

/// Rows at the 1-based positions `drawn` of one tREFI's activations.
/// Positions past the end of the slot yield nothing.
pub fn mint_select(slot: &[RowAddress], drawn: &[usize]) -> Vec<RowAddress> {
    drawn
        .iter()
        .filter_map(|&p| p.checked_sub(1).and_then(|i| slot.get(i)).copied())
        .collect()
}

/// Pre-selects k distinct positions in `[1, max_slots]` per tREFI and
/// buffers the rows activated at those positions. The draw happens at the
/// first activation of each slot, so an idle slot consumes no randomness.
#[derive(Debug, Clone)]
pub struct MintTracker {
    k: usize,
    max_slots: usize,
    drawn: Vec<usize>,
    position: usize,
    buffer: Vec<RowAddress>,
    rng: TrackerRng,
}

impl MintTracker {
    pub fn new(k: usize, max_slots: usize, seed: u64) -> Result<Self, TrackerError> {
        if k == 0 {
            return Err(TrackerError::ZeroCapacity);
        }
        if k > max_slots {
            return Err(TrackerError::ParameterRange {
                name: "k",
                value: k.to_string(),
                range: "[1, max_slots]",
            });
        }
        Ok(Self {
            k,
            max_slots,
            drawn: Vec::with_capacity(k),
            position: 0,
            buffer: Vec::with_capacity(k),
            rng: TrackerRng::new(seed),
        })
    }

    pub fn max_slots(&self) -> usize {
        self.max_slots
    }

    fn draw(&mut self) {
        self.drawn.clear();
        self.drawn
            .extend(sample(&mut self.rng, self.max_slots, self.k).iter().map(|i| i + 1));
    }
}

impl Tracker for MintTracker {
    fn name(&self) -> &'static str {
        "mint"
    }

    fn on_activation(&mut self, row: RowAddress) {
        if self.position == 0 {
            self.draw();
        }
        self.position += 1;
        if self.drawn.contains(&self.position) {
            self.buffer.push(row);
        }
    }

    fn on_ref(&mut self, slot_budget: usize) -> Vec<RowAddress> {
        let mut rows = Vec::with_capacity(self.buffer.len());
        for &row in &self.buffer {
            if rows.len() < slot_budget && !rows.contains(&row) {
                rows.push(row);
            }
        }
        self.buffer.clear();
        self.position = 0;
        rows
    }

    fn estimate(&self, _row: RowAddress) -> Option<u64> {
        None
    }

    fn reset(&mut self) {
        self.buffer.clear();
        self.position = 0;
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

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(n: u32) -> Vec<RowAddress> {
        (0..n).map(RowAddress).collect()
    }

    #[test]
    fn select_skips_missing_positions() {
        assert_eq!(mint_select(&rows(36), &[50]), vec![]);
        assert_eq!(mint_select(&rows(36), &[36]), vec![RowAddress(35)]);
        assert_eq!(mint_select(&[], &[1]), vec![]);
    }

    #[test]
    fn full_slot_always_yields_k_rows() {
        let mut m = MintTracker::new(2, 73, 9).unwrap();
        for slot in 0..50 {
            for i in 0..73 {
                m.on_activation(RowAddress(slot * 100 + i));
            }
            assert_eq!(m.on_ref(2).len(), 2);
        }
    }

    #[test]
    fn idle_slot_draws_nothing() {
        let mut m = MintTracker::new(1, 73, 9).unwrap();
        assert!(m.on_ref(1).is_empty());
        assert_eq!(m.rng_draws(), 0);
    }

    #[test]
    fn rejects_k_above_max_slots() {
        assert!(MintTracker::new(74, 73, 0).is_err());
        assert!(MintTracker::new(0, 73, 0).is_err());
    }
}
