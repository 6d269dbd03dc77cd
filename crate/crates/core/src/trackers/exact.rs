use std::collections::VecDeque;

use super::{BoundSpec, Tracker, TrackerError};
use crate::stream::RowAddress;

/// One counter per row (PRAC). A row reaching `threshold` is queued for the
/// next REF; mitigation zeroes its counter.
#[derive(Debug, Clone)]
pub struct ExactCounter {
    counts: Vec<u64>,
    threshold: u64,
    queued: Vec<bool>,
    pending: VecDeque<RowAddress>,
}

impl ExactCounter {
    pub fn new(rows_per_bank: usize, threshold: u64) -> Result<Self, TrackerError> {
        if rows_per_bank == 0 {
            return Err(TrackerError::ZeroCapacity);
        }
        if threshold == 0 {
            return Err(TrackerError::ParameterRange {
                name: "threshold",
                value: "0".into(),
                range: ">= 1",
            });
        }
        Ok(Self {
            counts: vec![0; rows_per_bank],
            threshold,
            queued: vec![false; rows_per_bank],
            pending: VecDeque::new(),
        })
    }

    pub fn threshold(&self) -> u64 {
        self.threshold
    }

    pub fn count(&self, row: RowAddress) -> u64 {
        self.counts[row.index()]
    }

    /// Rows at or above `threshold`, ascending.
    pub fn check(&self, threshold: u64) -> Vec<RowAddress> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c >= threshold)
            .map(|(i, _)| RowAddress(i as u32))
            .collect()
    }
}

impl Tracker for ExactCounter {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn on_activation(&mut self, row: RowAddress) {
        let i = row.index();
        self.counts[i] += 1;
        if self.counts[i] >= self.threshold && !self.queued[i] {
            self.queued[i] = true;
            self.pending.push_back(row);
        }
    }

    fn on_ref(&mut self, slot_budget: usize) -> Vec<RowAddress> {
        let n = slot_budget.min(self.pending.len());
        let rows: Vec<RowAddress> = self.pending.drain(..n).collect();
        for row in &rows {
            self.counts[row.index()] = 0;
            self.queued[row.index()] = false;
        }
        rows
    }

    fn estimate(&self, row: RowAddress) -> Option<u64> {
        self.counts.get(row.index()).copied()
    }

    fn reset(&mut self) {
        self.counts.fill(0);
        self.queued.fill(false);
        self.pending.clear();
    }

    fn bound(&self, _stream_len: u64) -> Option<BoundSpec> {
        Some(BoundSpec::deterministic(0, 0))
    }

    fn clone_box(&self) -> Box<dyn Tracker> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_resets() {
        let mut e = ExactCounter::new(16, 5).unwrap();
        for _ in 0..7 {
            e.on_activation(RowAddress(3));
        }
        assert_eq!(e.count(RowAddress(3)), 7);
        assert_eq!(e.check(5), vec![RowAddress(3)]);
        assert_eq!(e.on_ref(1), vec![RowAddress(3)]);
        assert_eq!(e.count(RowAddress(3)), 0);
        assert!(e.on_ref(1).is_empty());
    }
}
