use std::collections::BTreeMap;

use super::{BoundSpec, Tracker, TrackerError};
use crate::stream::RowAddress;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LossyEntry {
    count: u64,
    /// Maximum undercount when the entry was created.
    delta: u64,
}

/// Lossy Counting with buckets of width `ceil(1/eps)`. Entries carry a
/// max-error annotation and are pruned at every bucket boundary, which
/// gives `f_real - eps*N <= f_est <= f_real`.
#[derive(Debug, Clone)]
pub struct LossyCounting {
    epsilon: f64,
    bucket_width: u64,
    seen: u64,
    entries: BTreeMap<RowAddress, LossyEntry>,
}

impl LossyCounting {
    pub fn new(epsilon: f64) -> Result<Self, TrackerError> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(TrackerError::ParameterRange {
                name: "epsilon",
                value: epsilon.to_string(),
                range: "(0, 1]",
            });
        }
        Ok(Self {
            epsilon,
            bucket_width: (1.0 / epsilon).ceil() as u64,
            seen: 0,
            entries: BTreeMap::new(),
        })
    }

    pub fn bucket_width(&self) -> u64 {
        self.bucket_width
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn current_bucket(&self) -> u64 {
        self.seen.div_ceil(self.bucket_width)
    }

    pub fn update(&mut self, row: RowAddress) {
        self.seen += 1;
        let bucket = self.current_bucket();
        self.entries
            .entry(row)
            .and_modify(|e| e.count += 1)
            .or_insert(LossyEntry {
                count: 1,
                delta: bucket - 1,
            });
        if self.seen % self.bucket_width == 0 {
            self.entries.retain(|_, e| e.count + e.delta > bucket);
        }
    }
}

impl Tracker for LossyCounting {
    fn name(&self) -> &'static str {
        "lossy_counting"
    }

    fn on_activation(&mut self, row: RowAddress) {
        self.update(row);
    }

    /// Mitigates the largest counts; f_est never exceeds f_real, so they
    /// reset to zero.
    fn on_ref(&mut self, slot_budget: usize) -> Vec<RowAddress> {
        let mut top: Vec<(RowAddress, u64)> = self
            .entries
            .iter()
            .filter(|(_, e)| e.count > 0)
            .map(|(&r, e)| (r, e.count))
            .collect();
        top.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        top.truncate(slot_budget);
        for (row, _) in &top {
            if let Some(e) = self.entries.get_mut(row) {
                *e = LossyEntry { count: 0, delta: 0 };
            }
        }
        top.into_iter().map(|(r, _)| r).collect()
    }

    fn estimate(&self, row: RowAddress) -> Option<u64> {
        self.entries.get(&row).map(|e| e.count)
    }

    fn reset(&mut self) {
        self.entries.clear();
        self.seen = 0;
    }

    fn bound(&self, stream_len: u64) -> Option<BoundSpec> {
        Some(BoundSpec::deterministic(
            (self.epsilon * stream_len as f64).floor() as u64,
            0,
        ))
    }

    fn clone_box(&self) -> Box<dyn Tracker> {
        Box::new(self.clone())
    }
}
