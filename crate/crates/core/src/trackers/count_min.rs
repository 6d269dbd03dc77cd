use std::collections::VecDeque;

use super::{BoundSpec, Tracker, TrackerError};
use crate::rng::{derive_seed, mix64};
use crate::stream::RowAddress;

/// CountMin sketch: `depth` rows of `width` counters, one seeded hash per
/// row. The estimate is the minimum of the mapped counters, so it never
/// undercounts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMinSketch {
    width: usize,
    depth: usize,
    counters: Vec<u64>,
    seeds: Vec<u64>,
    total: u64,
}

impl CountMinSketch {
    pub fn new(width: usize, depth: usize, seed: u64) -> Result<Self, TrackerError> {
        if width == 0 || depth == 0 {
            return Err(TrackerError::ZeroCapacity);
        }
        Ok(Self {
            width,
            depth,
            counters: vec![0; width * depth],
            seeds: (0..depth as u64).map(|i| derive_seed(seed, &[i])).collect(),
            total: 0,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Column of `row` in hash row `level`.
    #[inline]
    pub fn column(&self, level: usize, row: RowAddress) -> usize {
        let h = mix64(mix64(row.0 as u64) ^ self.seeds[level]);
        ((h as u128 * self.width as u128) >> 64) as usize
    }

    pub fn update(&mut self, row: RowAddress) {
        for level in 0..self.depth {
            let c = self.column(level, row);
            self.counters[level * self.width + c] += 1;
        }
        self.total += 1;
    }

    pub fn estimate(&self, row: RowAddress) -> u64 {
        (0..self.depth)
            .map(|level| self.counters[level * self.width + self.column(level, row)])
            .min()
            .unwrap_or(0)
    }

    /// Per-level counter values for `row`.
    pub fn mapped_counters(&self, row: RowAddress) -> Vec<u64> {
        (0..self.depth)
            .map(|level| self.counters[level * self.width + self.column(level, row)])
            .collect()
    }

    pub fn clear(&mut self) {
        self.counters.fill(0);
        self.total = 0;
    }
}

/// CountMin sketch driving refresh: a row whose estimate reaches
/// `threshold` is queued for the next REF. Counters are never decremented
/// since the upper bound is only probabilistic.
#[derive(Debug, Clone)]
pub struct CountMinTracker {
    sketch: CountMinSketch,
    threshold: u64,
    pending: VecDeque<RowAddress>,
}

impl CountMinTracker {
    pub fn new(sketch: CountMinSketch, threshold: u64) -> Self {
        Self {
            sketch,
            threshold,
            pending: VecDeque::new(),
        }
    }

    pub fn sketch(&self) -> &CountMinSketch {
        &self.sketch
    }
}

impl Tracker for CountMinTracker {
    fn name(&self) -> &'static str {
        "count_min"
    }

    fn on_activation(&mut self, row: RowAddress) {
        self.sketch.update(row);
        if self.sketch.estimate(row) >= self.threshold && !self.pending.contains(&row) {
            self.pending.push_back(row);
        }
    }

    fn on_ref(&mut self, slot_budget: usize) -> Vec<RowAddress> {
        let n = slot_budget.min(self.pending.len());
        self.pending.drain(..n).collect()
    }

    fn estimate(&self, row: RowAddress) -> Option<u64> {
        Some(self.sketch.estimate(row))
    }

    fn reset(&mut self) {
        self.sketch.clear();
        self.pending.clear();
    }

    /// `f_real <= f_est` always; `f_est <= f_real + (2/width) N` with
    /// confidence `1 - 2^-depth`.
    fn bound(&self, stream_len: u64) -> Option<BoundSpec> {
        Some(BoundSpec {
            lower_margin: 0,
            upper_margin: 2 * stream_len / self.sketch.width as u64,
            lower_conf: 1.0,
            upper_conf: 1.0 - 0.5f64.powi(self.sketch.depth as i32),
        })
    }

    fn clone_box(&self) -> Box<dyn Tracker> {
        Box::new(self.clone())
    }
}
