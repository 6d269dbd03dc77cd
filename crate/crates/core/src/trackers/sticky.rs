use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Geometric};

use super::{BoundSpec, Tracker, TrackerError, TrackerRng};
use crate::stream::RowAddress;

/// `t = ceil((1/eps) * ln(1/(2 eps delta)))`; the first window is `2t`.
pub fn sticky_period(epsilon: f64, delta: f64) -> u64 {
    ((1.0 / epsilon) * (1.0 / (2.0 * epsilon * delta)).ln()).ceil().max(1.0) as u64
}

/// Sticky Sampling. Misses are admitted with probability `P_sample`; at each
/// window boundary every count drops by a geometric(1/2) number of tails,
/// the window doubles and `P_sample` halves. The table afterwards is
/// distributed as if sampling had run at the new rate from the start.
#[derive(Debug, Clone)]
pub struct StickySampling {
    epsilon: f64,
    delta: f64,
    window_width: u64,
    p_sample: f64,
    processed: u64,
    entries: BTreeMap<RowAddress, u64>,
    rng: TrackerRng,
}

impl StickySampling {
    pub fn new(epsilon: f64, delta: f64, seed: u64) -> Result<Self, TrackerError> {
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(TrackerError::ParameterRange {
                name: "epsilon",
                value: epsilon.to_string(),
                range: "(0, 0.5)",
            });
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(TrackerError::ParameterRange {
                name: "delta",
                value: delta.to_string(),
                range: "(0, 1)",
            });
        }
        Ok(Self::with_window(
            epsilon,
            delta,
            2 * sticky_period(epsilon, delta),
            seed,
        ))
    }

    /// Explicit first-window width, bypassing the `(eps, delta)` sizing.
    pub fn with_window(epsilon: f64, delta: f64, window_width: u64, seed: u64) -> Self {
        Self {
            epsilon,
            delta,
            window_width: window_width.max(1),
            p_sample: 1.0,
            processed: 0,
            entries: BTreeMap::new(),
            rng: TrackerRng::new(seed),
        }
    }

    pub fn window_width(&self) -> u64 {
        self.window_width
    }

    pub fn p_sample(&self) -> f64 {
        self.p_sample
    }

    pub fn entries(&self) -> &BTreeMap<RowAddress, u64> {
        &self.entries
    }

    /// Hit increments; a miss is admitted at count 1 with `P_sample`.
    pub fn update(&mut self, row: RowAddress) {
        if let Some(c) = self.entries.get_mut(&row) {
            *c += 1;
        } else if self.p_sample >= 1.0 || self.rng.random::<f64>() < self.p_sample {
            self.entries.insert(row, 1);
        }
    }

    /// Decrements every count by an independent geometric(1/2) tail count
    /// and drops entries reaching zero.
    pub fn compress(&mut self) {
        let tails = Geometric::new(0.5).expect("valid probability");
        let rng = &mut self.rng;
        self.entries.retain(|_, c| {
            let t = tails.sample(rng);
            *c = c.saturating_sub(t);
            *c > 0
        });
    }

    /// Processes one item, compressing at the window boundary.
    pub fn process(&mut self, row: RowAddress) {
        self.processed += 1;
        self.update(row);
        if self.processed == self.window_width {
            self.compress();
            self.window_width *= 2;
            self.p_sample /= 2.0;
        }
    }
}

impl Tracker for StickySampling {
    fn name(&self) -> &'static str {
        "sticky_sampling"
    }

    fn on_activation(&mut self, row: RowAddress) {
        self.process(row);
    }

    /// f_est never exceeds f_real, so mitigated rows are dropped outright.
    fn on_ref(&mut self, slot_budget: usize) -> Vec<RowAddress> {
        let mut top: Vec<(RowAddress, u64)> = self.entries.iter().map(|(&r, &c)| (r, c)).collect();
        top.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        top.truncate(slot_budget);
        for (row, _) in &top {
            self.entries.remove(row);
        }
        top.into_iter().map(|(r, _)| r).collect()
    }

    fn estimate(&self, row: RowAddress) -> Option<u64> {
        self.entries.get(&row).copied()
    }

    fn reset(&mut self) {
        let first = 2 * sticky_period(self.epsilon, self.delta);
        self.entries.clear();
        self.processed = 0;
        self.window_width = first;
        self.p_sample = 1.0;
    }

    /// Upper side deterministic; lower side holds with `1 - delta`.
    fn bound(&self, stream_len: u64) -> Option<BoundSpec> {
        Some(BoundSpec {
            lower_margin: (self.epsilon * stream_len as f64).floor() as u64,
            upper_margin: 0,
            lower_conf: 1.0 - self.delta,
            upper_conf: 1.0,
        })
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
