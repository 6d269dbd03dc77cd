use rand::Rng;

use super::{Tracker, TrackerError, TrackerRng};
use crate::stream::RowAddress;

/// Refreshes an activated row's neighbours immediately with probability p.
#[derive(Debug, Clone)]
pub struct ParaTracker {
    p: f64,
    fired: Option<RowAddress>,
    rng: TrackerRng,
}

impl ParaTracker {
    pub fn new(p: f64, seed: u64) -> Result<Self, TrackerError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(TrackerError::ParameterRange {
                name: "p",
                value: p.to_string(),
                range: "[0, 1]",
            });
        }
        Ok(Self {
            p,
            fired: None,
            rng: TrackerRng::new(seed),
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

impl Tracker for ParaTracker {
    fn name(&self) -> &'static str {
        "para"
    }

    fn on_activation(&mut self, row: RowAddress) {
        let fire = match self.p {
            p if p >= 1.0 => true,
            p if p <= 0.0 => false,
            p => self.rng.random_bool(p),
        };
        self.fired = fire.then_some(row);
    }

    fn take_immediate(&mut self) -> Option<RowAddress> {
        self.fired.take()
    }

    fn on_ref(&mut self, _slot_budget: usize) -> Vec<RowAddress> {
        Vec::new()
    }

    fn estimate(&self, _row: RowAddress) -> Option<u64> {
        None
    }

    fn reset(&mut self) {
        self.fired = None;
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

    #[test]
    fn extremes() {
        let mut always = ParaTracker::new(1.0, 0).unwrap();
        let mut never = ParaTracker::new(0.0, 0).unwrap();
        for i in 0..10 {
            always.on_activation(RowAddress(i));
            never.on_activation(RowAddress(i));
            assert_eq!(always.take_immediate(), Some(RowAddress(i)));
            assert_eq!(never.take_immediate(), None);
        }
    }

    #[test]
    fn rejects_bad_probability() {
        assert!(ParaTracker::new(1.5, 0).is_err());
    }
}
