//! Trackers and samplers behind one behavioural contract.
//!
//! A tracker sees each activation once, in order. At every REF the
//! simulator asks it for at most `slot_budget` rows to mitigate.

mod config;
mod count_min;
mod dsac;
mod exact;
mod lossy;
mod mint;
mod para;
mod pride;
mod reservoir;
mod space_saving;
mod sticky;
mod table;

use rand::RngCore;
use thiserror::Error;

use crate::rng::{rng_from_seed, SimRng};
use crate::stream::RowAddress;

pub use config::{BuildContext, TrackerKind, TrackerSpec};
pub use count_min::{CountMinSketch, CountMinTracker};
pub use dsac::{dsac_update, DsacTracker};
pub use exact::ExactCounter;
pub use lossy::LossyCounting;
pub use mint::{mint_select, MintTracker};
pub use para::ParaTracker;
pub use pride::PrideTracker;
pub use reservoir::{Reservoir, ReservoirMode, ReservoirTracker};
pub use space_saving::{GrapheneTrigger, SpaceSavingTracker};
pub use sticky::{sticky_period, StickySampling};
pub use table::{
    apply_policy, space_saving_mitigate, space_saving_update, CounterEntry, CounterTable,
    MitigationPolicy, UpdateOutcome,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrackerError {
    #[error("counter table has no valid entry")]
    EmptyTable,
    #[error("capacity must be at least 1")]
    ZeroCapacity,
    #[error("{name} = {value} outside {range}")]
    ParameterRange {
        name: &'static str,
        value: String,
        range: &'static str,
    },
    #[error("policy {policy} is unsound for {tracker}: {reason}")]
    UnsoundPolicy {
        policy: &'static str,
        tracker: &'static str,
        reason: &'static str,
    },
    #[error("{tracker} has no deterministic lower bound on f_est; cannot drive throttling")]
    NoDeterministicLowerBound { tracker: &'static str },
}

/// Error bound of a frequency estimator over a stream of length N:
/// `f_real - lower_margin <= f_est` holds with probability `lower_conf`, and
/// `f_est <= f_real + upper_margin` with probability `upper_conf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundSpec {
    pub lower_margin: u64,
    pub upper_margin: u64,
    pub lower_conf: f64,
    pub upper_conf: f64,
}

impl BoundSpec {
    pub fn deterministic(lower_margin: u64, upper_margin: u64) -> Self {
        Self {
            lower_margin,
            upper_margin,
            lower_conf: 1.0,
            upper_conf: 1.0,
        }
    }

    pub fn has_deterministic_lower(&self) -> bool {
        self.lower_conf >= 1.0
    }
}

pub trait Tracker: Send + Sync {
    fn name(&self) -> &'static str;

    fn on_activation(&mut self, row: RowAddress);

    /// Mitigation issued right after the last activation, outside the REF
    /// schedule. Only tracker-less samplers such as PARA use it.
    fn take_immediate(&mut self) -> Option<RowAddress> {
        None
    }

    /// Rows to mitigate at this REF; never longer than `slot_budget`.
    fn on_ref(&mut self, slot_budget: usize) -> Vec<RowAddress>;

    fn estimate(&self, row: RowAddress) -> Option<u64>;

    fn reset(&mut self);

    /// Estimation bound over a stream of length `stream_len`, if the tracker
    /// is a frequency estimator at all.
    fn bound(&self, _stream_len: u64) -> Option<BoundSpec> {
        None
    }

    /// Random draws consumed so far.
    fn rng_draws(&self) -> u64 {
        0
    }

    /// Replaces the random generator. Only equivalent to seeding at
    /// construction if no draw has been made yet.
    fn reseed(&mut self, _seed: u64) {}

    fn clone_box(&self) -> Box<dyn Tracker>;
}

impl Clone for Box<dyn Tracker> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

/// Never mitigates; the baseline for oracle checks.
#[derive(Debug, Clone, Default)]
pub struct NullTracker;

impl Tracker for NullTracker {
    fn name(&self) -> &'static str {
        "null"
    }

    fn on_activation(&mut self, _row: RowAddress) {}

    fn on_ref(&mut self, _slot_budget: usize) -> Vec<RowAddress> {
        Vec::new()
    }

    fn estimate(&self, _row: RowAddress) -> Option<u64> {
        None
    }

    fn reset(&mut self) {}

    fn clone_box(&self) -> Box<dyn Tracker> {
        Box::new(self.clone())
    }
}

/// ChaCha8 wrapper that counts draws.
#[derive(Debug, Clone)]
pub struct TrackerRng {
    inner: SimRng,
    draws: u64,
}

impl TrackerRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: rng_from_seed(seed),
            draws: 0,
        }
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }
}

impl RngCore for TrackerRng {
    fn next_u32(&mut self) -> u32 {
        self.draws += 1;
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.draws += 1;
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.draws += 1;
        self.inner.fill_bytes(dst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThrottleDecision {
    Block,
    Allow,
}

/// Throttling decision for `row`: block once its estimate reaches `limit`.
/// Throttling leaves f_real untouched, so the tracker state is not modified;
/// only trackers whose f_est lower bound is deterministic qualify.
pub fn throttle_account(
    tracker: &dyn Tracker,
    row: RowAddress,
    limit: u64,
    stream_len: u64,
) -> Result<ThrottleDecision, TrackerError> {
    let bound = tracker.bound(stream_len);
    if !bound.is_some_and(|b| b.has_deterministic_lower()) {
        return Err(TrackerError::NoDeterministicLowerBound {
            tracker: tracker.name(),
        });
    }
    let estimate = tracker.estimate(row).unwrap_or(0);
    Ok(if estimate >= limit {
        ThrottleDecision::Block
    } else {
        ThrottleDecision::Allow
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn throttle_blocks_at_limit_without_touching_state() {
        let mut cms = CountMinTracker::new(CountMinSketch::new(64, 3, 1).unwrap(), u64::MAX);
        for _ in 0..10 {
            cms.on_activation(RowAddress(5));
        }
        let before = cms.estimate(RowAddress(5));
        assert_eq!(
            throttle_account(&cms, RowAddress(5), 10, 10),
            Ok(ThrottleDecision::Block)
        );
        assert_eq!(
            throttle_account(&cms, RowAddress(5), 11, 10),
            Ok(ThrottleDecision::Allow)
        );
        assert_eq!(cms.estimate(RowAddress(5)), before);
    }

    #[test]
    fn throttle_accepts_space_saving_and_rejects_samplers() {
        let mut ss = SpaceSavingTracker::new(4, MitigationPolicy::DecrementToMin).unwrap();
        ss.on_activation(RowAddress(1));
        assert_eq!(
            throttle_account(&ss, RowAddress(1), 1, 1),
            Ok(ThrottleDecision::Block)
        );
        let sticky = StickySampling::new(0.01, 0.1, 1).unwrap();
        assert!(matches!(
            throttle_account(&sticky, RowAddress(1), 1, 1),
            Err(TrackerError::NoDeterministicLowerBound { .. })
        ));
        let mint = MintTracker::new(1, 73, 1).unwrap();
        assert!(throttle_account(&mint, RowAddress(1), 1, 1).is_err());
    }

    #[test]
    fn counting_rng_counts() {
        let mut rng = TrackerRng::new(3);
        rng.next_u64();
        rng.next_u32();
        assert_eq!(rng.draws(), 2);
    }
}
