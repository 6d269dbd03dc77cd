use std::collections::VecDeque;

use rand::Rng;

use super::space_saving::GrapheneTrigger;
use super::table::{apply_policy, swap_in, CounterTable, MitigationPolicy, UpdateOutcome};
use super::{BoundSpec, Tracker, TrackerError, TrackerRng};
use crate::stream::RowAddress;

/// Space-Saving step with optional stochastic eviction: on a miss the new
/// row takes the Min slot only with probability `1 / (Min + 1)`. Returns
/// `None` when the miss is dropped. No random draw is made when Min is 0.
pub fn dsac_update<R: Rng + ?Sized>(
    table: &mut CounterTable,
    row: RowAddress,
    stochastic: bool,
    rng: &mut R,
) -> Option<UpdateOutcome> {
    if let Some(index) = table.find(row) {
        let count = table.increment(index);
        return Some(UpdateOutcome::Hit { index, count });
    }
    if stochastic {
        let min = table.min_count();
        if min > 0 && rng.random_range(0..=min) != 0 {
            return None;
        }
    }
    Some(swap_in(table, row))
}

/// Space-Saving with the two DSAC modifications, each switchable:
/// invalidation of the mitigated entry at REF, and stochastic eviction.
/// With both off it replays Space-Saving exactly.
#[derive(Debug, Clone)]
pub struct DsacTracker {
    table: CounterTable,
    invalidate: bool,
    stochastic: bool,
    reset_to_one: bool,
    fallback: MitigationPolicy,
    pending: VecDeque<RowAddress>,
    rng: TrackerRng,
}

impl DsacTracker {
    /// `fallback` is the post-mitigation policy used when invalidation is
    /// off. `reset_to_one` replaces invalidation with a count of one.
    pub fn new(
        capacity: usize,
        invalidate: bool,
        stochastic: bool,
        fallback: MitigationPolicy,
        seed: u64,
    ) -> Result<Self, TrackerError> {
        Ok(Self {
            table: CounterTable::new(capacity)?,
            invalidate,
            stochastic,
            reset_to_one: false,
            fallback,
            pending: VecDeque::new(),
            rng: TrackerRng::new(seed),
        })
    }

    pub fn with_reset_to_one(mut self, on: bool) -> Self {
        self.reset_to_one = on;
        self
    }

    pub fn table(&self) -> &CounterTable {
        &self.table
    }

    fn mitigation_policy(&self) -> MitigationPolicy {
        match (self.invalidate, self.reset_to_one) {
            (true, false) => MitigationPolicy::Invalidate,
            (true, true) => MitigationPolicy::ResetToOne,
            (false, _) => self.fallback,
        }
    }
}

impl Tracker for DsacTracker {
    fn name(&self) -> &'static str {
        "dsac"
    }

    fn on_activation(&mut self, row: RowAddress) {
        let outcome = dsac_update(&mut self.table, row, self.stochastic, &mut self.rng);
        if let (Some(outcome), MitigationPolicy::GrapheneMultiple(threshold)) =
            (outcome, self.mitigation_policy())
        {
            if (GrapheneTrigger { threshold }).fires(outcome.count()) && !self.pending.contains(&row)
            {
                self.pending.push_back(row);
            }
        }
    }

    fn on_ref(&mut self, slot_budget: usize) -> Vec<RowAddress> {
        let policy = self.mitigation_policy();
        if let MitigationPolicy::GrapheneMultiple(_) = policy {
            let n = slot_budget.min(self.pending.len());
            return self.pending.drain(..n).collect();
        }
        let picks = self.table.top_indices(slot_budget);
        picks
            .into_iter()
            .map(|index| {
                let row = self.table.entries()[index].row;
                apply_policy(&mut self.table, index, policy);
                row
            })
            .collect()
    }

    fn estimate(&self, row: RowAddress) -> Option<u64> {
        self.table.count(row)
    }

    fn reset(&mut self) {
        self.table.clear();
        self.pending.clear();
    }

    /// Only the unmodified algorithm keeps the Space-Saving bound.
    fn bound(&self, stream_len: u64) -> Option<BoundSpec> {
        (!self.invalidate && !self.stochastic).then(|| {
            BoundSpec::deterministic(0, stream_len / self.table.capacity() as u64)
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
