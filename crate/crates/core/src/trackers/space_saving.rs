use std::collections::VecDeque;

use super::table::{apply_policy, space_saving_update, CounterTable, MitigationPolicy};
use super::{BoundSpec, Tracker, TrackerError};
use crate::stream::RowAddress;

/// Fires when a count lands on a positive multiple of `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrapheneTrigger {
    pub threshold: u64,
}

impl GrapheneTrigger {
    pub fn fires(&self, count: u64) -> bool {
        count > 0 && count % self.threshold.max(1) == 0
    }
}

/// Space-Saving (equivalently Misra-Gries) counter table with a
/// post-mitigation policy.
#[derive(Debug, Clone)]
pub struct SpaceSavingTracker {
    table: CounterTable,
    policy: MitigationPolicy,
    pending: VecDeque<RowAddress>,
}

impl SpaceSavingTracker {
    /// Rejects policies that would break `f_real <= f_est`: resetting or
    /// freeing an entry forgets counts that belong to rows off the table.
    pub fn new(capacity: usize, policy: MitigationPolicy) -> Result<Self, TrackerError> {
        let reason = match policy {
            MitigationPolicy::ResetZero | MitigationPolicy::ResetToOne => {
                Some("upper bound is f_real + eps*N, so counts may only drop to Min")
            }
            MitigationPolicy::Invalidate => Some("freeing an entry drops Min below absent rows"),
            _ => None,
        };
        if let Some(reason) = reason {
            return Err(TrackerError::UnsoundPolicy {
                policy: policy.label(),
                tracker: "space_saving",
                reason,
            });
        }
        Ok(Self {
            table: CounterTable::new(capacity)?,
            policy,
            pending: VecDeque::new(),
        })
    }

    pub fn table(&self) -> &CounterTable {
        &self.table
    }

    pub fn policy(&self) -> MitigationPolicy {
        self.policy
    }

    pub fn min_count(&self) -> u64 {
        self.table.min_count()
    }

    /// Misra-Gries reading of the same table: `f_est - Min`, which never
    /// exceeds f_real.
    pub fn misra_gries_estimate(&self, row: RowAddress) -> u64 {
        self.table
            .count(row)
            .map_or(0, |c| c - self.table.min_count())
    }

    /// Space-Saving reading for any row: absent rows are bounded by Min.
    pub fn estimate_or_min(&self, row: RowAddress) -> u64 {
        self.table.count(row).unwrap_or_else(|| self.table.min_count())
    }
}

impl Tracker for SpaceSavingTracker {
    fn name(&self) -> &'static str {
        "space_saving"
    }

    fn on_activation(&mut self, row: RowAddress) {
        let outcome = space_saving_update(&mut self.table, row);
        if let MitigationPolicy::GrapheneMultiple(threshold) = self.policy {
            if (GrapheneTrigger { threshold }).fires(outcome.count()) && !self.pending.contains(&row)
            {
                self.pending.push_back(row);
            }
        }
    }

    fn on_ref(&mut self, slot_budget: usize) -> Vec<RowAddress> {
        if let MitigationPolicy::GrapheneMultiple(_) = self.policy {
            let n = slot_budget.min(self.pending.len());
            return self.pending.drain(..n).collect();
        }
        let picks = self.table.top_indices(slot_budget);
        picks
            .into_iter()
            .map(|index| {
                let row = self.table.entries()[index].row;
                apply_policy(&mut self.table, index, self.policy);
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

    fn bound(&self, stream_len: u64) -> Option<BoundSpec> {
        Some(BoundSpec::deterministic(
            0,
            stream_len / self.table.capacity() as u64,
        ))
    }

    fn clone_box(&self) -> Box<dyn Tracker> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graphene_triggers_on_each_multiple_only() {
        let mut t = SpaceSavingTracker::new(4, MitigationPolicy::GrapheneMultiple(500)).unwrap();
        let row = RowAddress(3);
        let mut fired_at = Vec::new();
        for n in 1..=1_000u64 {
            t.on_activation(row);
            let out = t.on_ref(1);
            if !out.is_empty() {
                fired_at.push(n);
            }
        }
        assert_eq!(fired_at, vec![500, 1_000]);
        assert_eq!(t.estimate(row), Some(1_000));
    }

    #[test]
    fn decrement_to_min_at_ref() {
        let mut t = SpaceSavingTracker::new(2, MitigationPolicy::DecrementToMin).unwrap();
        for _ in 0..9 {
            t.on_activation(RowAddress(1));
        }
        for _ in 0..2 {
            t.on_activation(RowAddress(2));
        }
        assert_eq!(t.on_ref(1), vec![RowAddress(1)]);
        assert_eq!(t.estimate(RowAddress(1)), Some(2));
        assert_eq!(t.misra_gries_estimate(RowAddress(1)), 0);
    }

    #[test]
    fn on_ref_respects_budget() {
        let mut t = SpaceSavingTracker::new(8, MitigationPolicy::Keep).unwrap();
        for i in 0..8 {
            t.on_activation(RowAddress(i));
        }
        assert_eq!(t.on_ref(3).len(), 3);
        assert!(t.on_ref(0).is_empty());
    }

    #[test]
    fn rejects_unsound_policies() {
        for p in [
            MitigationPolicy::ResetZero,
            MitigationPolicy::ResetToOne,
            MitigationPolicy::Invalidate,
        ] {
            assert!(matches!(
                SpaceSavingTracker::new(4, p),
                Err(TrackerError::UnsoundPolicy { .. })
            ));
        }
    }
}
