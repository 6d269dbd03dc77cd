//! Fixed-capacity counter table shared by Space-Saving and its variants.
//!
//! Free slots behave like zero-count entries: while one exists, Min is 0 and
//! a miss lands in the lowest free slot. Ties on Min and Max go to the lowest
//! entry index so replays are deterministic.

use super::TrackerError;
use crate::stream::RowAddress;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CounterEntry {
    pub row: RowAddress,
    pub count: u64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterTable {
    entries: Vec<CounterEntry>,
}

impl CounterTable {
    pub fn new(capacity: usize) -> Result<Self, TrackerError> {
        if capacity == 0 {
            return Err(TrackerError::ZeroCapacity);
        }
        Ok(Self {
            entries: vec![CounterEntry::default(); capacity],
        })
    }

    pub fn capacity(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[CounterEntry] {
        &self.entries
    }

    pub fn valid_len(&self) -> usize {
        self.entries.iter().filter(|e| e.valid).count()
    }

    pub fn find(&self, row: RowAddress) -> Option<usize> {
        self.entries.iter().position(|e| e.valid && e.row == row)
    }

    pub fn count(&self, row: RowAddress) -> Option<u64> {
        self.find(row).map(|i| self.entries[i].count)
    }

    /// Slot a miss would overwrite: the lowest free slot, else the
    /// lowest-index entry holding Min.
    pub fn victim_index(&self) -> usize {
        let mut best = 0;
        let mut best_count = u64::MAX;
        for (i, e) in self.entries.iter().enumerate() {
            if !e.valid {
                return i;
            }
            if e.count < best_count {
                best = i;
                best_count = e.count;
            }
        }
        best
    }

    /// Min over all slots, free slots counting as zero.
    pub fn min_count(&self) -> u64 {
        self.entries
            .iter()
            .map(|e| if e.valid { e.count } else { 0 })
            .min()
            .unwrap_or(0)
    }

    /// Second smallest count over all slots (free slots count as zero).
    pub fn second_min_count(&self) -> u64 {
        let mut lo = u64::MAX;
        let mut second = u64::MAX;
        for e in &self.entries {
            let c = if e.valid { e.count } else { 0 };
            if c < lo {
                second = lo;
                lo = c;
            } else if c < second {
                second = c;
            }
        }
        if second == u64::MAX {
            lo
        } else {
            second
        }
    }

    /// Lowest-index valid entry holding the maximum count.
    pub fn max_index(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, e) in self.entries.iter().enumerate() {
            if e.valid && best.is_none_or(|b| e.count > self.entries[b].count) {
                best = Some(i);
            }
        }
        best
    }

    /// Up to `n` distinct valid entries with nonzero counts, by descending
    /// count then ascending index.
    pub fn top_indices(&self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.entries.len())
            .filter(|&i| self.entries[i].valid && self.entries[i].count > 0)
            .collect();
        idx.sort_by(|&a, &b| self.entries[b].count.cmp(&self.entries[a].count).then(a.cmp(&b)));
        idx.truncate(n);
        idx
    }

    pub fn increment(&mut self, index: usize) -> u64 {
        self.entries[index].count += 1;
        self.entries[index].count
    }

    /// Overwrites slot `index` with `row` at `count`.
    pub fn replace(&mut self, index: usize, row: RowAddress, count: u64) -> Option<RowAddress> {
        let old = self.entries[index];
        self.entries[index] = CounterEntry {
            row,
            count,
            valid: true,
        };
        old.valid.then_some(old.row)
    }

    pub fn invalidate(&mut self, index: usize) {
        self.entries[index] = CounterEntry::default();
    }

    pub fn set_count(&mut self, index: usize, count: u64) {
        self.entries[index].count = count;
    }

    pub fn clear(&mut self) {
        self.entries.fill(CounterEntry::default());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOutcome {
    Hit { index: usize, count: u64 },
    Inserted { index: usize, count: u64 },
    Swapped {
        index: usize,
        count: u64,
        evicted: RowAddress,
    },
}

impl UpdateOutcome {
    pub fn count(&self) -> u64 {
        match *self {
            Self::Hit { count, .. } | Self::Inserted { count, .. } | Self::Swapped { count, .. } => {
                count
            }
        }
    }
}

/// One Space-Saving step: a hit increments, a miss takes the victim slot at
/// `Min + 1`.
pub fn space_saving_update(table: &mut CounterTable, row: RowAddress) -> UpdateOutcome {
    if let Some(index) = table.find(row) {
        let count = table.increment(index);
        return UpdateOutcome::Hit { index, count };
    }
    swap_in(table, row)
}

pub(super) fn swap_in(table: &mut CounterTable, row: RowAddress) -> UpdateOutcome {
    let index = table.victim_index();
    let count = table.min_count() + 1;
    match table.replace(index, row, count) {
        Some(evicted) => UpdateOutcome::Swapped {
            index,
            count,
            evicted,
        },
        None => UpdateOutcome::Inserted { index, count },
    }
}

/// Post-mitigation counter update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MitigationPolicy {
    /// Count to zero. Sound only when f_est never exceeds f_real.
    ResetZero,
    /// Count to the current Min, the lowest value the upper bound allows.
    DecrementToMin,
    /// Count untouched.
    Keep,
    /// Mitigate only when the count reaches a multiple of the threshold;
    /// count untouched.
    GrapheneMultiple(u64),
    /// Entry freed.
    Invalidate,
    /// Count to one.
    ResetToOne,
}

impl MitigationPolicy {
    pub fn label(&self) -> &'static str {
        match self {
            Self::ResetZero => "reset_zero",
            Self::DecrementToMin => "decrement_to_min",
            Self::Keep => "keep",
            Self::GrapheneMultiple(_) => "graphene_multiple",
            Self::Invalidate => "invalidate",
            Self::ResetToOne => "reset_to_one",
        }
    }
}

/// Applies `policy` to slot `index`.
pub fn apply_policy(table: &mut CounterTable, index: usize, policy: MitigationPolicy) {
    match policy {
        MitigationPolicy::ResetZero => table.set_count(index, 0),
        MitigationPolicy::DecrementToMin => {
            let min = table.min_count();
            table.set_count(index, min);
        }
        MitigationPolicy::Keep | MitigationPolicy::GrapheneMultiple(_) => {}
        MitigationPolicy::Invalidate => table.invalidate(index),
        MitigationPolicy::ResetToOne => table.set_count(index, 1),
    }
}

/// Selects the max-count entry and applies `policy` to it. Under
/// `GrapheneMultiple` the entry is only returned when its count sits on a
/// multiple of the threshold.
pub fn space_saving_mitigate(
    table: &mut CounterTable,
    policy: MitigationPolicy,
) -> Result<Option<RowAddress>, TrackerError> {
    let index = table.max_index().ok_or(TrackerError::EmptyTable)?;
    let entry = table.entries()[index];
    if let MitigationPolicy::GrapheneMultiple(threshold) = policy {
        let hit = entry.count > 0 && entry.count % threshold.max(1) == 0;
        return Ok(hit.then_some(entry.row));
    }
    apply_policy(table, index, policy);
    Ok(Some(entry.row))
}
