//! Activation streams: the single-pass input every tracker consumes.
//!
//! A stream is a flat list of row activations cut into tREFI slots. Every
//! slot except possibly the last is closed by a REF command.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use crate::timing::{BankGeometry, TimingParams};

/// Bank-local row index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct RowAddress(pub u32);

impl RowAddress {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn checked(index: u32, geometry: &BankGeometry) -> Result<Self, StreamError> {
        if index < geometry.rows_per_bank() {
            Ok(Self(index))
        } else {
            Err(StreamError::RowOutOfRange {
                row: index,
                rows_per_bank: geometry.rows_per_bank(),
            })
        }
    }
}

impl fmt::Display for RowAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StreamError {
    #[error("acts_per_trefi {requested} outside 1..={max}")]
    RateOutOfRange { requested: u64, max: u64 },
    #[error("slot {slot} holds {len} ACTs, more than the {max} that fit in tREFI")]
    SlotOverflow { slot: usize, len: usize, max: u64 },
    #[error("stream holds {len} ACTs, more than N = {max}")]
    TooLong { len: usize, max: u64 },
    #[error("row {row} outside bank of {rows_per_bank} rows")]
    RowOutOfRange { row: u32, rows_per_bank: u32 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Ordered row activations with the REF boundaries that cut them into slots.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ActivationStream {
    rows: Vec<RowAddress>,
    /// Cumulative event count at each REF; non-decreasing.
    ref_ends: Vec<usize>,
}

impl ActivationStream {
    pub fn new() -> Self {
        Self::default()
    }

    /// Assembles a stream from explicit slots. Every slot is closed by a REF.
    pub fn from_slots<I, S>(slots: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[RowAddress]>,
    {
        let mut stream = Self::new();
        for slot in slots {
            stream.rows.extend_from_slice(slot.as_ref());
            stream.push_ref();
        }
        stream
    }

    pub fn push(&mut self, row: RowAddress) {
        self.rows.push(row);
    }

    pub fn push_ref(&mut self) {
        self.ref_ends.push(self.rows.len());
    }

    /// Appends `other`, keeping its REF boundaries. An open trailing slot of
    /// `self` merges with the first slot of `other`.
    pub fn extend(&mut self, other: &ActivationStream) {
        let base = self.rows.len();
        self.rows.extend_from_slice(&other.rows);
        self.ref_ends.extend(other.ref_ends.iter().map(|&e| e + base));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[RowAddress] {
        &self.rows
    }

    pub fn ref_ends(&self) -> &[usize] {
        &self.ref_ends
    }

    pub fn ref_count(&self) -> usize {
        self.ref_ends.len()
    }

    /// Number of slots, counting an open trailing slot if it holds events.
    pub fn slot_count(&self) -> usize {
        let closed_end = self.ref_ends.last().copied().unwrap_or(0);
        self.ref_ends.len() + usize::from(closed_end < self.rows.len())
    }

    /// Iterates the slots as `(events, closed_by_ref)`.
    pub fn slots(&self) -> impl Iterator<Item = (&[RowAddress], bool)> + '_ {
        let closed_end = self.ref_ends.last().copied().unwrap_or(0);
        let tail = (closed_end < self.rows.len()).then(|| (&self.rows[closed_end..], false));
        let mut start = 0;
        self.ref_ends
            .iter()
            .map(move |&end| {
                let slot = &self.rows[start..end];
                start = end;
                (slot, true)
            })
            .chain(tail)
    }

    /// Checks both stream invariants against `timing`.
    pub fn validate(&self, timing: &TimingParams) -> Result<(), StreamError> {
        let max_slot = timing.max_acts_per_trefi();
        for (slot, (events, _)) in self.slots().enumerate() {
            if events.len() as u64 > max_slot {
                return Err(StreamError::SlotOverflow {
                    slot,
                    len: events.len(),
                    max: max_slot,
                });
            }
        }
        let n = timing.max_stream_len();
        if self.rows.len() as u64 > n {
            return Err(StreamError::TooLong {
                len: self.rows.len(),
                max: n,
            });
        }
        Ok(())
    }

    /// Checks every row against the bank size.
    pub fn validate_rows(&self, geometry: &BankGeometry) -> Result<(), StreamError> {
        match self.rows.iter().find(|r| r.0 >= geometry.rows_per_bank()) {
            Some(r) => Err(StreamError::RowOutOfRange {
                row: r.0,
                rows_per_bank: geometry.rows_per_bank(),
            }),
            None => Ok(()),
        }
    }

    /// Renders the line format: `<slot>,<row>` per event, `#REF` per boundary.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.rows.len() * 10);
        for (slot, (events, closed)) in self.slots().enumerate() {
            for row in events {
                let _ = writeln!(out, "{slot},{}", row.0);
            }
            if closed {
                out.push_str("#REF\n");
            }
        }
        out
    }
}

impl FromStr for ActivationStream {
    type Err = StreamError;

    /// Parses the line format. Blank lines and `#` comments other than the
    /// `#REF` marker are ignored; slot indices must match the REF count.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut stream = Self::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let parse_err = |message: String| StreamError::Parse {
                line: i + 1,
                message,
            };
            if line.is_empty() {
                continue;
            }
            if line == "#REF" {
                stream.push_ref();
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let (slot, row) = line
                .split_once(',')
                .ok_or_else(|| parse_err(format!("expected `<slot>,<row>`, got `{line}`")))?;
            let slot: usize = slot
                .trim()
                .parse()
                .map_err(|e| parse_err(format!("bad slot index: {e}")))?;
            let row: u32 = row
                .trim()
                .parse()
                .map_err(|e| parse_err(format!("bad row index: {e}")))?;
            if slot != stream.ref_count() {
                return Err(parse_err(format!(
                    "slot index {slot} but {} REFs seen so far",
                    stream.ref_count()
                )));
            }
            stream.push(RowAddress(row));
        }
        Ok(stream)
    }
}

/// Packs `pattern` into tREFI slots of `acts_per_trefi` events each, closing
/// every slot with a REF, truncated at N.
pub fn build_stream(
    pattern: &[RowAddress],
    acts_per_trefi: u64,
    timing: &TimingParams,
) -> Result<ActivationStream, StreamError> {
    let max = timing.max_acts_per_trefi();
    if acts_per_trefi == 0 || acts_per_trefi > max {
        return Err(StreamError::RateOutOfRange {
            requested: acts_per_trefi,
            max,
        });
    }
    let n = timing.max_stream_len().min(pattern.len() as u64) as usize;
    let slot = acts_per_trefi as usize;
    Ok(ActivationStream::from_slots(pattern[..n].chunks(slot)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(n: u32) -> Vec<RowAddress> {
        (0..n).map(RowAddress).collect()
    }

    #[test]
    fn one_full_trefi() {
        let s = build_stream(&rows(73), 73, &TimingParams::default()).unwrap();
        assert_eq!(s.ref_ends(), &[73]);
        s.validate(&TimingParams::default()).unwrap();
    }

    #[test]
    fn two_full_trefis() {
        let s = build_stream(&rows(146), 73, &TimingParams::default()).unwrap();
        assert_eq!(s.ref_count(), 2);
    }

    #[test]
    fn half_rate_packs_by_ceiling_division() {
        let s = build_stream(&rows(146), 36, &TimingParams::default()).unwrap();
        let lens: Vec<usize> = s.slots().map(|(e, _)| e.len()).collect();
        assert_eq!(lens, vec![36, 36, 36, 36, 2]);
        assert_eq!(s.ref_count(), 5);
    }

    #[test]
    fn rejects_rate_out_of_range() {
        let t = TimingParams::default();
        assert_eq!(
            build_stream(&rows(4), 0, &t),
            Err(StreamError::RateOutOfRange { requested: 0, max: 73 })
        );
        assert!(build_stream(&rows(4), 74, &t).is_err());
    }

    #[test]
    fn truncates_at_window_length() {
        let t = TimingParams::new(48, 48, 48 * 5, 0, 5).unwrap();
        let s = build_stream(&rows(12), 1, &t).unwrap();
        assert_eq!(s.len(), 5);
    }

    #[test]
    fn validator_catches_overfull_slot() {
        let s = ActivationStream::from_slots([rows(74)]);
        assert!(matches!(
            s.validate(&TimingParams::default()),
            Err(StreamError::SlotOverflow { slot: 0, len: 74, max: 73 })
        ));
    }

    #[test]
    fn text_round_trip_with_open_tail() {
        let mut s = ActivationStream::from_slots([rows(2), vec![], rows(1)]);
        s.push(RowAddress(7));
        let text = s.to_text();
        assert_eq!(text, "0,0\n0,1\n#REF\n#REF\n2,0\n#REF\n3,7\n");
        assert_eq!(text.parse::<ActivationStream>().unwrap(), s);
        assert_eq!(s.slot_count(), 4);
    }

    #[test]
    fn parse_rejects_slot_mismatch() {
        let err = "0,1\n1,2\n".parse::<ActivationStream>().unwrap_err();
        assert!(matches!(err, StreamError::Parse { line: 2, .. }));
        assert!("0;1".parse::<ActivationStream>().is_err());
    }

    #[test]
    fn row_bounds() {
        let g = BankGeometry::new(8).unwrap();
        assert!(RowAddress::checked(8, &g).is_err());
        let s = ActivationStream::from_slots([vec![RowAddress(9)]]);
        assert!(s.validate_rows(&g).is_err());
    }
}
