//! DRAM timing constants and the stream geometry derived from them.
//!
//! All durations are integer nanoseconds so slot arithmetic never drifts.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimingError {
    #[error("{0} must be strictly positive")]
    NonPositive(&'static str),
    #[error("tRC ({t_rc}ns) exceeds tREFI ({t_refi}ns)")]
    RcExceedsRefi { t_rc: u64, t_refi: u64 },
    #[error("tREFI ({t_refi}ns) exceeds tREFW ({t_refw}ns)")]
    RefiExceedsRefw { t_refi: u64, t_refw: u64 },
    #[error("tRFC ({t_rfc}ns) exceeds tREFI ({t_refi}ns)")]
    RfcExceedsRefi { t_rfc: u64, t_refi: u64 },
    #[error("{refs} REFs of {period}ns do not fit a {t_refw}ns window")]
    RefScheduleOverflow { refs: u64, period: u64, t_refw: u64 },
    #[error("rows_per_bank must be at least 1")]
    EmptyBank,
}

/// Timing parameters of one bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TimingParams {
    pub t_rc: u64,
    pub t_refi: u64,
    pub t_refw: u64,
    /// May be zero; every other duration must be positive.
    pub t_rfc: u64,
    /// REF commands per tREFW. Kept explicit rather than derived from
    /// tREFW / tREFI, which does not round to the JEDEC count.
    pub refs_per_window: u64,
}

impl Default for TimingParams {
    /// DDR4/DDR5-like defaults: tRC 48ns, tREFI 3.9us, tREFW 32ms,
    /// tRFC 350ns, 8192 REFs per window.
    fn default() -> Self {
        Self {
            t_rc: 48,
            t_refi: 3_900,
            t_refw: 32_000_000,
            t_rfc: 350,
            refs_per_window: 8_192,
        }
    }
}

impl TimingParams {
    pub fn new(
        t_rc: u64,
        t_refi: u64,
        t_refw: u64,
        t_rfc: u64,
        refs_per_window: u64,
    ) -> Result<Self, TimingError> {
        let timing = Self {
            t_rc,
            t_refi,
            t_refw,
            t_rfc,
            refs_per_window,
        };
        timing.validate()?;
        Ok(timing)
    }

    pub fn validate(&self) -> Result<(), TimingError> {
        for (name, v) in [("tRC", self.t_rc), ("tREFI", self.t_refi), ("tREFW", self.t_refw)] {
            if v == 0 {
                return Err(TimingError::NonPositive(name));
            }
        }
        if self.t_rc > self.t_refi {
            return Err(TimingError::RcExceedsRefi {
                t_rc: self.t_rc,
                t_refi: self.t_refi,
            });
        }
        if self.t_refi > self.t_refw {
            return Err(TimingError::RefiExceedsRefw {
                t_refi: self.t_refi,
                t_refw: self.t_refw,
            });
        }
        if self.t_rfc > self.t_refi {
            return Err(TimingError::RfcExceedsRefi {
                t_rfc: self.t_rfc,
                t_refi: self.t_refi,
            });
        }
        let schedule = self.refs_per_window.checked_mul(self.t_refi);
        if schedule.is_none_or(|s| s > self.t_refw + self.t_refi) {
            return Err(TimingError::RefScheduleOverflow {
                refs: self.refs_per_window,
                period: self.t_refi,
                t_refw: self.t_refw,
            });
        }
        if self.refs_per_window * self.t_rfc > self.t_refw {
            return Err(TimingError::RefScheduleOverflow {
                refs: self.refs_per_window,
                period: self.t_rfc,
                t_refw: self.t_refw,
            });
        }
        Ok(())
    }

    /// ACT slots between two consecutive REFs: `floor((tREFI - tRFC) / tRC)`.
    pub fn max_acts_per_trefi(&self) -> u64 {
        (self.t_refi - self.t_rfc) / self.t_rc
    }

    /// Worst-case stream length N per refresh window:
    /// `floor((tREFW - REFs * tRFC) / tRC)`.
    pub fn max_stream_len(&self) -> u64 {
        (self.t_refw - self.refs_per_window * self.t_rfc) / self.t_rc
    }
}

/// Row-address space of one bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BankGeometry {
    rows_per_bank: u32,
    address_bits: u32,
}

impl Default for BankGeometry {
    /// 128K rows per bank (17 address bits).
    fn default() -> Self {
        Self::new(131_072).expect("default geometry is valid")
    }
}

impl BankGeometry {
    pub fn new(rows_per_bank: u32) -> Result<Self, TimingError> {
        if rows_per_bank == 0 {
            return Err(TimingError::EmptyBank);
        }
        Ok(Self {
            rows_per_bank,
            address_bits: ceil_log2(rows_per_bank as u64),
        })
    }

    pub fn rows_per_bank(&self) -> u32 {
        self.rows_per_bank
    }

    pub fn address_bits(&self) -> u32 {
        self.address_bits
    }
}

/// Smallest `b` with `2^b >= x`; zero for `x <= 1`.
pub fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn timing(t_rc: u64, t_refi: u64, t_refw: u64, t_rfc: u64, refs: u64) -> TimingParams {
        TimingParams::new(t_rc, t_refi, t_refw, t_rfc, refs).unwrap()
    }

    #[test]
    fn max_acts_per_trefi_examples() {
        assert_eq!(TimingParams::default().max_acts_per_trefi(), 73);
        assert_eq!(timing(48, 48, 48, 0, 1).max_acts_per_trefi(), 1);
        assert_eq!(timing(50, 3_900, 32_000_000, 400, 8_192).max_acts_per_trefi(), 70);
    }

    #[test]
    fn max_stream_len_examples() {
        assert_eq!(TimingParams::default().max_stream_len(), 606_933);
        assert_eq!(timing(48, 48, 48, 0, 0).max_stream_len(), 1);
        assert_eq!(timing(48, 3_900, 16_000_000, 350, 4_096).max_stream_len(), 303_466);
    }

    #[test]
    fn rejects_inconsistent_timing() {
        assert_eq!(
            TimingParams::new(0, 3_900, 32_000_000, 350, 8_192),
            Err(TimingError::NonPositive("tRC"))
        );
        assert!(matches!(
            TimingParams::new(4_000, 3_900, 32_000_000, 350, 8_192),
            Err(TimingError::RcExceedsRefi { .. })
        ));
        assert!(matches!(
            TimingParams::new(48, 3_900, 3_000, 350, 1),
            Err(TimingError::RefiExceedsRefw { .. })
        ));
        assert!(matches!(
            TimingParams::new(48, 3_900, 32_000_000, 350, 9_000),
            Err(TimingError::RefScheduleOverflow { .. })
        ));
    }

    #[test]
    fn geometry_address_bits() {
        assert_eq!(BankGeometry::default().address_bits(), 17);
        assert_eq!(BankGeometry::new(1).unwrap().address_bits(), 0);
        assert_eq!(BankGeometry::new(131_073).unwrap().address_bits(), 18);
        assert!(BankGeometry::new(0).is_err());
    }

    #[test]
    fn ceil_log2_values() {
        assert_eq!(ceil_log2(606_933), 20);
        assert_eq!(ceil_log2(2_400), 12);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(1_048_576), 20);
    }
}
