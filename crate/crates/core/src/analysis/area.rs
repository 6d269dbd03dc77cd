use std::fmt;
use std::ops::RangeInclusive;

use super::AnalysisError;
use crate::scalar::Real;
use crate::timing::{ceil_log2, BankGeometry, TimingParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    SpaceSaving,
    MisraGries,
    LossyCounting,
    StickySampling,
    CountMin { width: u64, depth: u64 },
    CountSketch,
    WaveletSynopsis,
    Prac,
}

/// Algorithms in the default area sweep. Count-Sketch and the wavelet
/// synopsis are computable but left out: their (1/eps)^2 size dwarfs the
/// rest.
pub const DEFAULT_SWEEP: [Algorithm; 6] = [
    Algorithm::SpaceSaving,
    Algorithm::MisraGries,
    Algorithm::LossyCounting,
    Algorithm::StickySampling,
    Algorithm::CountMin {
        width: 2048,
        depth: 4,
    },
    Algorithm::Prac,
];

impl Algorithm {
    pub fn parse(text: &str) -> Option<Self> {
        Some(match text {
            "space_saving" => Self::SpaceSaving,
            "misra_gries" => Self::MisraGries,
            "lossy_counting" => Self::LossyCounting,
            "sticky_sampling" => Self::StickySampling,
            "count_sketch" => Self::CountSketch,
            "wavelet_synopsis" => Self::WaveletSynopsis,
            "prac" | "exact" => Self::Prac,
            other => {
                let shape = other.strip_prefix("count_min")?;
                if shape.is_empty() {
                    return Some(Self::CountMin {
                        width: 2048,
                        depth: 4,
                    });
                }
                let (w, d) = shape.strip_prefix('-')?.split_once('-')?;
                Self::CountMin {
                    width: w.parse().ok()?,
                    depth: d.parse().ok()?,
                }
            }
        })
    }

    /// Counter-table layouts store a row address next to each counter.
    pub fn stores_address(&self) -> bool {
        matches!(
            self,
            Self::SpaceSaving | Self::MisraGries | Self::LossyCounting | Self::StickySampling
        )
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SpaceSaving => f.write_str("space_saving"),
            Self::MisraGries => f.write_str("misra_gries"),
            Self::LossyCounting => f.write_str("lossy_counting"),
            Self::StickySampling => f.write_str("sticky_sampling"),
            Self::CountMin { width, depth } => write!(f, "count_min-{width}-{depth}"),
            Self::CountSketch => f.write_str("count_sketch"),
            Self::WaveletSynopsis => f.write_str("wavelet_synopsis"),
            Self::Prac => f.write_str("prac"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Storage {
    Sram,
    Cam,
    Dram,
}

impl Storage {
    pub fn name(self) -> &'static str {
        match self {
            Self::Sram => "sram",
            Self::Cam => "cam",
            Self::Dram => "dram",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "sram" => Some(Self::Sram),
            "cam" => Some(Self::Cam),
            "dram" => Some(Self::Dram),
            _ => None,
        }
    }
}

/// Process the structure is built in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Technology {
    Logic,
    Memory,
}

impl Technology {
    pub fn name(self) -> &'static str {
        match self {
            Self::Logic => "logic",
            Self::Memory => "memory",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "logic" => Some(Self::Logic),
            "memory" => Some(Self::Memory),
            _ => None,
        }
    }
}

/// Area per bit in um^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaConstants<T> {
    pub sram_logic: T,
    pub sram_memory: T,
    pub cam_logic: T,
    pub cam_memory: T,
    pub dram_memory: T,
}

impl<T: Real> Default for AreaConstants<T> {
    fn default() -> Self {
        Self {
            sram_logic: T::lit(0.0263),
            sram_memory: T::lit(7.3),
            cam_logic: T::lit(0.0526),
            cam_memory: T::lit(14.6),
            dram_memory: T::lit(0.00317),
        }
    }
}

impl<T: Real> AreaConstants<T> {
    pub fn per_bit(&self, storage: Storage, technology: Technology) -> Option<T> {
        match (storage, technology) {
            (Storage::Sram, Technology::Logic) => Some(self.sram_logic),
            (Storage::Sram, Technology::Memory) => Some(self.sram_memory),
            (Storage::Cam, Technology::Logic) => Some(self.cam_logic),
            (Storage::Cam, Technology::Memory) => Some(self.cam_memory),
            (Storage::Dram, Technology::Memory) => Some(self.dram_memory),
            (Storage::Dram, Technology::Logic) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostEstimate<T> {
    pub algorithm: Algorithm,
    pub storage: Storage,
    pub technology: Technology,
    pub rh_th: u64,
    pub entries: u64,
    pub bits_per_entry: u64,
    pub total_bits: u64,
    pub area_um2: T,
}

/// Per-bank storage model: Table-3 space complexities sized so that
/// eps*N = RH_TH/4 (RH_TH/2 for PRAC), times a per-bit area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaModel<T> {
    pub timing: TimingParams,
    pub geometry: BankGeometry,
    pub constants: AreaConstants<T>,
    /// Failure probability used by the probabilistic complexities.
    pub delta: T,
}

impl<T: Real> Default for AreaModel<T> {
    fn default() -> Self {
        Self {
            timing: TimingParams::default(),
            geometry: BankGeometry::default(),
            constants: AreaConstants::default(),
            delta: T::lit(0.01),
        }
    }
}

fn ceil_count<T: Real>(x: T) -> u64 {
    x.ceil().to_u64().unwrap_or(u64::MAX).max(1)
}

impl<T: Real> AreaModel<T> {
    fn n(&self) -> T {
        T::from_count(self.timing.max_stream_len())
    }

    /// T: the eps*N target.
    pub fn threshold(&self, algorithm: Algorithm, rh_th: u64) -> Result<T, AnalysisError> {
        let divisor = if algorithm == Algorithm::Prac { 2.0 } else { 4.0 };
        let t = T::from_count(rh_th) / T::lit(divisor);
        if t < T::one() {
            return Err(AnalysisError::ThresholdTooLow {
                rh_th,
                threshold: format!("{t}"),
            });
        }
        Ok(t)
    }

    pub fn required_entries(&self, algorithm: Algorithm, rh_th: u64) -> Result<u64, AnalysisError> {
        let t = self.threshold(algorithm, rh_th)?;
        let n = self.n();
        let one_over_eps = n / t;
        Ok(match algorithm {
            Algorithm::SpaceSaving | Algorithm::MisraGries => {
                // ceil(N / T) in exact integer arithmetic: T = rh_th / 4.
                (4 * self.timing.max_stream_len()).div_ceil(rh_th).max(1)
            }
            Algorithm::LossyCounting => ceil_count(one_over_eps * t.ln()),
            Algorithm::StickySampling => {
                let eps = t / n;
                let inner = T::one() / (T::lit(2.0) * eps * self.delta);
                ceil_count(T::lit(2.0) * one_over_eps * inner.ln())
            }
            Algorithm::CountMin { width, depth } => width * depth,
            Algorithm::CountSketch | Algorithm::WaveletSynopsis => {
                ceil_count(one_over_eps * one_over_eps * (T::one() / self.delta).ln())
            }
            Algorithm::Prac => self.geometry.rows_per_bank() as u64,
        })
    }

    pub fn bits_per_entry(&self, algorithm: Algorithm, rh_th: u64) -> u64 {
        let counter = ceil_log2(self.timing.max_stream_len()) as u64;
        match algorithm {
            Algorithm::Prac => (ceil_log2(rh_th) as u64).saturating_sub(1).max(1),
            a if a.stores_address() => self.geometry.address_bits() as u64 + counter,
            _ => counter,
        }
    }

    pub fn area_estimate(
        &self,
        algorithm: Algorithm,
        rh_th: u64,
        storage: Storage,
        technology: Technology,
    ) -> Result<CostEstimate<T>, AnalysisError> {
        let unsupported = || AnalysisError::Unsupported {
            algorithm: algorithm.to_string(),
            storage: storage.name(),
            technology: technology.name(),
        };
        if (storage == Storage::Dram) != (algorithm == Algorithm::Prac) {
            return Err(unsupported());
        }
        let per_bit = self
            .constants
            .per_bit(storage, technology)
            .ok_or_else(unsupported)?;
        let entries = self.required_entries(algorithm, rh_th)?;
        let bits_per_entry = self.bits_per_entry(algorithm, rh_th);
        let total_bits = entries.saturating_mul(bits_per_entry);
        Ok(CostEstimate {
            algorithm,
            storage,
            technology,
            rh_th,
            entries,
            bits_per_entry,
            total_bits,
            area_um2: T::from_count(total_bits) * per_bit,
        })
    }

    /// Scanning `range` from the top, the first rh_th at which
    /// configuration `a` costs at least as much as `b`. Below it `a` is the
    /// larger structure; an algorithm against itself crosses at the top.
    pub fn crossover_threshold(
        &self,
        a: (Algorithm, Storage, Technology),
        b: (Algorithm, Storage, Technology),
        range: RangeInclusive<u64>,
    ) -> Result<u64, AnalysisError> {
        let (lo, hi) = (*range.start(), *range.end());
        for rh in range.rev() {
            let area_a = self.area_estimate(a.0, rh, a.1, a.2)?.area_um2;
            let area_b = self.area_estimate(b.0, rh, b.1, b.2)?.area_um2;
            if area_a >= area_b {
                return Ok(rh);
            }
        }
        Err(AnalysisError::NoCrossover { lo, hi })
    }
}
