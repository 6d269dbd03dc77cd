//! Adversarial and benign activation patterns.
//!
//! Row naming follows the attack descriptions: `r0` is the target and
//! `r1, r2, ...` are decoys. Decoys live at the top of the address space,
//! two rows apart, so no decoy neighbours the target.

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::ini::{ConfigError, Section};
use crate::rng::{derive_seed, rng_from_seed};
use crate::stream::{build_stream, ActivationStream, RowAddress, StreamError};
use crate::timing::{BankGeometry, TimingParams};
use crate::trackers::{DsacTracker, MitigationPolicy, Tracker};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttackError {
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error("attack needs {needed} ACTs but the window holds N = {max}")]
    OverBudget { needed: u64, max: u64 },
    #[error("{name} = {value} outside {range}")]
    ParameterRange {
        name: &'static str,
        value: String,
        range: String,
    },
    #[error("bank of {rows_per_bank} rows cannot hold {decoys} decoys apart from the target")]
    TooManyDecoys { decoys: usize, rows_per_bank: u32 },
}

fn range_err(name: &'static str, value: impl ToString, range: impl Into<String>) -> AttackError {
    AttackError::ParameterRange {
        name,
        value: value.to_string(),
        range: range.into(),
    }
}

/// `count` decoy rows `rows_per_bank - 1 - 2i`, skipping the target and its
/// neighbours.
pub fn decoy_rows(
    count: usize,
    target: RowAddress,
    geometry: &BankGeometry,
) -> Result<Vec<RowAddress>, AttackError> {
    let rows = geometry.rows_per_bank() as i64;
    let t = target.0 as i64;
    let out: Vec<RowAddress> = (0..)
        .map(|i: i64| rows - 1 - 2 * i)
        .take_while(|&r| r >= 0)
        .filter(|&r| (r - t).abs() > 1)
        .take(count)
        .map(|r| RowAddress(r as u32))
        .collect();
    if out.len() < count {
        return Err(AttackError::TooManyDecoys {
            decoys: count,
            rows_per_bank: geometry.rows_per_bank(),
        });
    }
    Ok(out)
}

/// Space-Saving thrash: `(r0, r1, ..., rk)^reps` in every tREFI for a full
/// refresh window. With k + 1 rows cycling through k entries every lookup
/// misses.
pub fn gen_ss_thrash(
    capacity: usize,
    reps: usize,
    target: RowAddress,
    geometry: &BankGeometry,
    timing: &TimingParams,
) -> Result<ActivationStream, AttackError> {
    if capacity == 0 || reps == 0 {
        return Err(range_err("capacity/reps", format!("{capacity}/{reps}"), ">= 1"));
    }
    let slot_len = (capacity + 1) * reps;
    let max = timing.max_acts_per_trefi();
    if slot_len as u64 > max {
        return Err(range_err("(capacity + 1) * reps", slot_len, format!("<= {max}")));
    }
    let mut rows = vec![target];
    rows.extend(decoy_rows(capacity, target, geometry)?);
    let slot: Vec<RowAddress> = rows.iter().copied().cycle().take(slot_len).collect();
    let slots = (timing.refs_per_window).min(timing.max_stream_len() / slot_len as u64);
    Ok(ActivationStream::from_slots(
        (0..slots).map(|_| slot.as_slice()),
    ))
}

/// DSAC invalidation attack, adaptive. A shadow DSAC tracker with
/// post-mitigation invalidation is driven alongside the generated stream
/// and its second-minimum count sets each burst length.
///
/// First tREFI: `(r15, ..., r0)^3` then `(r15, ..., r1, r16)`. Every later
/// tREFI: `(r0)^b` with b the current second minimum, then as many
/// `(r15, ..., r0)` rounds as fit, then the substitution pass
/// `(r15, ..., r1, r_new)` right before the REF. The seed permutes decoy
/// order; the target always closes a round.
pub fn gen_dsac_invalidate(
    capacity: usize,
    target: RowAddress,
    slots: u64,
    geometry: &BankGeometry,
    timing: &TimingParams,
    seed: u64,
) -> Result<ActivationStream, AttackError> {
    let max = timing.max_acts_per_trefi() as usize;
    if capacity < 2 || 2 * capacity > max {
        return Err(range_err("capacity", capacity, format!("2..={}", max / 2)));
    }
    let needed = slots * max as u64;
    if needed > timing.max_stream_len() {
        return Err(AttackError::OverBudget {
            needed,
            max: timing.max_stream_len(),
        });
    }
    let mut rng = rng_from_seed(seed);
    let mut decoys = decoy_rows(2 * capacity - 1, target, geometry)?;
    let (fill, fresh) = decoys.split_at_mut(capacity - 1);
    fill.shuffle(&mut rng);
    fresh.shuffle(&mut rng);
    // (r15, ..., r1, r0)
    let mut round: Vec<RowAddress> = fill.to_vec();
    round.push(target);
    let fresh = fresh.to_vec();

    let mut shadow = DsacTracker::new(capacity, true, false, MitigationPolicy::Invalidate, 0)
        .expect("capacity checked");
    let mut stream = ActivationStream::new();
    let emit = |row: RowAddress, stream: &mut ActivationStream, shadow: &mut DsacTracker| {
        stream.push(row);
        shadow.on_activation(row);
    };
    for slot in 0..slots {
        if slot == 0 {
            for _ in 0..3 {
                for &r in &round {
                    emit(r, &mut stream, &mut shadow);
                }
            }
        } else {
            let room = max - capacity;
            let burst = (shadow.table().second_min_count() as usize).min(room);
            for _ in 0..burst {
                emit(target, &mut stream, &mut shadow);
            }
            let mut used = burst;
            while used + 2 * capacity <= max {
                for &r in &round {
                    emit(r, &mut stream, &mut shadow);
                }
                used += capacity;
            }
        }
        let new_row = fresh[slot as usize % fresh.len()];
        for &r in &round[..capacity - 1] {
            emit(r, &mut stream, &mut shadow);
        }
        emit(new_row, &mut stream, &mut shadow);
        stream.push_ref();
        shadow.on_ref(1);
    }
    Ok(stream)
}

/// Phase-changing attack on stochastic eviction: `decoys` rows hammered
/// `per_row_budget` times each in turn, then the target for the same budget.
pub fn gen_dsac_stochastic(
    decoys: usize,
    per_row_budget: u64,
    target: RowAddress,
    geometry: &BankGeometry,
    timing: &TimingParams,
) -> Result<ActivationStream, AttackError> {
    let needed = (decoys as u64 + 1) * per_row_budget;
    let max = timing.max_stream_len();
    if needed > max {
        return Err(AttackError::OverBudget { needed, max });
    }
    let mut pattern = Vec::with_capacity(needed as usize);
    for d in decoy_rows(decoys, target, geometry)? {
        pattern.extend(std::iter::repeat_n(d, per_row_budget as usize));
    }
    pattern.extend(std::iter::repeat_n(target, per_row_budget as usize));
    Ok(build_stream(&pattern, timing.max_acts_per_trefi(), timing)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Placement {
    /// Target ACTs open the tREFI.
    #[default]
    Head,
    /// Target ACTs close the tREFI.
    Tail,
}

/// Decoy pool for single-target streams.
pub const SINGLE_TARGET_POOL: usize = 4096;

/// `target_acts` target ACTs plus `acts_per_trefi - target_acts` decoys per
/// tREFI, for `ceil(rh_th / target_acts)` tREFIs.
pub fn gen_single_target(
    target_acts: u64,
    acts_per_trefi: u64,
    rh_th: u64,
    placement: Placement,
    target: RowAddress,
    geometry: &BankGeometry,
    timing: &TimingParams,
) -> Result<ActivationStream, AttackError> {
    let max = timing.max_acts_per_trefi();
    if acts_per_trefi == 0 || acts_per_trefi > max {
        return Err(StreamError::RateOutOfRange {
            requested: acts_per_trefi,
            max,
        }
        .into());
    }
    if target_acts == 0 || target_acts > acts_per_trefi {
        return Err(range_err(
            "target_acts",
            target_acts,
            format!("1..={acts_per_trefi}"),
        ));
    }
    let slots = rh_th.div_ceil(target_acts);
    let needed = slots * acts_per_trefi;
    if needed > timing.max_stream_len() {
        return Err(AttackError::OverBudget {
            needed,
            max: timing.max_stream_len(),
        });
    }
    let pool_size = SINGLE_TARGET_POOL.min(geometry.rows_per_bank() as usize / 2 - 2);
    let pool = decoy_rows(pool_size, target, geometry)?;
    let mut decoys = pool.iter().copied().cycle();
    let n_decoys = (acts_per_trefi - target_acts) as usize;
    let targets = std::iter::repeat_n(target, target_acts as usize);
    let mut stream = ActivationStream::new();
    for _ in 0..slots {
        let d: Vec<RowAddress> = decoys.by_ref().take(n_decoys).collect();
        let slot: Vec<RowAddress> = match placement {
            Placement::Head => targets.clone().chain(d).collect(),
            Placement::Tail => d.into_iter().chain(targets.clone()).collect(),
        };
        for r in slot {
            stream.push(r);
        }
        stream.push_ref();
    }
    Ok(stream)
}

/// `rows` rows round-robin at `acts_per_trefi`, filling the window.
pub fn gen_round_robin(
    rows: usize,
    acts_per_trefi: u64,
    target: RowAddress,
    geometry: &BankGeometry,
    timing: &TimingParams,
) -> Result<ActivationStream, AttackError> {
    if rows == 0 {
        return Err(range_err("rows", 0, ">= 1"));
    }
    let mut set = vec![target];
    set.extend(decoy_rows(rows - 1, target, geometry)?);
    let len = timing
        .max_stream_len()
        .min(timing.refs_per_window.saturating_mul(acts_per_trefi)) as usize;
    let pattern: Vec<RowAddress> = set.iter().copied().cycle().take(len).collect();
    Ok(build_stream(&pattern, acts_per_trefi, timing)?)
}

/// I.i.d. uniform rows in `[0, rows)`.
pub fn gen_uniform_random(
    rows: u32,
    length: usize,
    acts_per_trefi: u64,
    timing: &TimingParams,
    seed: u64,
) -> Result<ActivationStream, AttackError> {
    if rows == 0 {
        return Err(range_err("rows", 0, ">= 1"));
    }
    if length as u64 > timing.max_stream_len() {
        return Err(AttackError::OverBudget {
            needed: length as u64,
            max: timing.max_stream_len(),
        });
    }
    let mut rng = rng_from_seed(seed);
    let pattern: Vec<RowAddress> = (0..length)
        .map(|_| RowAddress(rng.random_range(0..rows)))
        .collect();
    Ok(build_stream(&pattern, acts_per_trefi, timing)?)
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttackKind {
    SsThrash { capacity: usize, reps: usize },
    DsacInvalidate { capacity: usize, slots: Option<u64> },
    DsacStochastic { decoys: usize, per_row_budget: u64 },
    SingleTarget { placement: Placement },
    RoundRobin { rows: usize },
    UniformRandom { rows: u32, length: usize },
}

impl AttackKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::SsThrash { .. } => "ss_thrash",
            Self::DsacInvalidate { .. } => "dsac_invalidate",
            Self::DsacStochastic { .. } => "dsac_stochastic",
            Self::SingleTarget { .. } => "single_target",
            Self::RoundRobin { .. } => "round_robin",
            Self::UniformRandom { .. } => "uniform_random",
        }
    }
}

/// Sweep point an attack is generated for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackContext {
    pub timing: TimingParams,
    pub geometry: BankGeometry,
    pub rh_th: u64,
    /// n; defaults to the maximum rate.
    pub acts_per_trefi: Option<u64>,
    /// a, for single-target attacks; defaults to 1.
    pub target_acts: Option<u64>,
}

impl AttackContext {
    pub fn new(timing: TimingParams, rh_th: u64) -> Self {
        Self {
            timing,
            geometry: BankGeometry::default(),
            rh_th,
            acts_per_trefi: None,
            target_acts: None,
        }
    }

    pub fn rate(&self) -> u64 {
        self.acts_per_trefi
            .unwrap_or_else(|| self.timing.max_acts_per_trefi())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackSpec {
    pub label: String,
    pub kind: AttackKind,
    pub target: RowAddress,
    pub seed: Option<u64>,
}

impl AttackSpec {
    pub fn new(label: impl Into<String>, kind: AttackKind) -> Self {
        Self {
            label: label.into(),
            kind,
            target: RowAddress(0),
            seed: None,
        }
    }

    pub fn from_section(label: &str, section: &Section) -> Result<Self, ConfigError> {
        let kind_name: String = section.require("kind")?;
        let (kind, keys): (AttackKind, &[&str]) = match kind_name.as_str() {
            "ss_thrash" => (
                AttackKind::SsThrash {
                    capacity: section.parse("capacity")?.unwrap_or(16),
                    reps: section.parse("reps")?.unwrap_or(4),
                },
                &["capacity", "reps"],
            ),
            "dsac_invalidate" => (
                AttackKind::DsacInvalidate {
                    capacity: section.parse("capacity")?.unwrap_or(16),
                    slots: section.parse("slots")?,
                },
                &["capacity", "slots"],
            ),
            "dsac_stochastic" => (
                AttackKind::DsacStochastic {
                    decoys: section.parse("decoys")?.unwrap_or(16),
                    per_row_budget: section.parse("per_row_budget")?.unwrap_or(33_000),
                },
                &["decoys", "per_row_budget"],
            ),
            "single_target" => {
                let placement = match section.get("placement").map(|e| e.value.as_str()) {
                    None | Some("head") => Placement::Head,
                    Some("tail") => Placement::Tail,
                    Some(other) => {
                        return Err(section.field_error(
                            "placement",
                            format!("unknown placement {other:?} (head, tail)"),
                        ))
                    }
                };
                (AttackKind::SingleTarget { placement }, &["placement"])
            }
            "round_robin" => (
                AttackKind::RoundRobin {
                    rows: section.require("rows")?,
                },
                &["rows"],
            ),
            "uniform_random" => (
                AttackKind::UniformRandom {
                    rows: section.require("rows")?,
                    length: section.require("length")?,
                },
                &["rows", "length"],
            ),
            other => {
                return Err(section.field_error("kind", format!("unknown attack kind {other:?}")))
            }
        };
        let mut allowed = vec!["kind", "target", "seed"];
        allowed.extend_from_slice(keys);
        section.check_keys(&allowed)?;
        Ok(Self {
            label: label.to_string(),
            kind,
            target: RowAddress(section.parse("target")?.unwrap_or(0)),
            seed: section.parse("seed")?,
        })
    }

    /// Whether the n / a sweep axes change this attack's stream.
    pub fn uses_rate(&self) -> bool {
        matches!(
            self.kind,
            AttackKind::SingleTarget { .. }
                | AttackKind::RoundRobin { .. }
                | AttackKind::UniformRandom { .. }
        )
    }

    pub fn uses_target_acts(&self) -> bool {
        matches!(self.kind, AttackKind::SingleTarget { .. })
    }

    pub fn generate(
        &self,
        ctx: &AttackContext,
        run_seed: u64,
    ) -> Result<ActivationStream, AttackError> {
        if self.target.0 >= ctx.geometry.rows_per_bank() {
            return Err(StreamError::RowOutOfRange {
                row: self.target.0,
                rows_per_bank: ctx.geometry.rows_per_bank(),
            }
            .into());
        }
        let seed = self
            .seed
            .unwrap_or_else(|| derive_seed(run_seed, &[0x6174_7461_636b]));
        let (t, g) = (&ctx.timing, &ctx.geometry);
        match &self.kind {
            AttackKind::SsThrash { capacity, reps } => {
                gen_ss_thrash(*capacity, *reps, self.target, g, t)
            }
            AttackKind::DsacInvalidate { capacity, slots } => {
                let full = t
                    .refs_per_window
                    .min(t.max_stream_len() / t.max_acts_per_trefi().max(1));
                gen_dsac_invalidate(*capacity, self.target, slots.unwrap_or(full), g, t, seed)
            }
            AttackKind::DsacStochastic {
                decoys,
                per_row_budget,
            } => gen_dsac_stochastic(*decoys, *per_row_budget, self.target, g, t),
            AttackKind::SingleTarget { placement } => gen_single_target(
                ctx.target_acts.unwrap_or(1),
                ctx.rate(),
                ctx.rh_th,
                *placement,
                self.target,
                g,
                t,
            ),
            AttackKind::RoundRobin { rows } => {
                gen_round_robin(*rows, ctx.rate(), self.target, g, t)
            }
            AttackKind::UniformRandom { rows, length } => {
                gen_uniform_random(*rows, *length, ctx.rate(), t, seed)
            }
        }
    }
}
