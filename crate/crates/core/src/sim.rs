//! Replays an activation stream through a tracker under the REF schedule
//! against a ground-truth oracle.
//!
//! Oracle semantics: each row has a count of activations since its last
//! mitigation. Counts are committed to the row's peak at every REF, after
//! that REF's mitigations, and at stream end. A row mitigated at a REF (or
//! immediately, by PARA) therefore never commits the count it had built up
//! in that tREFI. A row whose committed count reaches `rh_th` is a bitflip.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use thiserror::Error;

use crate::rng::derive_seed;
use crate::stream::{ActivationStream, RowAddress, StreamError};
use crate::timing::{BankGeometry, TimingParams};
use crate::trackers::{BuildContext, Tracker};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error("rh_th must be at least 1")]
    ZeroThreshold,
    #[error("{tracker} returned {returned} rows for a budget of {budget}")]
    BudgetExceeded {
        tracker: &'static str,
        returned: usize,
        budget: usize,
    },
}

/// Which share of RH_TH a tracker's eps*N target is set to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdRule {
    #[default]
    Quarter,
    Half,
}

impl ThresholdRule {
    pub fn threshold(self, rh_th: u64) -> u64 {
        let t = match self {
            Self::Quarter => rh_th / 4,
            Self::Half => rh_th / 2,
        };
        t.max(1)
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "quarter" => Some(Self::Quarter),
            "half" => Some(Self::Half),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TableReset {
    #[default]
    None,
    /// `tracker.reset()` after every `refs_per_window` REFs.
    PerWindow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub timing: TimingParams,
    pub geometry: BankGeometry,
    pub rh_th: u64,
    pub mitigations_per_ref: usize,
    pub table_reset: TableReset,
    pub rule: ThresholdRule,
    pub seed: u64,
    /// When set, Monte Carlo success means this row flips.
    pub target: Option<RowAddress>,
    pub trace: bool,
}

impl SimConfig {
    pub fn new(timing: TimingParams, rh_th: u64) -> Self {
        Self {
            timing,
            geometry: BankGeometry::default(),
            rh_th,
            mitigations_per_ref: 1,
            table_reset: TableReset::None,
            rule: ThresholdRule::Quarter,
            seed: 0,
            target: None,
            trace: false,
        }
    }

    pub fn build_context(&self) -> BuildContext {
        BuildContext {
            timing: self.timing,
            geometry: self.geometry,
            rh_th: self.rh_th,
            rule: self.rule,
            mitigations_per_ref: self.mitigations_per_ref,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mitigation {
    /// Events processed when the mitigation was issued.
    pub after_event: usize,
    pub row: RowAddress,
    /// False for immediate (PARA) mitigations.
    pub at_ref: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefPoint {
    pub ref_index: u64,
    pub after_event: usize,
    pub target_count: u64,
    pub target_estimate: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SimReport {
    /// Peak committed count per activated row.
    pub max_unmitigated: BTreeMap<RowAddress, u64>,
    pub bitflip_rows: BTreeSet<RowAddress>,
    /// Mitigations issued in REF slots.
    pub total_mitigations: u64,
    /// Mitigations issued outside REF slots.
    pub immediate_mitigations: u64,
    pub mitigations_on_target: u64,
    pub refs: u64,
    pub mitigation_log: Vec<Mitigation>,
    pub per_ref_trace: Option<Vec<RefPoint>>,
}

impl SimReport {
    pub fn peak(&self) -> u64 {
        self.max_unmitigated.values().copied().max().unwrap_or(0)
    }

    pub fn peak_of(&self, row: RowAddress) -> u64 {
        self.max_unmitigated.get(&row).copied().unwrap_or(0)
    }
}

/// Dense per-row counts, reset through the list of touched rows so one
/// instance serves many trials.
#[derive(Debug, Clone)]
struct Oracle {
    count: Vec<u64>,
    peak: Vec<u64>,
    dirty: Vec<u32>,
    is_dirty: Vec<bool>,
    touched: Vec<u32>,
    is_touched: Vec<bool>,
    flips: BTreeSet<RowAddress>,
}

#[derive(Debug, Clone, Default)]
struct OracleSnapshot {
    rows: Vec<(u32, u64, u64, bool)>,
    flips: BTreeSet<RowAddress>,
}

impl Oracle {
    fn new(rows: usize) -> Self {
        Self {
            count: vec![0; rows],
            peak: vec![0; rows],
            dirty: Vec::new(),
            is_dirty: vec![false; rows],
            touched: Vec::new(),
            is_touched: vec![false; rows],
            flips: BTreeSet::new(),
        }
    }

    #[inline]
    fn activate(&mut self, row: RowAddress) {
        let i = row.index();
        self.count[i] += 1;
        if !self.is_dirty[i] {
            self.is_dirty[i] = true;
            self.dirty.push(row.0);
            if !self.is_touched[i] {
                self.is_touched[i] = true;
                self.touched.push(row.0);
            }
        }
    }

    #[inline]
    fn mitigate(&mut self, row: RowAddress) {
        if let Some(c) = self.count.get_mut(row.index()) {
            *c = 0;
        }
    }

    fn commit(&mut self, rh_th: u64) {
        for &r in &self.dirty {
            let i = r as usize;
            self.is_dirty[i] = false;
            let c = self.count[i];
            if c > self.peak[i] {
                self.peak[i] = c;
            }
            if c >= rh_th {
                self.flips.insert(RowAddress(r));
            }
        }
        self.dirty.clear();
    }

    fn clear(&mut self) {
        for &r in &self.touched {
            let i = r as usize;
            self.count[i] = 0;
            self.peak[i] = 0;
            self.is_dirty[i] = false;
            self.is_touched[i] = false;
        }
        self.touched.clear();
        self.dirty.clear();
        self.flips.clear();
    }

    fn snapshot(&self) -> OracleSnapshot {
        OracleSnapshot {
            rows: self
                .touched
                .iter()
                .map(|&r| {
                    let i = r as usize;
                    (r, self.count[i], self.peak[i], self.is_dirty[i])
                })
                .collect(),
            flips: self.flips.clone(),
        }
    }

    fn restore(&mut self, snap: &OracleSnapshot) {
        self.clear();
        for &(r, count, peak, dirty) in &snap.rows {
            let i = r as usize;
            self.count[i] = count;
            self.peak[i] = peak;
            self.is_touched[i] = true;
            self.touched.push(r);
            if dirty {
                self.is_dirty[i] = true;
                self.dirty.push(r);
            }
        }
        self.flips.clone_from(&snap.flips);
    }

    fn max_unmitigated(&self) -> BTreeMap<RowAddress, u64> {
        self.touched
            .iter()
            .map(|&r| (RowAddress(r), self.peak[r as usize]))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Progress {
    pos: usize,
    next_ref: usize,
    refs: u64,
    total_mitigations: u64,
    immediate_mitigations: u64,
    on_target: u64,
}

#[derive(Default)]
struct Recorder {
    log: Vec<Mitigation>,
    trace: Option<Vec<RefPoint>>,
}

enum Flow {
    Finished,
    Paused,
    Decided(bool),
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Stop {
    Never,
    Before(usize),
    Decided,
}

/// Prepared replay of one stream under one tracker configuration. Trials
/// share the deterministic prefix that precedes the tracker's first random
/// draw: it is simulated once and every trial resumes from a snapshot with
/// its own seed.
pub struct Runner<'a> {
    stream: &'a ActivationStream,
    config: SimConfig,
    proto: Box<dyn Tracker>,
    /// Target activations in events `i..`, when a target is set.
    target_suffix: Option<Vec<u32>>,
    prefix: (Box<dyn Tracker>, OracleSnapshot, Progress),
}

impl<'a> Runner<'a> {
    pub fn new(
        stream: &'a ActivationStream,
        proto: &dyn Tracker,
        config: SimConfig,
    ) -> Result<Self, SimError> {
        if config.rh_th == 0 {
            return Err(SimError::ZeroThreshold);
        }
        stream.validate(&config.timing)?;
        stream.validate_rows(&config.geometry)?;
        let target_suffix = config.target.map(|t| {
            let mut suffix = vec![0u32; stream.len() + 1];
            for (i, &r) in stream.rows().iter().enumerate().rev() {
                suffix[i] = suffix[i + 1] + u32::from(r == t);
            }
            suffix
        });
        let mut runner = Self {
            stream,
            config,
            proto: proto.clone_box(),
            target_suffix,
            prefix: (proto.clone_box(), OracleSnapshot::default(), Progress::default()),
        };
        runner.prefix = runner.shared_prefix()?;
        Ok(runner)
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    fn new_oracle(&self) -> Oracle {
        Oracle::new(self.config.geometry.rows_per_bank() as usize)
    }

    /// Finds the last loop position before the first random draw and
    /// replays up to it.
    fn shared_prefix(&self) -> Result<(Box<dyn Tracker>, OracleSnapshot, Progress), SimError> {
        let mut probe = self.proto.clone_box();
        let mut oracle = self.new_oracle();
        let mut prog = Progress::default();
        let mut last_quiet = 0;
        self.drive(
            probe.as_mut(),
            &mut oracle,
            &mut prog,
            Stop::Never,
            None,
            &mut |pos, t| {
                if t.rng_draws() == 0 {
                    last_quiet = pos;
                }
            },
        )?;
        let mut tracker = self.proto.clone_box();
        oracle.clear();
        let mut prog = Progress::default();
        self.drive(
            tracker.as_mut(),
            &mut oracle,
            &mut prog,
            Stop::Before(last_quiet),
            None,
            &mut |_, _| {},
        )?;
        Ok((tracker, oracle.snapshot(), prog))
    }

    #[allow(clippy::too_many_arguments)]
    fn drive(
        &self,
        tracker: &mut dyn Tracker,
        oracle: &mut Oracle,
        prog: &mut Progress,
        stop: Stop,
        mut rec: Option<&mut Recorder>,
        at_top: &mut dyn FnMut(usize, &dyn Tracker),
    ) -> Result<Flow, SimError> {
        let rows = self.stream.rows();
        let ends = self.stream.ref_ends();
        let budget = self.config.mitigations_per_ref;
        let target = self.config.target;
        let rh_th = self.config.rh_th;
        let per_window = self.config.timing.refs_per_window;
        loop {
            at_top(prog.pos, tracker);
            if stop == Stop::Before(prog.pos) {
                return Ok(Flow::Paused);
            }
            while prog.next_ref < ends.len() && ends[prog.next_ref] == prog.pos {
                prog.next_ref += 1;
                let picked = tracker.on_ref(budget);
                if picked.len() > budget {
                    return Err(SimError::BudgetExceeded {
                        tracker: tracker.name(),
                        returned: picked.len(),
                        budget,
                    });
                }
                for &row in &picked {
                    oracle.mitigate(row);
                    prog.total_mitigations += 1;
                    if Some(row) == target {
                        prog.on_target += 1;
                    }
                    if let Some(rec) = rec.as_deref_mut() {
                        rec.log.push(Mitigation {
                            after_event: prog.pos,
                            row,
                            at_ref: true,
                        });
                    }
                }
                oracle.commit(rh_th);
                prog.refs += 1;
                if self.config.table_reset == TableReset::PerWindow
                    && per_window > 0
                    && prog.refs % per_window == 0
                {
                    tracker.reset();
                }
                if let Some(trace) = rec.as_deref_mut().and_then(|r| r.trace.as_mut()) {
                    let t = target.unwrap_or_default();
                    trace.push(RefPoint {
                        ref_index: prog.refs - 1,
                        after_event: prog.pos,
                        target_count: oracle.count.get(t.index()).copied().unwrap_or(0),
                        target_estimate: tracker.estimate(t),
                    });
                }
                if stop == Stop::Decided {
                    if let Some(decided) = self.decided(oracle, prog.pos) {
                        return Ok(Flow::Decided(decided));
                    }
                }
            }
            if prog.pos == rows.len() {
                break;
            }
            let row = rows[prog.pos];
            oracle.activate(row);
            tracker.on_activation(row);
            if let Some(m) = tracker.take_immediate() {
                oracle.mitigate(m);
                prog.immediate_mitigations += 1;
                if Some(m) == target {
                    prog.on_target += 1;
                }
                if let Some(rec) = rec.as_deref_mut() {
                    rec.log.push(Mitigation {
                        after_event: prog.pos + 1,
                        row: m,
                        at_ref: false,
                    });
                }
            }
            prog.pos += 1;
        }
        oracle.commit(rh_th);
        Ok(Flow::Finished)
    }

    /// Trial outcome, once it can no longer change.
    fn decided(&self, oracle: &Oracle, pos: usize) -> Option<bool> {
        match (self.config.target, &self.target_suffix) {
            (Some(t), Some(suffix)) => {
                if oracle.flips.contains(&t) {
                    Some(true)
                } else if oracle.count[t.index()] + u64::from(suffix[pos]) < self.config.rh_th {
                    Some(false)
                } else {
                    None
                }
            }
            _ => (!oracle.flips.is_empty()).then_some(true),
        }
    }

    fn succeeded(&self, oracle: &Oracle) -> bool {
        match self.config.target {
            Some(t) => oracle.flips.contains(&t),
            None => !oracle.flips.is_empty(),
        }
    }

    /// Full run from scratch with the prototype reseeded by `seed`.
    pub fn report(&self, seed: u64) -> Result<SimReport, SimError> {
        let mut tracker = self.proto.clone_box();
        tracker.reseed(seed);
        self.report_with(tracker.as_mut())
    }

    fn report_with(&self, tracker: &mut dyn Tracker) -> Result<SimReport, SimError> {
        let mut oracle = self.new_oracle();
        let mut prog = Progress::default();
        let mut rec = Recorder {
            log: Vec::new(),
            trace: self.config.trace.then(Vec::new),
        };
        self.drive(
            tracker,
            &mut oracle,
            &mut prog,
            Stop::Never,
            Some(&mut rec),
            &mut |_, _| {},
        )?;
        Ok(SimReport {
            max_unmitigated: oracle.max_unmitigated(),
            bitflip_rows: oracle.flips.clone(),
            total_mitigations: prog.total_mitigations,
            immediate_mitigations: prog.immediate_mitigations,
            mitigations_on_target: prog.on_target,
            refs: prog.refs,
            mitigation_log: rec.log,
            per_ref_trace: rec.trace,
        })
    }

    fn trial_with(&self, seed: u64, oracle: &mut Oracle) -> bool {
        let (proto, snap, prog) = &self.prefix;
        let mut tracker = proto.clone_box();
        tracker.reseed(seed);
        oracle.restore(snap);
        let mut prog = *prog;
        match self.drive(
            tracker.as_mut(),
            oracle,
            &mut prog,
            Stop::Decided,
            None,
            &mut |_, _| {},
        ) {
            Ok(Flow::Decided(d)) => d,
            Ok(_) => self.succeeded(oracle),
            // Validated at construction; the only other failure is a
            // budget violation, which a fresh report surfaces.
            Err(_) => false,
        }
    }

    pub fn trial_seed(&self, trial: u64) -> u64 {
        derive_seed(self.config.seed, &[trial])
    }

    /// One Monte Carlo trial, resumed from the shared prefix.
    pub fn trial(&self, trial: u64) -> bool {
        let mut oracle = self.new_oracle();
        self.trial_with(self.trial_seed(trial), &mut oracle)
    }

    /// The same trial replayed from the start without prefix sharing.
    pub fn trial_unshared(&self, trial: u64) -> Result<bool, SimError> {
        let mut tracker = self.proto.clone_box();
        tracker.reseed(self.trial_seed(trial));
        let mut oracle = self.new_oracle();
        let mut prog = Progress::default();
        self.drive(
            tracker.as_mut(),
            &mut oracle,
            &mut prog,
            Stop::Never,
            None,
            &mut |_, _| {},
        )?;
        Ok(self.succeeded(&oracle))
    }

    /// Fraction of `trials` in which the attack succeeds.
    pub fn success_probability(&self, trials: u64) -> SuccessEstimate {
        let successes = (0..trials)
            .into_par_iter()
            .map_init(
                || self.new_oracle(),
                |oracle, t| u64::from(self.trial_with(self.trial_seed(t), oracle)),
            )
            .sum();
        SuccessEstimate { trials, successes }
    }

    /// Fraction of trials in which at least one of `windows` consecutive
    /// refresh windows succeeds. Each window restarts from a cleared
    /// tracker with its own seed.
    pub fn persistent_success_probability(&self, windows: u64, trials: u64) -> SuccessEstimate {
        let successes = (0..trials)
            .into_par_iter()
            .map_init(
                || self.new_oracle(),
                |oracle, t| {
                    let hit = (0..windows).any(|w| {
                        self.trial_with(derive_seed(self.config.seed, &[t, w]), oracle)
                    });
                    u64::from(hit)
                },
            )
            .sum();
        SuccessEstimate { trials, successes }
    }
}

/// Drives `tracker` over `stream` in place.
pub fn run(
    stream: &ActivationStream,
    tracker: &mut dyn Tracker,
    config: &SimConfig,
) -> Result<SimReport, SimError> {
    let runner = Runner::new(stream, tracker, *config)?;
    runner.report_with(tracker)
}

/// Monte Carlo success probability of the attack encoded in `stream`.
pub fn attack_success_probability(
    stream: &ActivationStream,
    proto: &dyn Tracker,
    config: &SimConfig,
    trials: u64,
) -> Result<SuccessEstimate, SimError> {
    Ok(Runner::new(stream, proto, *config)?.success_probability(trials))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuccessEstimate {
    pub trials: u64,
    pub successes: u64,
}

impl SuccessEstimate {
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }

    pub fn wilson(&self) -> (f64, f64) {
        wilson_interval(self.successes, self.trials, Z95)
    }

    pub fn contains(&self, p: f64) -> bool {
        let (lo, hi) = self.wilson();
        lo <= p && p <= hi
    }
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}
