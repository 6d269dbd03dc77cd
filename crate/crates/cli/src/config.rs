//! Experiment files: `[experiment]`, `[timing]` and labelled
//! `[tracker.*]`, `[attack.*]`, `[area.*]`, `[sampler.*]` sections.

use hammerlab::adversary::AttackSpec;
use hammerlab::analysis::{Algorithm, Storage, Technology};
use hammerlab::Sampler;
use hammerlab::ini::{ConfigError, Document, Section};
use hammerlab::sim::{TableReset, ThresholdRule};
use hammerlab::trackers::TrackerSpec;
use hammerlab::{BankGeometry, TimingParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Area,
    Failprob,
    Attack,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AreaSpec {
    pub label: String,
    pub line: usize,
    pub algorithms: Vec<Algorithm>,
    pub storages: Vec<Storage>,
    pub technologies: Vec<Technology>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerSpec {
    pub label: String,
    pub sampler: Sampler,
}

/// Sweep axes and run settings from `[experiment]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub seed: Option<u64>,
    pub trials: u64,
    /// Consecutive refresh windows per trial; above 1 a trial succeeds if
    /// any window does.
    pub windows: u64,
    pub rh_th: Vec<u64>,
    pub acts_per_trefi: Vec<u64>,
    pub target_acts: Vec<u64>,
    pub k: Vec<u64>,
    pub mitigations_per_ref: usize,
    pub table_reset: TableReset,
    pub rule: ThresholdRule,
    pub delta: f64,
    /// failprob runs Monte Carlo only up to this rh_th.
    pub mc_max_rh_th: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub timing: TimingParams,
    pub geometry: BankGeometry,
    pub trackers: Vec<TrackerSpec>,
    pub attacks: Vec<AttackSpec>,
    pub areas: Vec<AreaSpec>,
    pub samplers: Vec<SamplerSpec>,
}

const EXPERIMENT_KEYS: &[&str] = &[
    "seed",
    "trials",
    "windows",
    "rh_th",
    "acts_per_trefi",
    "target_acts",
    "k",
    "mitigations_per_ref",
    "table_reset",
    "threshold_rule",
    "delta",
    "mc_max_rh_th",
];

const TIMING_KEYS: &[&str] = &["t_rc", "t_refi", "t_refw", "t_rfc", "refs_per_window", "rows_per_bank"];

fn parse_named<T>(
    section: &Section,
    key: &str,
    parse: impl Fn(&str) -> Option<T>,
    choices: &str,
) -> Result<Option<Vec<T>>, ConfigError> {
    let Some(entry) = section.get(key) else {
        return Ok(None);
    };
    entry
        .value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            parse(s).ok_or_else(|| section.field_error(key, format!("unknown value {s:?} ({choices})")))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

fn parse_timing(section: Option<&Section>) -> Result<(TimingParams, BankGeometry), ConfigError> {
    let d = TimingParams::default();
    let Some(s) = section else {
        return Ok((d, BankGeometry::default()));
    };
    s.check_keys(TIMING_KEYS)?;
    let timing = TimingParams::new(
        s.parse("t_rc")?.unwrap_or(d.t_rc),
        s.parse("t_refi")?.unwrap_or(d.t_refi),
        s.parse("t_refw")?.unwrap_or(d.t_refw),
        s.parse("t_rfc")?.unwrap_or(d.t_rfc),
        s.parse("refs_per_window")?.unwrap_or(d.refs_per_window),
    )
    .map_err(|e| ConfigError::new(e.to_string()).at_line(s.line).in_section(&s.name))?;
    let geometry = match s.parse::<u32>("rows_per_bank")? {
        None => BankGeometry::default(),
        Some(rows) => BankGeometry::new(rows).map_err(|e| s.field_error("rows_per_bank", e.to_string()))?,
    };
    Ok((timing, geometry))
}

fn parse_experiment(
    section: Option<&Section>,
    timing: &TimingParams,
) -> Result<Experiment, ConfigError> {
    let empty = Section {
        name: "experiment".into(),
        line: 0,
        entries: Vec::new(),
    };
    let s = section.unwrap_or(&empty);
    s.check_keys(EXPERIMENT_KEYS)?;
    let positive = |key: &str, values: &[u64]| -> Result<(), ConfigError> {
        match values.iter().any(|&v| v == 0) {
            true => Err(s.field_error(key, "values must be at least 1")),
            false => Ok(()),
        }
    };
    let rh_th = s.parse_list("rh_th")?.unwrap_or_default();
    positive("rh_th", &rh_th)?;
    let acts_per_trefi = s
        .parse_list("acts_per_trefi")?
        .unwrap_or_else(|| vec![timing.max_acts_per_trefi()]);
    positive("acts_per_trefi", &acts_per_trefi)?;
    let max = timing.max_acts_per_trefi();
    if acts_per_trefi.iter().any(|&n| n > max) {
        return Err(s.field_error("acts_per_trefi", format!("values must not exceed {max}")));
    }
    let target_acts = s.parse_list("target_acts")?.unwrap_or_else(|| vec![1]);
    positive("target_acts", &target_acts)?;
    let k = s.parse_list("k")?.unwrap_or_else(|| vec![1]);
    positive("k", &k)?;
    let table_reset = match s.get("table_reset").map(|e| e.value.as_str()) {
        None | Some("none") => TableReset::None,
        Some("per_window") => TableReset::PerWindow,
        Some(other) => {
            return Err(s.field_error("table_reset", format!("unknown value {other:?} (none, per_window)")))
        }
    };
    let rule = match s.get("threshold_rule") {
        None => ThresholdRule::Quarter,
        Some(e) => ThresholdRule::parse(&e.value).ok_or_else(|| {
            s.field_error("threshold_rule", format!("unknown rule {:?} (quarter, half)", e.value))
        })?,
    };
    let delta: f64 = s.parse("delta")?.unwrap_or(0.01);
    if !(delta > 0.0 && delta < 1.0) {
        return Err(s.field_error("delta", "must lie in (0, 1)"));
    }
    let trials = s.parse("trials")?.unwrap_or(1);
    if trials == 0 {
        return Err(s.field_error("trials", "must be at least 1"));
    }
    let windows = s.parse("windows")?.unwrap_or(1);
    if windows == 0 {
        return Err(s.field_error("windows", "must be at least 1"));
    }
    let mitigations_per_ref = s.parse("mitigations_per_ref")?.unwrap_or(1);
    if mitigations_per_ref == 0 {
        return Err(s.field_error("mitigations_per_ref", "must be at least 1"));
    }
    Ok(Experiment {
        seed: s.parse("seed")?,
        trials,
        windows,
        rh_th,
        acts_per_trefi,
        target_acts,
        k,
        mitigations_per_ref,
        table_reset,
        rule,
        delta,
        mc_max_rh_th: s.parse("mc_max_rh_th")?.unwrap_or(256),
    })
}

fn parse_area(label: &str, s: &Section) -> Result<AreaSpec, ConfigError> {
    s.check_keys(&["algorithm", "storage", "technology"])?;
    let algorithms = parse_named(
        s,
        "algorithm",
        Algorithm::parse,
        "space_saving, misra_gries, lossy_counting, sticky_sampling, count_min[-W-D], count_sketch, wavelet_synopsis, prac",
    )?
    .ok_or_else(|| s.field_error("algorithm", "required key missing"))?;
    let storages = parse_named(s, "storage", Storage::parse, "sram, cam, dram")?
        .unwrap_or_else(|| vec![Storage::Sram]);
    let technologies = parse_named(s, "technology", Technology::parse, "logic, memory")?
        .unwrap_or_else(|| vec![Technology::Logic]);
    Ok(AreaSpec {
        label: label.to_string(),
        line: s.line,
        algorithms,
        storages,
        technologies,
    })
}

fn parse_sampler(label: &str, s: &Section) -> Result<SamplerSpec, ConfigError> {
    let kind: String = s.require("kind")?;
    let sampler = match kind.as_str() {
        "mint" => Sampler::Mint,
        "reservoir" => Sampler::Reservoir,
        "para" => {
            let p: f64 = s.require("p")?;
            if !(0.0..=1.0).contains(&p) {
                return Err(s.field_error("p", "must lie in [0, 1]"));
            }
            Sampler::Para { p }
        }
        other => {
            return Err(s.field_error("kind", format!("unknown sampler {other:?} (mint, reservoir, para)")))
        }
    };
    let allowed: &[&str] = match sampler {
        Sampler::Para { .. } => &["kind", "p"],
        _ => &["kind"],
    };
    s.check_keys(allowed)?;
    Ok(SamplerSpec {
        label: label.to_string(),
        sampler,
    })
}

fn missing(what: &str) -> ConfigError {
    ConfigError::new(format!("no [{what}.*] section"))
}

impl ExperimentConfig {
    pub fn parse(text: &str, command: Command) -> Result<Self, ConfigError> {
        let doc: Document = text.parse()?;
        for s in &doc.sections {
            let known = matches!(s.name.as_str(), "experiment" | "timing")
                || ["tracker", "attack", "area", "sampler"].iter().any(|p| {
                    s.name
                        .strip_prefix(p)
                        .and_then(|r| r.strip_prefix('.'))
                        .is_some_and(|l| !l.is_empty())
                });
            if !known {
                return Err(ConfigError::new("unknown section").at_line(s.line).in_section(&s.name));
            }
        }
        let (timing, geometry) = parse_timing(doc.section("timing"))?;
        let experiment = parse_experiment(doc.section("experiment"), &timing)?;
        let trackers = doc
            .labelled("tracker")
            .map(|(l, s)| TrackerSpec::from_section(l, s))
            .collect::<Result<Vec<_>, _>>()?;
        let attacks = doc
            .labelled("attack")
            .map(|(l, s)| AttackSpec::from_section(l, s))
            .collect::<Result<Vec<_>, _>>()?;
        let areas = doc
            .labelled("area")
            .map(|(l, s)| parse_area(l, s))
            .collect::<Result<Vec<_>, _>>()?;
        let samplers = doc
            .labelled("sampler")
            .map(|(l, s)| parse_sampler(l, s))
            .collect::<Result<Vec<_>, _>>()?;
        let needs_rh = || match doc.section("experiment").and_then(|s| s.get("rh_th")) {
            Some(_) => Ok(()),
            None => Err(ConfigError::new("required key missing")
                .in_section("experiment")
                .field("rh_th")),
        };
        match command {
            Command::Simulate => {
                needs_rh()?;
                if trackers.is_empty() {
                    return Err(missing("tracker"));
                }
                if attacks.is_empty() {
                    return Err(missing("attack"));
                }
            }
            Command::Area => needs_rh()?,
            Command::Failprob => {
                needs_rh()?;
                if samplers.is_empty() {
                    return Err(missing("sampler"));
                }
            }
            Command::Attack => {
                if attacks.is_empty() {
                    return Err(missing("attack"));
                }
            }
        }
        Ok(Self {
            experiment,
            timing,
            geometry,
            trackers,
            attacks,
            areas,
            samplers,
        })
    }
}
