use rayon::prelude::*;

use hammerlab::adversary::{gen_single_target, AttackContext, Placement};
use hammerlab::analysis::{
    sampler_failure_analytic, Algorithm, AnalysisError, AreaModel, Storage, Technology,
    DEFAULT_SWEEP,
};
use hammerlab::ini::ConfigError;
use hammerlab::output::{area_record, sci6, sig6, SimRow};
use hammerlab::rng::derive_seed;
use hammerlab::sim::{run, Runner, SimConfig};
use hammerlab::trackers::{MintTracker, ParaTracker, ReservoirMode, ReservoirTracker, Tracker};
use hammerlab::{ActivationStream, RowAddress, Sampler};

use crate::config::ExperimentConfig;

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Runtime(_) => 1,
            Self::Config(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(e) => write!(f, "config error: {e}"),
            Self::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::Config(e)
    }
}

fn section_error(prefix: &str, label: &str, e: impl ToString) -> CliError {
    CliError::Config(ConfigError::new(e.to_string()).in_section(&format!("{prefix}.{label}")))
}

/// CSV records plus warnings, both in sweep order.
#[derive(Debug, Default)]
pub struct Output {
    pub records: Vec<Vec<String>>,
    pub warnings: Vec<String>,
}

/// Settings resolved from flags, config and environment.
#[derive(Debug, Clone, Copy)]
pub struct RunSettings {
    pub seed: u64,
    pub trials: u64,
}

struct SimPoint {
    tracker: usize,
    attack: usize,
    rh_th: u64,
    rate: Option<u64>,
    target_acts: Option<u64>,
}

fn sim_points(cfg: &ExperimentConfig) -> (Vec<SimPoint>, Vec<String>) {
    let e = &cfg.experiment;
    let mut points = Vec::new();
    let mut warnings = Vec::new();
    for tracker in 0..cfg.trackers.len() {
        for (attack, spec) in cfg.attacks.iter().enumerate() {
            let rates: Vec<Option<u64>> = match spec.uses_rate() {
                true => e.acts_per_trefi.iter().copied().map(Some).collect(),
                false => vec![None],
            };
            let acts: Vec<Option<u64>> = match spec.uses_target_acts() {
                true => e.target_acts.iter().copied().map(Some).collect(),
                false => vec![None],
            };
            for &rh_th in &e.rh_th {
                for &rate in &rates {
                    for &a in &acts {
                        if let (Some(a), Some(n)) = (a, rate) {
                            if a > n {
                                warnings.push(format!(
                                    "[attack.{}] skipped target_acts {a} > acts_per_trefi {n}",
                                    spec.label
                                ));
                                continue;
                            }
                        }
                        points.push(SimPoint {
                            tracker,
                            attack,
                            rh_th,
                            rate,
                            target_acts: a,
                        });
                    }
                }
            }
        }
    }
    (points, warnings)
}

fn simulate_point(
    cfg: &ExperimentConfig,
    settings: RunSettings,
    p: &SimPoint,
) -> Result<SimRow, CliError> {
    let e = &cfg.experiment;
    let (tspec, aspec) = (&cfg.trackers[p.tracker], &cfg.attacks[p.attack]);
    let seed = derive_seed(
        settings.seed,
        &[
            p.tracker as u64,
            p.attack as u64,
            p.rh_th,
            p.rate.unwrap_or(0),
            p.target_acts.unwrap_or(0),
        ],
    );
    let actx = AttackContext {
        timing: cfg.timing,
        geometry: cfg.geometry,
        rh_th: p.rh_th,
        acts_per_trefi: p.rate,
        target_acts: p.target_acts,
    };
    let stream = aspec
        .generate(&actx, seed)
        .map_err(|err| section_error("attack", &aspec.label, err))?;
    let sim = SimConfig {
        timing: cfg.timing,
        geometry: cfg.geometry,
        rh_th: p.rh_th,
        mitigations_per_ref: e.mitigations_per_ref,
        table_reset: e.table_reset,
        rule: e.rule,
        seed,
        target: Some(aspec.target),
        trace: false,
    };
    let mut tracker = tspec
        .build(&sim.build_context(), seed)
        .map_err(|err| section_error("tracker", &tspec.label, err))?;
    let runtime = |err: hammerlab::sim::SimError| {
        CliError::Runtime(format!("{} vs {}: {err}", tspec.label, aspec.label))
    };
    let runner = Runner::new(&stream, tracker.as_ref(), sim).map_err(runtime)?;
    let estimate = match e.windows {
        1 => runner.success_probability(settings.trials),
        w => runner.persistent_success_probability(w, settings.trials),
    };
    let report = run(&stream, tracker.as_mut(), &sim).map_err(runtime)?;
    let (ci_low, ci_high) = estimate.wilson();
    Ok(SimRow {
        run_id: 0,
        tracker: tspec.label.clone(),
        attack: aspec.label.clone(),
        rh_th: p.rh_th,
        acts_per_trefi: p.rate.unwrap_or_else(|| cfg.timing.max_acts_per_trefi()),
        target_acts: p.target_acts.unwrap_or(0),
        success_rate: estimate.rate(),
        ci_low,
        ci_high,
        total_mitigations: report.total_mitigations + report.immediate_mitigations,
        max_unmitigated: report.peak_of(aspec.target),
        mitigations_on_target: report.mitigations_on_target,
    })
}

pub fn simulate(cfg: &ExperimentConfig, settings: RunSettings) -> Result<Output, CliError> {
    let (points, warnings) = sim_points(cfg);
    let rows = points
        .par_iter()
        .map(|p| simulate_point(cfg, settings, p))
        .collect::<Result<Vec<_>, _>>()?;
    let records = rows
        .into_iter()
        .enumerate()
        .map(|(run_id, row)| SimRow { run_id, ..row }.record())
        .collect();
    Ok(Output { records, warnings })
}

fn default_area_combos() -> Vec<(Algorithm, Storage, Technology)> {
    let mut combos = Vec::new();
    for alg in DEFAULT_SWEEP {
        if alg == Algorithm::Prac {
            combos.push((alg, Storage::Dram, Technology::Memory));
            continue;
        }
        for storage in [Storage::Sram, Storage::Cam] {
            for tech in [Technology::Logic, Technology::Memory] {
                combos.push((alg, storage, tech));
            }
        }
    }
    combos
}

pub fn area(cfg: &ExperimentConfig) -> Result<Output, CliError> {
    let model = AreaModel {
        timing: cfg.timing,
        geometry: cfg.geometry,
        constants: Default::default(),
        delta: cfg.experiment.delta,
    };
    let combos: Vec<(Option<&str>, Algorithm, Storage, Technology)> = match cfg.areas.is_empty() {
        true => default_area_combos()
            .into_iter()
            .map(|(a, s, t)| (None, a, s, t))
            .collect(),
        false => cfg
            .areas
            .iter()
            .flat_map(|spec| {
                spec.algorithms.iter().flat_map(move |&a| {
                    spec.storages.iter().flat_map(move |&s| {
                        spec.technologies
                            .iter()
                            .map(move |&t| (Some(spec.label.as_str()), a, s, t))
                    })
                })
            })
            .collect(),
    };
    let mut out = Output::default();
    for (label, alg, storage, tech) in combos {
        let origin = label.map(|l| format!("[area.{l}] ")).unwrap_or_default();
        for &rh in &cfg.experiment.rh_th {
            match model.area_estimate(alg, rh, storage, tech) {
                Ok(c) => out.records.push(area_record(&c)),
                Err(err @ AnalysisError::Unsupported { .. }) => {
                    out.warnings.push(format!("{origin}skipped: {err}"));
                    break;
                }
                Err(err) => out.warnings.push(format!("{origin}skipped {alg}: {err}")),
            }
        }
    }
    Ok(out)
}

fn sampler_tracker(sampler: Sampler, k: u64, max_slots: u64, seed: u64) -> Box<dyn Tracker> {
    let built: Result<Box<dyn Tracker>, _> = match sampler {
        Sampler::Mint => MintTracker::new(k as usize, max_slots as usize, seed).map(|t| Box::new(t) as _),
        Sampler::Reservoir => {
            ReservoirTracker::new(k as usize, ReservoirMode::PerRef, seed).map(|t| Box::new(t) as _)
        }
        Sampler::Para { p } => ParaTracker::new(p, seed).map(|t| Box::new(t) as _),
    };
    built.expect("sampler parameters validated at parse time")
}

struct FailPoint {
    sampler: usize,
    rh_th: u64,
    n: u64,
    a: u64,
    k: u64,
}

pub fn failprob(cfg: &ExperimentConfig, settings: RunSettings) -> Result<Output, CliError> {
    let e = &cfg.experiment;
    let max_slots = cfg.timing.max_acts_per_trefi();
    let mut out = Output::default();
    let mut points = Vec::new();
    for (sampler, spec) in cfg.samplers.iter().enumerate() {
        for &rh_th in &e.rh_th {
            for &n in &e.acts_per_trefi {
                for &a in &e.target_acts {
                    if a > n {
                        out.warnings.push(format!(
                            "[sampler.{}] skipped target_acts {a} > acts_per_trefi {n}",
                            spec.label
                        ));
                        continue;
                    }
                    for &k in &e.k {
                        points.push(FailPoint {
                            sampler,
                            rh_th,
                            n,
                            a,
                            k,
                        });
                    }
                }
            }
        }
    }
    let target = RowAddress(0);
    out.records = points
        .par_iter()
        .map(|p| {
            let spec = &cfg.samplers[p.sampler];
            let analytic = sampler_failure_analytic(spec.sampler, p.a, p.n, p.k, p.rh_th, max_slots)
                .map_err(|err| section_error("sampler", &spec.label, err))?;
            let mut mc = [String::new(), String::new(), String::new()];
            let mut trials = 0;
            if p.rh_th <= e.mc_max_rh_th {
                let seed = derive_seed(settings.seed, &[p.sampler as u64, p.rh_th, p.n, p.a, p.k]);
                let stream: ActivationStream = gen_single_target(
                    p.a,
                    p.n,
                    p.rh_th,
                    Placement::Head,
                    target,
                    &cfg.geometry,
                    &cfg.timing,
                )
                .map_err(|err| section_error("sampler", &spec.label, err))?;
                let sim = SimConfig {
                    geometry: cfg.geometry,
                    mitigations_per_ref: p.k as usize,
                    seed,
                    target: Some(target),
                    ..SimConfig::new(cfg.timing, p.rh_th)
                };
                let proto = sampler_tracker(spec.sampler, p.k, max_slots, seed);
                let estimate = Runner::new(&stream, proto.as_ref(), sim)
                    .map_err(|err| CliError::Runtime(format!("{}: {err}", spec.label)))?
                    .success_probability(settings.trials);
                let (lo, hi) = estimate.wilson();
                mc = [sig6(estimate.rate()), sig6(lo), sig6(hi)];
                trials = settings.trials;
            }
            let [monte_carlo, ci_low, ci_high] = mc;
            Ok(vec![
                spec.label.clone(),
                p.rh_th.to_string(),
                p.n.to_string(),
                p.a.to_string(),
                p.k.to_string(),
                sig6(analytic),
                sci6(analytic),
                monte_carlo,
                ci_low,
                ci_high,
                trials.to_string(),
            ])
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(out)
}

/// Stream text for one attack at the first sweep point.
pub fn attack(cfg: &ExperimentConfig, settings: RunSettings, label: Option<&str>) -> Result<String, CliError> {
    let spec = match label {
        None => &cfg.attacks[0],
        Some(l) => cfg
            .attacks
            .iter()
            .find(|a| a.label == l)
            .ok_or_else(|| CliError::Config(ConfigError::new(format!("no [attack.{l}] section"))))?,
    };
    let e = &cfg.experiment;
    let actx = AttackContext {
        timing: cfg.timing,
        geometry: cfg.geometry,
        rh_th: e.rh_th.first().copied().unwrap_or(0),
        acts_per_trefi: e.acts_per_trefi.first().copied(),
        target_acts: e.target_acts.first().copied(),
    };
    let seed = derive_seed(settings.seed, &[0]);
    let stream = spec
        .generate(&actx, seed)
        .map_err(|err| section_error("attack", &spec.label, err))?;
    Ok(stream.to_text())
}
