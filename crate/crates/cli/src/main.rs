mod commands;
mod config;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CliError, Output, RunSettings};
use config::{Command, ExperimentConfig};
use hammerlab::ini::ConfigError;
use hammerlab::output::{write_csv, AREA_HEADER, FAILPROB_HEADER, SIM_HEADER};

const SEED_ENV: &str = "HAMMERLAB_SEED";

#[derive(Parser)]
#[command(name = "hammerlab", version, about = "RowHammer tracker experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// Experiment file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed. Falls back to the config, then HAMMERLAB_SEED, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo trials, overriding the config.
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Sub {
    /// Trackers against attacks: success rate, mitigations, peak counts.
    Simulate,
    /// Per-bank storage and area over an rh_th sweep.
    Area,
    /// Sampler failure probability, analytic and Monte Carlo.
    Failprob,
    /// Emit an attack's activation stream as text.
    Attack {
        /// Attack section label; the first one when absent.
        #[arg(long)]
        name: Option<String>,
    },
}

fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64, CliError> {
    if let Some(seed) = flag.or(config) {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            CliError::Config(ConfigError::new(format!("{SEED_ENV}={v:?} is not a u64 seed")))
        }),
        Err(_) => Ok(0),
    }
}

fn execute(cli: &Cli) -> Result<(Vec<u8>, Vec<String>), CliError> {
    let command = match cli.command {
        Sub::Simulate => Command::Simulate,
        Sub::Area => Command::Area,
        Sub::Failprob => Command::Failprob,
        Sub::Attack { .. } => Command::Attack,
    };
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config(ConfigError::new("--config <path> is required")))?;
    let text = fs::read_to_string(path).map_err(|e| {
        CliError::Config(ConfigError::new(format!("cannot read {}: {e}", path.display())))
    })?;
    let cfg = ExperimentConfig::parse(&text, command)?;
    if cli.trials == Some(0) {
        return Err(CliError::Config(ConfigError::new("--trials must be at least 1")));
    }
    let settings = RunSettings {
        seed: resolve_seed(cli.seed, cfg.experiment.seed)?,
        trials: cli.trials.unwrap_or(cfg.experiment.trials),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let csv = |header: &[&str], out: Output| -> Result<(Vec<u8>, Vec<String>), CliError> {
        let mut buf = Vec::new();
        write_csv(&mut buf, header, out.records).map_err(|e| CliError::Runtime(e.to_string()))?;
        Ok((buf, out.warnings))
    };
    pool.install(|| match &cli.command {
        Sub::Simulate => csv(&SIM_HEADER, commands::simulate(&cfg, settings)?),
        Sub::Area => csv(&AREA_HEADER, commands::area(&cfg)?),
        Sub::Failprob => csv(&FAILPROB_HEADER, commands::failprob(&cfg, settings)?),
        Sub::Attack { name } => Ok((
            commands::attack(&cfg, settings, name.as_deref())?.into_bytes(),
            Vec::new(),
        )),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = execute(&cli).and_then(|(bytes, warnings)| {
        for w in warnings {
            eprintln!("warning: {w}");
        }
        match &cli.out {
            Some(path) => fs::write(path, &bytes),
            // A closed pipe (`| head`) is the reader's choice, not a failure.
            None => match io::stdout().lock().write_all(&bytes) {
                Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
                other => other,
            },
        }
        .map_err(|e| CliError::Runtime(format!("writing output: {e}")))
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hammerlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
