//! Config-driven experiment runners for the flip-flop simulator.
//!
//! Each subcommand reads one TOML config (see [`config`]), runs its
//! experiment and writes CSV/JSON results plus a `manifest.json` with the
//! resolved config into the output directory.

pub mod config;
pub mod error;
pub mod estimate;
pub mod flipflop;
pub mod memory;
pub mod output;
pub mod validate;

use std::path::{Path, PathBuf};

use config::{ExperimentConfig, ExperimentKind};
pub use error::CliError;
use output::OutputDir;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subcommand {
    Flipflop,
    Memory,
    Estimate,
    Validate,
}

#[derive(Clone, Debug, Default)]
pub struct RunArgs {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub traj: Option<usize>,
    /// Memory only: fit a `time_us, n_a` CSV instead of simulating.
    pub input: Option<PathBuf>,
}

/// Loads a config and applies the `--seed` / `--traj` overrides.
pub fn load_config(path: &Path, args: &RunArgs, expected: ExperimentKind) -> Result<ExperimentConfig, CliError> {
    let mut config = ExperimentConfig::from_path(path)?;
    if config.experiment.kind != expected {
        return Err(CliError::Config(format!(
            "{}: experiment.kind is {} but the subcommand is {}",
            path.display(),
            config.experiment.kind.name(),
            expected.name()
        )));
    }
    if let Some(seed) = args.seed {
        config.ensemble.base_seed = seed;
    }
    if let Some(traj) = args.traj {
        if traj == 0 {
            return Err(CliError::Config("--traj must be at least 1".into()));
        }
        config.ensemble.n_traj = traj;
    }
    Ok(config)
}

fn require_config<'a>(args: &'a RunArgs, command: &str) -> Result<&'a Path, CliError> {
    args.config
        .as_deref()
        .ok_or_else(|| CliError::Config(format!("{command} needs --config")))
}

/// Runs one subcommand; returns a one-line summary for the terminal.
pub fn run(command: Subcommand, args: &RunArgs) -> Result<String, CliError> {
    match command {
        Subcommand::Flipflop => {
            let config = load_config(require_config(args, "flipflop")?, args, ExperimentKind::Flipflop)?;
            let mut out = OutputDir::create(&args.out)?;
            let summary = flipflop::run(&config, &mut out)?;
            out.finish("flipflop", Some(&config))?;
            let jumps: usize = summary.jump_counts.values().sum();
            Ok(format!(
                "flipflop: {} samples, {jumps} jumps, leakage flag {}",
                summary.samples, summary.leakage_flag
            ))
        }
        Subcommand::Memory => {
            let mut out;
            let (fit, config) = match (&args.input, &args.config) {
                (Some(input), config_path) => {
                    let config = match config_path {
                        Some(path) => Some(load_config(path, args, ExperimentKind::Memory)?),
                        None => None,
                    };
                    let opts = config.as_ref().map(memory::options).unwrap_or_default();
                    out = OutputDir::create(&args.out)?;
                    (memory::run_synthetic(input, &opts, &mut out)?, config)
                }
                (None, _) => {
                    let config = load_config(require_config(args, "memory")?, args, ExperimentKind::Memory)?;
                    out = OutputDir::create(&args.out)?;
                    (memory::run(&config, &mut out)?.fit, Some(config))
                }
            };
            out.finish("memory", config.as_ref())?;
            Ok(match fit.memory_time {
                Some(t) => format!(
                    "memory: T = {t:.6} µs ± {:.3} ({}){}",
                    fit.uncertainty.unwrap_or(f64::NAN),
                    fit.uncertainty_method,
                    if fit.unreliable { ", unreliable" } else { "" }
                ),
                None => "memory: fit failed, see memory_fit.json".into(),
            })
        }
        Subcommand::Estimate => {
            let config = load_config(require_config(args, "estimate")?, args, ExperimentKind::Estimate)?;
            let mut out = OutputDir::create(&args.out)?;
            let report = estimate::run(&config, &mut out)?;
            out.finish("estimate", Some(&config))?;
            Ok(match report.point.memory_time_us {
                Some(t) => format!("estimate: T_mem = {t:.6} µs"),
                None => "estimate: no feeding, T_mem = inf".into(),
            })
        }
        Subcommand::Validate => {
            let mut settings = validate::ValidationSettings::default();
            if let Some(seed) = args.seed {
                settings.seed = seed;
            }
            if let Some(traj) = args.traj {
                settings.random_traj = traj;
            }
            let mut out = OutputDir::create(&args.out)?;
            let report = validate::run(&settings, &mut out)?;
            out.finish("validate", None)?;
            let failed: Vec<&str> = report
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| c.name.as_str())
                .collect();
            if failed.is_empty() {
                Ok(format!("validate: {} checks passed", report.checks.len()))
            } else {
                Err(CliError::Validation(failed.join(", ")))
            }
        }
    }
}
