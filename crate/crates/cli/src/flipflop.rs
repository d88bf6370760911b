//! Single trajectory under a Set/Reset schedule.

use std::collections::BTreeMap;

use serde::Serialize;

use flipflop::device::{build_model, initial_state, PulseKind};
use flipflop::trajectory::{evolve_trajectory, TrajectoryRecord};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{OutputDir, TRAJECTORY_COLUMNS};

#[derive(Clone, Debug, Serialize)]
pub struct FlipflopSummary {
    pub base_seed: u64,
    pub stream: u64,
    pub samples: usize,
    /// Jump count per channel label, zero counts included.
    pub jump_counts: BTreeMap<String, usize>,
    pub leakage_flag: bool,
    pub max_leakage: f64,
    pub pulses: Vec<PulseEntry>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PulseEntry {
    pub time_us: f64,
    pub kind: PulseKind,
}

/// Runs trajectory 0 of the configured seed.
pub fn simulate(config: &ExperimentConfig) -> Result<(TrajectoryRecord, Vec<String>), CliError> {
    let p = config.device_params();
    let settings = config.integrator_settings();
    let model = build_model(&p, &config.schedule(), settings.dt)?;
    let channels = model.jumps().iter().map(|j| j.label().to_string()).collect();
    let (reduced, start) = model.restrict_to_reachable(&initial_state(&p.space()?))?;
    let record = evolve_trajectory(&reduced, &start, &settings, config.ensemble.base_seed, 0)?;
    Ok((record, channels))
}

pub fn run(config: &ExperimentConfig, out: &mut OutputDir) -> Result<FlipflopSummary, CliError> {
    let (record, channels) = simulate(config)?;
    write_trajectory_csv(out, "flipflop.csv", &record)?;
    let jump_rows: Vec<Vec<String>> = record
        .jumps
        .iter()
        .map(|j| vec![crate::output::format_number(j.time), j.channel.clone()])
        .collect();
    out.write_records("jumps.csv", &["time_us", "channel"], &jump_rows)?;

    let summary = FlipflopSummary {
        base_seed: record.base_seed,
        stream: record.stream,
        samples: record.times.len(),
        jump_counts: jump_counts(&record, &channels),
        leakage_flag: record.leakage_flag,
        max_leakage: record.max_leakage,
        pulses: config
            .schedule
            .events
            .iter()
            .map(|e| PulseEntry {
                time_us: e.time,
                kind: e.kind,
            })
            .collect(),
    };
    out.write_json("flipflop.json", &summary)?;
    Ok(summary)
}

pub(crate) fn jump_counts(record: &TrajectoryRecord, channels: &[String]) -> BTreeMap<String, usize> {
    channels
        .iter()
        .map(|c| (c.clone(), record.jump_count(c)))
        .collect()
}

pub(crate) fn write_trajectory_csv(out: &mut OutputDir, name: &str, record: &TrajectoryRecord) -> Result<(), CliError> {
    let mut columns: Vec<&[f64]> = vec![&record.times];
    for label in &TRAJECTORY_COLUMNS[1..] {
        let series = record
            .series(label)
            .ok_or_else(|| CliError::Validation(format!("record has no {label} series")))?;
        columns.push(series);
    }
    out.write_columns(name, &TRAJECTORY_COLUMNS, &columns)
}
