//! Unswitched ensemble: decay of the memory state, its fitted lifetime and
//! spontaneous switches.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use flipflop::analysis::{
    bootstrap_decay_time, fit_exponential, pooled_switch_interval, SwitchDetector, SwitchEvent,
};
use flipflop::device::{build_model, initial_state, OBSERVABLE_LABELS};
use flipflop::ensemble::{run_ensemble, EnsembleRecord};

use crate::config::{ExperimentConfig, MemoryOptions};
use crate::error::CliError;
use crate::flipflop::{jump_counts, write_trajectory_csv};
use crate::output::{format_number, OutputDir};

/// Relative fit standard error above which a fit is flagged unreliable.
const MAX_RELATIVE_STDERR: f64 = 0.5;

#[derive(Clone, Debug, Serialize)]
pub struct FitReport {
    /// Fitted decay time (µs); absent when the fit failed.
    pub memory_time: Option<f64>,
    /// Bootstrap standard deviation when available, else the fit standard error.
    pub uncertainty: Option<f64>,
    pub uncertainty_method: &'static str,
    pub method: &'static str,
    pub fit_residual: Option<f64>,
    pub amplitude: Option<f64>,
    pub floor: Option<f64>,
    pub fit_floor: bool,
    pub decay_time_stderr: Option<f64>,
    pub bootstrap_std: Option<f64>,
    pub bootstrap_fits: usize,
    pub window_start_us: f64,
    pub window_end_us: f64,
    pub samples: usize,
    pub n_traj: usize,
    pub unreliable: bool,
    pub unreliable_reasons: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MemberSummary {
    pub index: usize,
    pub stream: u64,
    pub jump_counts: BTreeMap<String, usize>,
    pub leakage_flag: bool,
    pub max_leakage: f64,
    pub switches: Vec<SwitchEvent>,
    pub observed_us: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MemorySummary {
    pub base_seed: u64,
    pub n_traj: usize,
    pub failed: Vec<flipflop::ensemble::FailedMember>,
    pub detector: SwitchDetector,
    /// Total observed time over total switch count (µs); absent without switches.
    pub mean_switch_interval: Option<f64>,
    pub total_switches: usize,
    pub members: Vec<MemberSummary>,
}

pub struct MemoryOutcome {
    pub fit: FitReport,
    pub summary: MemorySummary,
}

pub fn options(config: &ExperimentConfig) -> MemoryOptions {
    config.experiment.memory.clone().unwrap_or_default()
}

pub fn run(config: &ExperimentConfig, out: &mut OutputDir) -> Result<MemoryOutcome, CliError> {
    if !config.schedule.events.is_empty() {
        return Err(CliError::Config(
            "schedule.events: the memory experiment runs without Set/Reset pulses".into(),
        ));
    }
    let opts = options(config);
    let p = config.device_params();
    let settings = config.integrator_settings();
    let model = build_model(&p, &config.schedule(), settings.dt)?;
    let channels: Vec<String> = model.jumps().iter().map(|j| j.label().to_string()).collect();
    let ensemble = run_ensemble(
        &model,
        &initial_state(&p.space()?),
        &settings,
        config.ensemble.n_traj,
        config.ensemble.base_seed,
    )?;

    write_ensemble_csv(out, &ensemble)?;
    for member in &ensemble.members {
        write_trajectory_csv(out, &format!("trajectory_{:03}.csv", member.stream), member)?;
    }

    let detector = SwitchDetector {
        n_ref: opts.n_ref.unwrap_or(p.n_target_a),
        low_frac: opts.low_frac,
        high_frac: opts.high_frac,
        min_dwell: opts.min_dwell,
    };
    let window = fit_window(&ensemble.times, opts.equilibration);
    let times = &ensemble.times[window.clone()];
    let mut reports = Vec::new();
    let mut members = Vec::new();
    let mut switch_rows = Vec::new();
    for rec in &ensemble.members {
        let n_a = &rec.series("n_a").expect("n_a observable")[window.clone()];
        let n_b = &rec.series("n_b").expect("n_b observable")[window.clone()];
        let (switches, observed) = match detector.detect(times, n_a, n_b) {
            Ok(report) => {
                let result = (report.events.clone(), report.duration);
                reports.push(report);
                result
            }
            Err(_) => (Vec::new(), 0.0),
        };
        for ev in &switches {
            switch_rows.push(vec![
                rec.stream.to_string(),
                format_number(ev.time),
                format!("{:?}", ev.to).to_lowercase(),
            ]);
        }
        members.push(MemberSummary {
            index: rec.stream as usize,
            stream: rec.stream,
            jump_counts: jump_counts(rec, &channels),
            leakage_flag: rec.leakage_flag,
            max_leakage: rec.max_leakage,
            switches,
            observed_us: observed,
        });
    }
    out.write_records("switches.csv", &["trajectory", "time_us", "to"], &switch_rows)?;

    let total_switches = reports.iter().map(|r| r.events.len()).sum();
    let summary = MemorySummary {
        base_seed: config.ensemble.base_seed,
        n_traj: config.ensemble.n_traj,
        failed: ensemble.failed.clone(),
        detector,
        mean_switch_interval: (total_switches > 0).then(|| pooled_switch_interval(&reports)),
        total_switches,
        members,
    };
    out.write_json("memory_summary.json", &summary)?;

    let series: Vec<&[f64]> = ensemble
        .members
        .iter()
        .map(|m| &m.series("n_a").expect("n_a observable")[window.clone()])
        .collect();
    let fit = fit_report(times, &series, &opts, config.ensemble.base_seed);
    out.write_json("memory_fit.json", &fit)?;
    Ok(MemoryOutcome { fit, summary })
}

/// Fits a `time_us, n_a` CSV instead of simulating.
pub fn run_synthetic(input: &Path, opts: &MemoryOptions, out: &mut OutputDir) -> Result<FitReport, CliError> {
    let (times, values) = read_series(input)?;
    let window = fit_window(&times, opts.equilibration);
    let fit = fit_report(&times[window.clone()], &[&values[window]], opts, 0);
    out.write_json("memory_fit.json", &fit)?;
    Ok(fit)
}

fn read_series(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Config(format!("{}: missing column {name}", path.display())))
    };
    let (ti, ni) = (column("time_us")?, column("n_a")?);
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |i: usize| {
            record[i].trim().parse::<f64>().map_err(|e| {
                // header is line 1
                CliError::Config(format!("{}: line {}: {e}", path.display(), row + 2))
            })
        };
        times.push(parse(ti)?);
        values.push(parse(ni)?);
    }
    Ok((times, values))
}

fn fit_window(times: &[f64], equilibration: f64) -> std::ops::Range<usize> {
    let start = times.iter().position(|&t| t >= equilibration).unwrap_or(times.len());
    start..times.len()
}

fn fit_report(times: &[f64], members: &[&[f64]], opts: &MemoryOptions, seed: u64) -> FitReport {
    let mut reasons = Vec::new();
    let mut mean = vec![0.0; times.len()];
    for m in members {
        for (acc, v) in mean.iter_mut().zip(m.iter()) {
            *acc += v / members.len() as f64;
        }
    }
    let mut report = FitReport {
        memory_time: None,
        uncertainty: None,
        uncertainty_method: "none",
        method: "fitted",
        fit_residual: None,
        amplitude: None,
        floor: None,
        fit_floor: opts.fit_floor,
        decay_time_stderr: None,
        bootstrap_std: None,
        bootstrap_fits: 0,
        window_start_us: times.first().copied().unwrap_or(f64::NAN),
        window_end_us: times.last().copied().unwrap_or(f64::NAN),
        samples: times.len(),
        n_traj: members.len(),
        unreliable: false,
        unreliable_reasons: Vec::new(),
    };
    match fit_exponential(times, &mean, opts.fit_floor) {
        Ok(fit) => {
            report.memory_time = Some(fit.decay_time);
            report.fit_residual = Some(fit.rss);
            report.amplitude = Some(fit.amplitude);
            report.floor = opts.fit_floor.then_some(fit.floor);
            report.decay_time_stderr = Some(fit.decay_time_stderr);
            report.uncertainty = Some(fit.decay_time_stderr);
            report.uncertainty_method = "fit_covariance";
            if fit.decay_time_stderr.is_nan() || fit.decay_time_stderr > MAX_RELATIVE_STDERR * fit.decay_time {
                reasons.push(format!(
                    "decay-time standard error {:.3e} exceeds {MAX_RELATIVE_STDERR} of the estimate",
                    fit.decay_time_stderr
                ));
            }
            let span = report.window_end_us - report.window_start_us;
            if fit.decay_time > span {
                reasons.push(format!("decay time exceeds the {span} µs fit window"));
            }
        }
        Err(e) => reasons.push(format!("fit failed: {e}")),
    }
    if members.len() < 2 {
        reasons.push("fewer than two trajectories".into());
    } else if report.memory_time.is_some() && opts.bootstrap_resamples > 1 {
        match bootstrap_decay_time(times, members, opts.fit_floor, opts.bootstrap_resamples, seed) {
            Ok((std, count)) => {
                report.bootstrap_std = Some(std);
                report.bootstrap_fits = count;
                report.uncertainty = Some(std);
                report.uncertainty_method = "bootstrap";
            }
            Err(e) => reasons.push(format!("bootstrap failed: {e}")),
        }
    }
    report.unreliable = !reasons.is_empty();
    report.unreliable_reasons = reasons;
    report
}

fn write_ensemble_csv(out: &mut OutputDir, ensemble: &EnsembleRecord) -> Result<(), CliError> {
    let stderr_names: Vec<String> = OBSERVABLE_LABELS.iter().map(|l| format!("{l}_stderr")).collect();
    let mut header = vec!["time_us"];
    header.extend(OBSERVABLE_LABELS);
    header.extend(stderr_names.iter().map(String::as_str));
    let mut columns: Vec<&[f64]> = vec![&ensemble.times];
    for label in OBSERVABLE_LABELS {
        columns.push(ensemble.mean_of(label).expect("standard observable"));
    }
    for label in OBSERVABLE_LABELS {
        columns.push(ensemble.stderr_of(label).expect("standard observable"));
    }
    out.write_columns("ensemble.csv", &header, &columns)
}
