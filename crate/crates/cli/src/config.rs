//! Experiment configuration files.
//!
//! A config is a TOML document with the sections `device`, `drives`,
//! `schedule`, `integrator`, `ensemble` and `experiment`. Frequencies and
//! rates are given in MHz and multiplied by 2π on conversion; lifetimes and
//! times are in µs. Every physical parameter is required; only numerical
//! settings have defaults. Unknown keys are rejected.

use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use flipflop::analysis::{BranchIntensities, SaturationPoint};
use flipflop::device::{DeviceParams, PulseEvent, PulseKind, PulseSchedule};
use flipflop::trajectory::IntegratorSettings;

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub device: DeviceSection,
    pub drives: DrivesSection,
    pub schedule: ScheduleSection,
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    pub experiment: ExperimentSection,
}

/// Device parameters in MHz (×2π) and µs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSection {
    pub chi_a1: f64,
    pub chi_a2: f64,
    pub chi_b1: f64,
    pub chi_b2: f64,
    pub chi_ab: f64,
    pub g_res_a: f64,
    pub g_res_b: f64,
    pub g_ta: f64,
    pub g_tb: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
    /// Qubit-a/b lifetime; `inf` disables qubit decay.
    pub qubit_t1: f64,
    pub transistor_t1: f64,
    pub omega_a: f64,
    pub omega_b: f64,
    /// Adds an f → e transistor decay channel at the transistor rate.
    pub transistor_f_decay: bool,
    #[serde(default = "default_truncation")]
    pub truncation_a: usize,
    #[serde(default = "default_truncation")]
    pub truncation_b: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrivesSection {
    pub n_target_a: f64,
    pub n_target_b: f64,
    /// Drive switch-on times in µs.
    pub on_a: f64,
    pub on_b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub events: Vec<EventEntry>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventEntry {
    pub time: f64,
    pub kind: PulseKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default)]
    pub t_start: f64,
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_sample_interval")]
    pub sample_interval: f64,
    #[serde(default = "default_bisection_fraction")]
    pub bisection_fraction: f64,
    #[serde(default = "default_leakage_threshold")]
    pub leakage_threshold: f64,
    #[serde(default = "default_norm_growth_tolerance")]
    pub norm_growth_tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    #[serde(default = "default_n_traj")]
    pub n_traj: usize,
    #[serde(default)]
    pub base_seed: u64,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            n_traj: default_n_traj(),
            base_seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Flipflop,
    Memory,
    Estimate,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Flipflop => "flipflop",
            ExperimentKind::Memory => "memory",
            ExperimentKind::Estimate => "estimate",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<MemoryOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateOptions>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryOptions {
    /// Samples before this time (µs) are excluded from the fit.
    #[serde(default = "default_equilibration")]
    pub equilibration: f64,
    #[serde(default = "default_true")]
    pub fit_floor: bool,
    #[serde(default = "default_bootstrap")]
    pub bootstrap_resamples: usize,
    /// Reference photon number of the switch detector; defaults to `n_target_a`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_ref: Option<f64>,
    #[serde(default = "default_low_frac")]
    pub low_frac: f64,
    #[serde(default = "default_high_frac")]
    pub high_frac: f64,
    /// µs
    #[serde(default = "default_min_dwell")]
    pub min_dwell: f64,
}

impl Default for MemoryOptions {
    fn default() -> Self {
        Self {
            equilibration: default_equilibration(),
            fit_floor: true,
            bootstrap_resamples: default_bootstrap(),
            n_ref: None,
            low_frac: default_low_frac(),
            high_frac: default_high_frac(),
            min_dwell: default_min_dwell(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateOptions {
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default)]
    pub saturation: SaturationPoint,
    /// Squared branch field amplitudes for the qubit-excitation correction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch: Option<BranchEntry>,
    #[serde(default)]
    pub sweeps: Vec<SweepSpec>,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            n_max: default_n_max(),
            saturation: SaturationPoint::default(),
            branch: None,
            sweeps: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchEntry {
    pub alpha_up: f64,
    pub alpha_down: f64,
    pub beta_up: f64,
    pub beta_down: f64,
}

impl From<BranchEntry> for BranchIntensities {
    fn from(b: BranchEntry) -> Self {
        BranchIntensities {
            alpha_up: b.alpha_up,
            alpha_down: b.alpha_down,
            beta_up: b.beta_up,
            beta_down: b.beta_down,
        }
    }
}

/// Swept quantity of an estimate sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Target photon number of both resonators, with κ set by each of
    /// `ratios` through `κ T_t / ⟨n⟩ = ratio`.
    NTarget,
    /// `κ T_t / ⟨n_a⟩` at the configured photon number, varying κ.
    KappaRatio,
    /// Qubit lifetime in µs; adds the qubit-excitation correction.
    QubitT1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub panel: String,
    pub vary: SweepAxis,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratios: Option<Vec<f64>>,
    /// Overrides the device's transistor lifetime for this sweep (µs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transistor_t1: Option<f64>,
}

fn default_truncation() -> usize {
    20
}
fn default_dt() -> f64 {
    0.0005
}
fn default_sample_interval() -> f64 {
    0.1
}
fn default_bisection_fraction() -> f64 {
    0.01
}
fn default_leakage_threshold() -> f64 {
    1e-3
}
fn default_norm_growth_tolerance() -> f64 {
    1e-8
}
fn default_n_traj() -> usize {
    1
}
fn default_equilibration() -> f64 {
    20.0
}
fn default_true() -> bool {
    true
}
fn default_bootstrap() -> usize {
    200
}
fn default_low_frac() -> f64 {
    0.25
}
fn default_high_frac() -> f64 {
    0.75
}
fn default_min_dwell() -> f64 {
    5.0
}
fn default_n_max() -> usize {
    flipflop::analysis::DEFAULT_N_MAX
}

fn lifetime_to_rate(t1: f64) -> f64 {
    if t1.is_infinite() {
        0.0
    } else {
        1.0 / t1
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Parses and checks a config; errors name the offending line.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.check().map_err(|(section, key, reason)| {
            let at = match locate(text, section, key) {
                Some(line) => format!("line {line}: "),
                None => String::new(),
            };
            CliError::Config(format!("{at}{section}.{key}: {reason}"))
        })?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn check(&self) -> Result<(), (&'static str, &'static str, String)> {
        let d = &self.device;
        for (key, t1) in [("qubit_t1", d.qubit_t1), ("transistor_t1", d.transistor_t1)] {
            if t1.is_nan() || t1 <= 0.0 {
                return Err(("device", key, format!("lifetime {t1} must be positive")));
            }
        }
        if let Err(e) = self.device_params().validate() {
            let key = match &e {
                flipflop::Error::InvalidParameter { name, .. } => device_key(name),
                _ => "device",
            };
            let section = if key.starts_with("n_target") { "drives" } else { "device" };
            return Err((section, key, e.to_string()));
        }
        if let Err(e) = self.schedule().validate(self.integrator.dt) {
            return Err(("schedule", "events", e.to_string()));
        }
        if let Err(e) = self.integrator_settings().validate() {
            let key = match &e {
                flipflop::Error::InvalidParameter { name, .. } => *name,
                _ => "t_end",
            };
            return Err(("integrator", key, e.to_string()));
        }
        if self.ensemble.n_traj == 0 {
            return Err(("ensemble", "n_traj", "need at least one trajectory".into()));
        }
        if let Some(m) = &self.experiment.memory {
            if !(0.0 < m.low_frac && m.low_frac < m.high_frac) {
                return Err(("memory", "low_frac", "need 0 < low_frac < high_frac".into()));
            }
            if m.min_dwell.is_nan() || m.min_dwell <= 0.0 {
                return Err(("memory", "min_dwell", "must be positive".into()));
            }
        }
        if let Some(est) = &self.experiment.estimate {
            for sweep in &est.sweeps {
                if sweep.values.is_empty() {
                    return Err(("sweeps", "values", format!("panel {}: empty grid", sweep.panel)));
                }
                match (sweep.vary, &sweep.ratios) {
                    (SweepAxis::NTarget, None) => {
                        return Err(("sweeps", "ratios", format!("panel {}: n_target sweeps need ratios", sweep.panel)));
                    }
                    (SweepAxis::NTarget, Some(_)) => {}
                    (_, Some(_)) => {
                        return Err(("sweeps", "ratios", format!("panel {}: ratios only apply to n_target sweeps", sweep.panel)));
                    }
                    _ => {}
                }
                if sweep.vary == SweepAxis::QubitT1 && est.branch.is_none() {
                    return Err(("estimate", "branch", format!("panel {}: qubit_t1 sweeps need branch intensities", sweep.panel)));
                }
            }
        }
        Ok(())
    }

    /// Device parameters in internal units (rad/µs, µs).
    pub fn device_params(&self) -> DeviceParams {
        let d = &self.device;
        DeviceParams {
            chi_a1: TAU * d.chi_a1,
            chi_a2: TAU * d.chi_a2,
            chi_b1: TAU * d.chi_b1,
            chi_b2: TAU * d.chi_b2,
            chi_ab: TAU * d.chi_ab,
            g_res_a: TAU * d.g_res_a,
            g_res_b: TAU * d.g_res_b,
            g_ta: TAU * d.g_ta,
            g_tb: TAU * d.g_tb,
            kappa_a: TAU * d.kappa_a,
            kappa_b: TAU * d.kappa_b,
            gamma: lifetime_to_rate(d.qubit_t1),
            gamma_t: lifetime_to_rate(d.transistor_t1),
            n_target_a: self.drives.n_target_a,
            n_target_b: self.drives.n_target_b,
            omega_a: TAU * d.omega_a,
            omega_b: TAU * d.omega_b,
            truncation_a: d.truncation_a,
            truncation_b: d.truncation_b,
            transistor_f_decay: d.transistor_f_decay,
        }
    }

    pub fn schedule(&self) -> PulseSchedule {
        PulseSchedule {
            events: self
                .schedule
                .events
                .iter()
                .map(|e| PulseEvent {
                    time: e.time,
                    kind: e.kind,
                })
                .collect(),
            drive_on_a: self.drives.on_a,
            drive_on_b: self.drives.on_b,
        }
    }

    pub fn integrator_settings(&self) -> IntegratorSettings {
        let i = &self.integrator;
        IntegratorSettings {
            bisection_fraction: i.bisection_fraction,
            leakage_threshold: i.leakage_threshold,
            norm_growth_tolerance: i.norm_growth_tolerance,
            ..IntegratorSettings::new(i.t_start, i.t_end, i.dt, i.sample_interval)
        }
    }
}

/// Maps internal parameter names back to config keys.
fn device_key(name: &'static str) -> &'static str {
    match name {
        "gamma" => "qubit_t1",
        "gamma_t" => "transistor_t1",
        other => other,
    }
}

/// 1-based line of `key = ...` inside `[section]` (or any table whose
/// header ends in `section`).
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut fallback = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        let Some((lhs, _)) = line.split_once('=') else {
            continue;
        };
        if lhs.trim() != key {
            continue;
        }
        if current == section || current.ends_with(&format!(".{section}")) {
            return Some(i + 1);
        }
        fallback.get_or_insert(i + 1);
    }
    fallback
}
