//! Closed-form memory-time estimates and parameter sweeps.

use std::f64::consts::TAU;

use serde::Serialize;

use flipflop::analysis::{memory_time_estimate, qubit_corrected_memory_time, MemoryTimeResult, Method};
use flipflop::device::{drive_power, DeviceParams};

use crate::config::{EstimateOptions, ExperimentConfig, SweepAxis, SweepSpec};
use crate::error::CliError;
use crate::output::{format_number, OutputDir};

pub const SWEEP_COLUMNS: [&str; 9] = [
    "panel",
    "curve_ratio",
    "n_target",
    "kappa_mhz",
    "kappa_t_over_n",
    "transistor_t1_us",
    "qubit_t1_us",
    "memory_time_us",
    "method",
];

#[derive(Clone, Debug, Serialize)]
pub struct PointEstimate {
    /// Poisson-weighted feeding estimate (µs); null when nothing feeds `b`.
    pub memory_time_us: Option<f64>,
    pub method: Method,
    /// Including qubit excitation, when branch intensities are configured.
    pub qubit_corrected_us: Option<f64>,
    /// `(χ_a⁽¹⁾ − χ_a⁽²⁾⟨n_a⟩)⟨n_a⟩ / 2π` in MHz.
    pub coupling_from_a_mhz: f64,
    pub coupling_from_b_mhz: f64,
    pub drive_power_w: f64,
    pub n_max: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CurveMaximum {
    pub panel: String,
    pub curve_ratio: Option<f64>,
    /// Swept value at the largest memory time.
    pub argmax: f64,
    pub max_memory_time_us: f64,
    /// True when the maximum is not at either end of the grid.
    pub interior: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimateReport {
    pub point: PointEstimate,
    pub maxima: Vec<CurveMaximum>,
}

struct Row {
    curve_ratio: Option<f64>,
    params: DeviceParams,
    transistor_t1: f64,
    qubit_t1: f64,
    x: f64,
    result: MemoryTimeResult,
    corrected: bool,
}

pub fn options(config: &ExperimentConfig) -> EstimateOptions {
    config.experiment.estimate.clone().unwrap_or_default()
}

pub fn run(config: &ExperimentConfig, out: &mut OutputDir) -> Result<EstimateReport, CliError> {
    let opts = options(config);
    let p = config.device_params();
    let point = point_estimate(config, &opts)?;
    out.write_records(
        "estimate.csv",
        &[
            "n_target_a",
            "n_target_b",
            "kappa_mhz",
            "transistor_t1_us",
            "qubit_t1_us",
            "memory_time_us",
            "qubit_corrected_us",
        ],
        &[vec![
            format_number(p.n_target_a),
            format_number(p.n_target_b),
            format_number(config.device.kappa_b),
            format_number(config.device.transistor_t1),
            format_number(config.device.qubit_t1),
            format_number(point.memory_time_us.unwrap_or(f64::INFINITY)),
            point.qubit_corrected_us.map(format_number).unwrap_or_default(),
        ]],
    )?;

    let mut maxima = Vec::new();
    for sweep in &opts.sweeps {
        let rows = sweep_rows(config, &opts, sweep)?;
        let records: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    sweep.panel.clone(),
                    r.curve_ratio.map(format_number).unwrap_or_default(),
                    format_number(r.params.n_target_a),
                    format_number(r.params.kappa_b / TAU),
                    format_number(r.params.kappa_b * r.transistor_t1 / r.params.n_target_a),
                    format_number(r.transistor_t1),
                    format_number(r.qubit_t1),
                    format_number(r.result.memory_time),
                    method_label(&r.result, r.corrected).into(),
                ]
            })
            .collect();
        out.write_records(&format!("sweep_{}.csv", sweep.panel), &SWEEP_COLUMNS, &records)?;
        maxima.extend(curve_maxima(&sweep.panel, &rows));
    }
    let report = EstimateReport { point, maxima };
    out.write_json("estimate.json", &report)?;
    Ok(report)
}

pub fn point_estimate(config: &ExperimentConfig, opts: &EstimateOptions) -> Result<PointEstimate, CliError> {
    let p = config.device_params();
    let base = memory_time_estimate(&p, opts.n_max)?;
    let qubit_corrected_us = match opts.branch {
        Some(b) => Some(qubit_corrected_memory_time(&p, opts.n_max, &b.into(), opts.saturation)?.memory_time),
        None => None,
    };
    Ok(PointEstimate {
        memory_time_us: base.memory_time.is_finite().then_some(base.memory_time),
        method: base.method,
        qubit_corrected_us: qubit_corrected_us.filter(|t| t.is_finite()),
        coupling_from_a_mhz: p.coupling_from_a(p.n_target_a) / TAU,
        coupling_from_b_mhz: p.coupling_from_b(p.n_target_b) / TAU,
        drive_power_w: drive_power(&p),
        n_max: opts.n_max,
    })
}

fn method_label(result: &MemoryTimeResult, corrected: bool) -> &'static str {
    match (result.method, corrected) {
        (Method::NoFeeding, _) => "no_feeding",
        (_, true) => "eq8_qubit",
        _ => "eq8",
    }
}

fn sweep_rows(config: &ExperimentConfig, opts: &EstimateOptions, sweep: &SweepSpec) -> Result<Vec<Row>, CliError> {
    let base = config.device_params();
    let transistor_t1 = sweep.transistor_t1.unwrap_or(config.device.transistor_t1);
    let qubit_t1 = config.device.qubit_t1;
    let mut rows = Vec::new();
    let mut push = |curve_ratio, params: DeviceParams, qubit_t1: f64, x: f64, corrected: bool| -> Result<(), CliError> {
        let result = if corrected {
            let branch = opts.branch.expect("checked at parse time").into();
            qubit_corrected_memory_time(&params, opts.n_max, &branch, opts.saturation)?
        } else {
            memory_time_estimate(&params, opts.n_max)?
        };
        rows.push(Row {
            curve_ratio,
            params,
            transistor_t1,
            qubit_t1,
            x,
            result,
            corrected,
        });
        Ok(())
    };
    match sweep.vary {
        SweepAxis::NTarget => {
            for &ratio in sweep.ratios.as_deref().unwrap_or_default() {
                for &n in &sweep.values {
                    let kappa = ratio * n / transistor_t1;
                    let params = DeviceParams {
                        n_target_a: n,
                        n_target_b: n,
                        kappa_a: kappa,
                        kappa_b: kappa,
                        ..base.clone()
                    };
                    push(Some(ratio), params, qubit_t1, n, false)?;
                }
            }
        }
        SweepAxis::KappaRatio => {
            for &ratio in &sweep.values {
                let kappa = ratio * base.n_target_a / transistor_t1;
                let params = DeviceParams {
                    kappa_a: kappa,
                    kappa_b: kappa,
                    ..base.clone()
                };
                push(None, params, qubit_t1, ratio, false)?;
            }
        }
        SweepAxis::QubitT1 => {
            for &t1 in &sweep.values {
                let params = DeviceParams {
                    gamma: if t1.is_infinite() { 0.0 } else { 1.0 / t1 },
                    ..base.clone()
                };
                push(None, params, t1, t1, true)?;
            }
        }
    }
    Ok(rows)
}

fn curve_maxima(panel: &str, rows: &[Row]) -> Vec<CurveMaximum> {
    let mut curves: Vec<(Option<f64>, Vec<&Row>)> = Vec::new();
    for row in rows {
        match curves.iter_mut().find(|(r, _)| *r == row.curve_ratio) {
            Some((_, members)) => members.push(row),
            None => curves.push((row.curve_ratio, vec![row])),
        }
    }
    curves
        .into_iter()
        .filter_map(|(ratio, members)| {
            let (idx, best) = members
                .iter()
                .enumerate()
                .filter(|(_, r)| r.result.memory_time.is_finite())
                .max_by(|a, b| a.1.result.memory_time.total_cmp(&b.1.result.memory_time))?;
            Some(CurveMaximum {
                panel: panel.to_string(),
                curve_ratio: ratio,
                argmax: best.x,
                max_memory_time_us: best.result.memory_time,
                interior: idx > 0 && idx + 1 < members.len(),
            })
        })
        .collect()
}
