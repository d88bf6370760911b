//! Closed-form memory-time estimates, exponential fits and switch detection.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::device::DeviceParams;
use crate::error::{Error, Result};
use crate::trajectory::trajectory_rng;

/// Default photon-number cutoff of the Poisson sum.
pub const DEFAULT_N_MAX: usize = 60;
/// Largest Poisson mass allowed beyond the cutoff.
pub const TAIL_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Analytic,
    Fitted,
    /// No drive feeds the blocked resonator: the memory never decays.
    NoFeeding,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryTimeResult {
    /// µs; infinite for [`Method::NoFeeding`].
    pub memory_time: f64,
    pub uncertainty: f64,
    pub method: Method,
    pub fit_residual: f64,
}

impl MemoryTimeResult {
    fn analytic(rate: f64) -> Self {
        if rate == 0.0 {
            Self {
                memory_time: f64::INFINITY,
                uncertainty: 0.0,
                method: Method::NoFeeding,
                fit_residual: 0.0,
            }
        } else {
            Self {
                memory_time: 1.0 / rate,
                uncertainty: 0.0,
                method: Method::Analytic,
                fit_residual: 0.0,
            }
        }
    }

    /// Total decay rate `1 / T` (zero when the memory never decays).
    pub fn rate(&self) -> f64 {
        1.0 / self.memory_time
    }
}

/// Poisson probabilities `e^{−λ} λⁿ / n!` for `n = 0..=n_max`, evaluated in
/// log space.
pub fn poisson_weights(mean: f64, n_max: usize) -> Vec<f64> {
    if mean == 0.0 {
        let mut w = vec![0.0; n_max + 1];
        w[0] = 1.0;
        return w;
    }
    let ln_mean = mean.ln();
    let mut ln_factorial = 0.0;
    (0..=n_max)
        .map(|n| {
            if n > 0 {
                ln_factorial += (n as f64).ln();
            }
            (-mean + n as f64 * ln_mean - ln_factorial).exp()
        })
        .collect()
}

/// Switching rate out of the resonator-`a` memory state: the rate at which
/// the drive feeds photons into the detuned resonator `b`, averaged over the
/// Poisson photon distribution of `a`:
///
/// `1/T = Σₙ P(n) (2β)² κ / (κ² + (χ⁽¹⁾n − χ⁽²⁾n²)²)`
///
/// with `κ = κ_b`, `β = √⟨n_b⟩ κ_b / 2` and the χ coefficients of `a`.
pub fn memory_time_estimate(p: &DeviceParams, n_max: usize) -> Result<MemoryTimeResult> {
    p.validate()?;
    let weights = poisson_weights(p.n_target_a, n_max);
    let tail = 1.0 - weights.iter().sum::<f64>();
    if tail > TAIL_TOLERANCE {
        return Err(Error::NonConvergentTail { n_max, tail });
    }
    let kappa = p.kappa_b;
    let feed = (2.0 * p.beta()).powi(2);
    let rate: f64 = weights
        .iter()
        .enumerate()
        .map(|(n, w)| {
            let n = n as f64;
            let detuning = p.chi_a1 * n - p.chi_a2 * n * n;
            w * feed * kappa / (kappa * kappa + detuning * detuning)
        })
        .sum();
    if !rate.is_finite() {
        return Err(Error::InvalidParameter {
            name: "kappa_b",
            reason: "feeding rate is not finite (κ = 0 with a resonant n = 0 term)".into(),
        });
    }
    Ok(MemoryTimeResult::analytic(rate))
}

/// Squared field amplitudes `|α|²`, `|β|²` of the two qubit branches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchIntensities {
    pub alpha_up: f64,
    pub alpha_down: f64,
    pub beta_up: f64,
    pub beta_down: f64,
}

/// Photon number at which the saturated coupling `χ_a` is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SaturationPoint {
    /// `χ_a = χ⁽¹⁾ − χ⁽²⁾ |α_↓|²`
    #[default]
    LowerBranch,
    /// `χ_a = χ⁽¹⁾`
    Unsaturated,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateBranch {
    pub p_up: f64,
    pub p_down: f64,
    pub intensities: BranchIntensities,
}

/// Steady-state qubit excitation ratio `P_↑ / P_↓`:
///
/// `x (|α_↓|⁴ + |α_↓|²) |β_↓|² / (1 + x (|α_↑|⁴ + |α_↑|²)(|β_↑|² + 1))`
///
/// with `x = 4 χ_a² / γ²`.
pub fn qubit_population_ratio(
    p: &DeviceParams,
    branch: &BranchIntensities,
    saturation: SaturationPoint,
) -> Result<f64> {
    if p.gamma == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    let chi = match saturation {
        SaturationPoint::LowerBranch => p.chi_a1 - p.chi_a2 * branch.alpha_down,
        SaturationPoint::Unsaturated => p.chi_a1,
    };
    let x = 4.0 * chi * chi / (p.gamma * p.gamma);
    let a_down = branch.alpha_down;
    let a_up = branch.alpha_up;
    let numerator = x * (a_down * a_down + a_down) * branch.beta_down;
    let denominator = 1.0 + x * (a_up * a_up + a_up) * (branch.beta_up + 1.0);
    Ok(numerator / denominator)
}

pub fn steady_state_branch(
    p: &DeviceParams,
    intensities: BranchIntensities,
    saturation: SaturationPoint,
) -> Result<SteadyStateBranch> {
    let ratio = qubit_population_ratio(p, &intensities, saturation)?;
    let p_up = ratio / (1.0 + ratio);
    Ok(SteadyStateBranch {
        p_up,
        p_down: 1.0 - p_up,
        intensities,
    })
}

/// Memory time including qubit relaxation: `1/T = 1/T_mem + P_↑ γ`.
pub fn qubit_corrected_memory_time(
    p: &DeviceParams,
    n_max: usize,
    intensities: &BranchIntensities,
    saturation: SaturationPoint,
) -> Result<MemoryTimeResult> {
    let base = memory_time_estimate(p, n_max)?;
    let branch = steady_state_branch(p, *intensities, saturation)?;
    let extra = branch.p_up * p.gamma;
    if extra == 0.0 {
        return Ok(base);
    }
    Ok(MemoryTimeResult::analytic(base.rate() + extra))
}

/// Least-squares fit of `A e^{−(t − t₀)/T} + c` (`c = 0` unless a floor is
/// fitted), where `t₀` is the first sample time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    /// Amplitude at the first sample time.
    pub amplitude: f64,
    pub decay_time: f64,
    pub floor: f64,
    pub amplitude_stderr: f64,
    pub decay_time_stderr: f64,
    pub floor_stderr: f64,
    /// Residual sum of squares.
    pub rss: f64,
    pub iterations: usize,
}

impl ExponentialFit {
    pub fn memory_time(&self) -> MemoryTimeResult {
        MemoryTimeResult {
            memory_time: self.decay_time,
            uncertainty: self.decay_time_stderr,
            method: Method::Fitted,
            fit_residual: self.rss,
        }
    }
}

const MIN_FIT_SAMPLES: usize = 10;
const MAX_FIT_ITERATIONS: usize = 500;

/// Linear least squares for the amplitude (and floor) at a fixed rate.
fn linear_part(t: &[f64], y: &[f64], rate: f64, with_floor: bool) -> (Vec<f64>, f64) {
    let basis: Vec<f64> = t.iter().map(|&s| (-rate * s).exp()).collect();
    let coeffs = if with_floor {
        let m = t.len() as f64;
        let (se, see) = (basis.iter().sum::<f64>(), basis.iter().map(|e| e * e).sum::<f64>());
        let (sy, sey) = (y.iter().sum::<f64>(), basis.iter().zip(y).map(|(e, v)| e * v).sum::<f64>());
        let det = see * m - se * se;
        if det.abs() < 1e-300 {
            vec![0.0, sy / m]
        } else {
            vec![(m * sey - se * sy) / det, (see * sy - se * sey) / det]
        }
    } else {
        let see: f64 = basis.iter().map(|e| e * e).sum();
        let sey: f64 = basis.iter().zip(y).map(|(e, v)| e * v).sum();
        vec![if see > 0.0 { sey / see } else { 0.0 }, 0.0]
    };
    let rss = basis
        .iter()
        .zip(y)
        .map(|(e, v)| (coeffs[0] * e + coeffs[1] - v).powi(2))
        .sum();
    (coeffs, rss)
}

/// Fits an exponential decay with Levenberg-Marquardt, started from the best
/// rate on a logarithmic grid. Standard errors come from the covariance
/// `s² (JᵀJ)⁻¹` with `s² = RSS / (m − p)`.
pub fn fit_exponential(times: &[f64], values: &[f64], with_floor: bool) -> Result<ExponentialFit> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch {
            left: times.len(),
            right: values.len(),
        });
    }
    if times.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} samples, need at least {MIN_FIT_SAMPLES}",
            times.len()
        )));
    }
    if times.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(Error::InsufficientData("non-finite samples".into()));
    }
    let t0 = times[0];
    let t: Vec<f64> = times.iter().map(|s| s - t0).collect();
    let span = t.iter().cloned().fold(0.0, f64::max);
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if span <= 0.0 || hi - lo <= 1e-12 * hi.abs().max(lo.abs()).max(1e-300) {
        return Err(Error::NoDecay);
    }

    // starting point: best rate on a log grid, linear parameters exact
    let grid = 400;
    let (r_min, r_max) = (1e-3 / span, 1e3 / span);
    let mut best = (f64::INFINITY, 0.0, vec![0.0, 0.0]);
    for i in 0..grid {
        let rate = r_min * (r_max / r_min).powf(i as f64 / (grid - 1) as f64);
        let (coeffs, rss) = linear_part(&t, values, rate, with_floor);
        if rss < best.0 {
            best = (rss, rate, coeffs);
        }
    }
    let (_, rate0, coeffs0) = best;

    let n_params = if with_floor { 3 } else { 2 };
    let mut theta = vec![coeffs0[0], rate0, coeffs0[1]];
    theta.truncate(n_params);
    let residuals = |theta: &[f64]| -> Vec<f64> {
        let c = if with_floor { theta[2] } else { 0.0 };
        t.iter()
            .zip(values)
            .map(|(s, v)| theta[0] * (-theta[1] * s).exp() + c - v)
            .collect()
    };
    let jacobian = |theta: &[f64]| -> DMatrix<f64> {
        DMatrix::from_fn(t.len(), n_params, |i, j| {
            let e = (-theta[1] * t[i]).exp();
            match j {
                0 => e,
                1 => -theta[0] * t[i] * e,
                _ => 1.0,
            }
        })
    };
    let rss_of = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>();

    let mut r = residuals(&theta);
    let mut rss = rss_of(&r);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_FIT_ITERATIONS {
        iterations += 1;
        let j = jacobian(&theta);
        let jtj = j.transpose() * &j;
        let jtr = j.transpose() * DVector::from_column_slice(&r);
        let mut accepted = false;
        for _ in 0..60 {
            let mut a = jtj.clone();
            for k in 0..n_params {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = a.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let candidate: Vec<f64> = theta.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
            let r_new = residuals(&candidate);
            let rss_new = rss_of(&r_new);
            if rss_new.is_finite() && rss_new <= rss {
                let rel_step = step
                    .iter()
                    .zip(&theta)
                    .map(|(d, x)| d.abs() / x.abs().max(1e-300))
                    .fold(0.0, f64::max);
                let small_gain = rss - rss_new <= 1e-15 * rss.max(1e-300);
                theta = candidate;
                r = r_new;
                rss = rss_new;
                lambda = (lambda * 0.3).max(1e-12);
                accepted = true;
                // a flat minimum can stall the rss before the parameters settle
                if rel_step < 1e-13 || (small_gain && rel_step < 1e-11) || rss == 0.0 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no downhill step at any damping: at a minimum to round-off
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::FitNonConvergence { iterations, rss });
    }
    if theta[1] <= 0.0 || !theta[1].is_finite() {
        return Err(Error::NoDecay);
    }

    let dof = t.len() as f64 - n_params as f64;
    let s2 = rss / dof;
    let j = jacobian(&theta);
    let cov = (j.transpose() * &j)
        .try_inverse()
        .map(|m| m * s2)
        .unwrap_or_else(|| DMatrix::from_element(n_params, n_params, f64::INFINITY));
    let se = |k: usize| cov[(k, k)].max(0.0).sqrt();
    let rate = theta[1];
    Ok(ExponentialFit {
        amplitude: theta[0],
        decay_time: 1.0 / rate,
        floor: if with_floor { theta[2] } else { 0.0 },
        amplitude_stderr: se(0),
        decay_time_stderr: se(1) / (rate * rate),
        floor_stderr: if with_floor { se(2) } else { 0.0 },
        rss,
        iterations,
    })
}

/// Bootstrap over trajectories: resample member series with replacement,
/// refit the mean, and report the standard deviation of the fitted decay
/// times together with the number of successful refits.
pub fn bootstrap_decay_time(
    times: &[f64],
    members: &[&[f64]],
    with_floor: bool,
    resamples: usize,
    seed: u64,
) -> Result<(f64, usize)> {
    if members.is_empty() {
        return Err(Error::InsufficientData("no member series".into()));
    }
    let mut rng = trajectory_rng(seed, u64::MAX);
    let mut fitted = Vec::with_capacity(resamples);
    let mut mean = vec![0.0; times.len()];
    for _ in 0..resamples {
        mean.iter_mut().for_each(|m| *m = 0.0);
        for _ in 0..members.len() {
            let pick = members[rng.random_range(0..members.len())];
            for (m, v) in mean.iter_mut().zip(pick) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= members.len() as f64);
        if let Ok(fit) = fit_exponential(times, &mean, with_floor) {
            fitted.push(fit.decay_time);
        }
    }
    if fitted.len() < 2 {
        return Err(Error::InsufficientData("fewer than two bootstrap fits succeeded".into()));
    }
    let n = fitted.len() as f64;
    let mu = fitted.iter().sum::<f64>() / n;
    let var = fitted.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((var.sqrt(), fitted.len()))
}

/// Which resonator holds the field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryState {
    A,
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    /// Start of the new state (µs).
    pub time: f64,
    pub to: MemoryState,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchDetector {
    pub n_ref: f64,
    pub low_frac: f64,
    pub high_frac: f64,
    /// µs
    pub min_dwell: f64,
}

impl SwitchDetector {
    pub fn new(n_ref: f64) -> Self {
        Self {
            n_ref,
            low_frac: 0.25,
            high_frac: 0.75,
            min_dwell: 5.0,
        }
    }

    fn classify(&self, n_a: f64, n_b: f64) -> Option<MemoryState> {
        let (high, low) = (self.high_frac * self.n_ref, self.low_frac * self.n_ref);
        if n_a > high && n_b < low {
            Some(MemoryState::A)
        } else if n_b > high && n_a < low {
            Some(MemoryState::B)
        } else {
            None
        }
    }

    /// Hysteresis switch detection on photon-number series. The first
    /// classified sample sets the initial state; a switch is recorded when
    /// the opposite state is entered and the original state does not
    /// reappear for `min_dwell`.
    pub fn detect(&self, times: &[f64], n_a: &[f64], n_b: &[f64]) -> Result<SwitchReport> {
        if times.len() != n_a.len() || times.len() != n_b.len() {
            return Err(Error::DimensionMismatch {
                left: times.len(),
                right: n_a.len().min(n_b.len()),
            });
        }
        let duration = match (times.first(), times.last()) {
            (Some(first), Some(last)) => last - first,
            _ => 0.0,
        };
        if duration < self.min_dwell {
            return Err(Error::RecordTooShort {
                duration,
                min_dwell: self.min_dwell,
            });
        }
        let mut events = Vec::new();
        let mut current: Option<MemoryState> = None;
        let mut candidate: Option<(MemoryState, f64)> = None;
        for ((&t, &a), &b) in times.iter().zip(n_a).zip(n_b) {
            let Some(state) = self.classify(a, b) else {
                if let Some((to, since)) = candidate {
                    if t - since >= self.min_dwell {
                        events.push(SwitchEvent { time: since, to });
                        current = Some(to);
                        candidate = None;
                    }
                }
                continue;
            };
            match current {
                None => current = Some(state),
                Some(cur) if state == cur => candidate = None,
                Some(_) => {
                    let since = match candidate {
                        Some((to, since)) if to == state => since,
                        _ => t,
                    };
                    if t - since >= self.min_dwell {
                        events.push(SwitchEvent { time: since, to: state });
                        current = Some(state);
                        candidate = None;
                    } else {
                        candidate = Some((state, since));
                    }
                }
            }
        }
        Ok(SwitchReport {
            rate: events.len() as f64 / duration,
            events,
            duration,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchReport {
    pub events: Vec<SwitchEvent>,
    /// µs
    pub duration: f64,
    /// switches per µs
    pub rate: f64,
}

impl SwitchReport {
    /// Mean time between switches (µs); infinite without switches.
    pub fn mean_interval(&self) -> f64 {
        self.duration / self.events.len() as f64
    }
}

/// Mean switch interval pooled over several records: total observed time
/// divided by the total number of switches.
pub fn pooled_switch_interval(reports: &[SwitchReport]) -> f64 {
    let duration: f64 = reports.iter().map(|r| r.duration).sum();
    let events: usize = reports.iter().map(|r| r.events.len()).sum();
    duration / events as f64
}
