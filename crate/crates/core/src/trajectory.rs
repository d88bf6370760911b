//! Monte Carlo wave-function trajectories.
//!
//! Between jumps the unnormalized state follows `dψ/dt = −(iH + ½ Σ c†c) ψ`,
//! integrated with fixed-step classical Runge-Kutta. A uniform threshold
//! `r ∈ (0, 1)` is drawn; once `‖ψ‖² ≤ r` the crossing is located by
//! bisection inside the step, a channel is chosen with probability
//! proportional to `‖c_μ ψ‖²`, the state is replaced by `c_μ ψ / ‖c_μ ψ‖` and
//! a new threshold is drawn.
//!
//! Random numbers come from ChaCha8: the generator is seeded with
//! `seed_from_u64(base_seed)` and trajectory `i` reads stream `i`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{norm_sqr, SparseOperator, StateVector, C64};
use crate::model::Model;

/// Integration and sampling settings. Times in µs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSettings {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    pub sample_interval: f64,
    /// Jump times are located to within `dt * bisection_fraction`.
    pub bisection_fraction: f64,
    /// Largest tolerated monitor value (top-Fock-level population).
    pub leakage_threshold: f64,
    /// Relative norm increase over one step that counts as instability.
    pub norm_growth_tolerance: f64,
}

impl IntegratorSettings {
    pub fn new(t_start: f64, t_end: f64, dt: f64, sample_interval: f64) -> Self {
        Self {
            t_start,
            t_end,
            dt,
            sample_interval,
            bisection_fraction: 0.01,
            leakage_threshold: 1e-3,
            norm_growth_tolerance: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if !(self.t_start.is_finite() && self.t_end.is_finite()) || self.t_end < self.t_start {
            return bad("t_span", "need finite t_start <= t_end");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt", "must be positive");
        }
        if !(self.sample_interval > 0.0 && self.sample_interval.is_finite()) {
            return bad("sample_interval", "must be positive");
        }
        if !(self.bisection_fraction > 0.0 && self.bisection_fraction <= 1.0) {
            return bad("bisection_fraction", "must lie in (0, 1]");
        }
        Ok(())
    }

    /// Sample times `t_start + k * sample_interval` up to `t_end`.
    pub fn sample_times(&self) -> Vec<f64> {
        let count = ((self.t_end - self.t_start) / self.sample_interval + 1e-9).floor() as usize;
        (0..=count)
            .map(|k| self.t_start + k as f64 * self.sample_interval)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub channel: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub labels: Vec<String>,
    pub times: Vec<f64>,
    /// `series[k][i]` is observable `k` at `times[i]`.
    pub series: Vec<Vec<f64>>,
    pub jumps: Vec<JumpEvent>,
    pub base_seed: u64,
    pub stream: u64,
    /// Largest leakage-monitor value seen at any sample.
    pub max_leakage: f64,
    pub leakage_flag: bool,
}

impl TrajectoryRecord {
    pub fn series(&self, label: &str) -> Option<&[f64]> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|k| self.series[k].as_slice())
    }

    pub fn jump_count(&self, channel: &str) -> usize {
        self.jumps.iter().filter(|j| j.channel == channel).count()
    }
}

/// ChaCha8 generator for trajectory `stream` of an ensemble seeded with
/// `base_seed`.
pub fn trajectory_rng(base_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw in the open interval (0, 1).
fn open_uniform(rng: &mut impl Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Scratch buffers for one Runge-Kutta step.
struct Rk4 {
    k: [Vec<C64>; 4],
    stage: Vec<C64>,
}

impl Rk4 {
    fn new(dim: usize) -> Self {
        let zero = vec![C64::new(0.0, 0.0); dim];
        Self {
            k: [zero.clone(), zero.clone(), zero.clone(), zero.clone()],
            stage: zero,
        }
    }

    /// `out = ψ(h)` for `dψ/dt = G ψ` starting from `psi`.
    fn step(&mut self, generator: &SparseOperator, psi: &[C64], h: f64, out: &mut [C64]) {
        let [k1, k2, k3, k4] = &mut self.k;
        let stage = &mut self.stage;
        generator.apply_into(psi, k1);
        for ((s, p), k) in stage.iter_mut().zip(psi).zip(k1.iter()) {
            *s = p + k * (0.5 * h);
        }
        generator.apply_into(stage, k2);
        for ((s, p), k) in stage.iter_mut().zip(psi).zip(k2.iter()) {
            *s = p + k * (0.5 * h);
        }
        generator.apply_into(stage, k3);
        for ((s, p), k) in stage.iter_mut().zip(psi).zip(k3.iter()) {
            *s = p + k * h;
        }
        generator.apply_into(stage, k4);
        let w = h / 6.0;
        for (i, o) in out.iter_mut().enumerate() {
            *o = psi[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * w;
        }
    }
}

const TIME_EPS: f64 = 1e-12;

/// Integrates one quantum trajectory of `model` from `initial` (normalized).
pub fn evolve_trajectory(
    model: &Model,
    initial: &StateVector,
    settings: &IntegratorSettings,
    base_seed: u64,
    stream: u64,
) -> Result<TrajectoryRecord> {
    settings.validate()?;
    if initial.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            left: model.dim(),
            right: initial.dim(),
        });
    }
    let initial_norm = initial.norm_sqr();
    if (initial_norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter {
            name: "initial",
            reason: format!("state is not normalized (‖ψ‖² = {initial_norm})"),
        });
    }

    let dim = model.dim();
    let mut rng = trajectory_rng(base_seed, stream);
    let mut rk4 = Rk4::new(dim);
    let mut psi = initial.amplitudes().to_vec();
    let mut trial = vec![C64::new(0.0, 0.0); dim];
    let mut scratch = vec![C64::new(0.0, 0.0); dim];
    let mut norm = norm_sqr(&psi);
    let mut threshold = open_uniform(&mut rng);

    let sample_times = settings.sample_times();
    let observables = model.observables();
    let mut series = vec![Vec::with_capacity(sample_times.len()); observables.len()];
    let mut jumps = Vec::new();
    let mut max_leakage: f64 = 0.0;

    let unitaries = model.unitaries();
    let mut next_unitary = unitaries
        .iter()
        .position(|u| u.time >= settings.t_start - TIME_EPS)
        .unwrap_or(unitaries.len());
    let mut next_sample = 0;
    let mut t = settings.t_start;
    let min_interval = settings.dt * settings.bisection_fraction;

    loop {
        // events due at the current time: samples see the pre-pulse state
        while next_sample < sample_times.len() && sample_times[next_sample] <= t + TIME_EPS {
            for (k, obs) in observables.iter().enumerate() {
                series[k].push(obs.measure(&psi, norm));
            }
            for monitor in model.monitors() {
                max_leakage = max_leakage.max(monitor.measure(&psi, norm));
            }
            next_sample += 1;
        }
        while next_unitary < unitaries.len() && unitaries[next_unitary].time <= t + TIME_EPS {
            unitaries[next_unitary].operator.apply_into(&psi, &mut scratch);
            std::mem::swap(&mut psi, &mut scratch);
            norm = norm_sqr(&psi);
            next_unitary += 1;
        }
        if t >= settings.t_end - TIME_EPS {
            break;
        }

        let segment = model.segment_at(t);
        let mut boundary = settings.t_end;
        if let Some(&ts) = sample_times.get(next_sample) {
            boundary = boundary.min(ts);
        }
        if let Some(u) = unitaries.get(next_unitary) {
            boundary = boundary.min(u.time);
        }
        if let Some(ts) = model.next_switch(segment) {
            if ts > t + TIME_EPS {
                boundary = boundary.min(ts);
            }
        }
        let (h, t_next) = if boundary - t <= settings.dt + TIME_EPS {
            (boundary - t, boundary)
        } else {
            (settings.dt, t + settings.dt)
        };

        let generator = model.generator(segment);
        rk4.step(generator, &psi, h, &mut trial);
        let trial_norm = norm_sqr(&trial);
        if !trial_norm.is_finite() || trial_norm > norm * (1.0 + settings.norm_growth_tolerance) {
            return Err(Error::NormGrowth {
                time: t_next,
                norm_sqr: trial_norm,
            });
        }

        if trial_norm > threshold {
            std::mem::swap(&mut psi, &mut trial);
            norm = trial_norm;
            t = t_next;
            continue;
        }

        // the threshold is crossed inside (t, t + h]
        let (mut lo, mut hi) = (0.0, h);
        while hi - lo > min_interval {
            let mid = 0.5 * (lo + hi);
            rk4.step(generator, &psi, mid, &mut scratch);
            if norm_sqr(&scratch) > threshold {
                lo = mid;
            } else {
                hi = mid;
                std::mem::swap(&mut trial, &mut scratch);
            }
        }
        // `trial` holds ψ(t + hi)
        std::mem::swap(&mut psi, &mut trial);
        t += hi;

        let channel = apply_jump(model, &mut psi, &mut scratch, &mut rng)?;
        jumps.push(JumpEvent {
            time: t,
            channel: model.jumps()[channel].label().to_string(),
        });
        norm = norm_sqr(&psi);
        threshold = open_uniform(&mut rng);
    }

    Ok(TrajectoryRecord {
        labels: observables.iter().map(|o| o.label().to_string()).collect(),
        times: sample_times,
        series,
        jumps,
        base_seed,
        stream,
        max_leakage,
        leakage_flag: max_leakage > settings.leakage_threshold,
    })
}

/// Picks a channel with one uniform draw against cumulative weights
/// `‖c_μ ψ‖²` in model order, and replaces `psi` by the normalized
/// post-jump state.
fn apply_jump(
    model: &Model,
    psi: &mut Vec<C64>,
    scratch: &mut Vec<C64>,
    rng: &mut ChaCha8Rng,
) -> Result<usize> {
    let weights: Vec<f64> = model
        .jumps()
        .iter()
        .map(|j| j.rate_operator().expectation_raw(psi).re.max(0.0))
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    let target = open_uniform(rng) * total;
    let mut cumulative = 0.0;
    let mut chosen = weights.len() - 1;
    for (k, w) in weights.iter().enumerate() {
        cumulative += w;
        if target <= cumulative && *w > 0.0 {
            chosen = k;
            break;
        }
    }
    model.jumps()[chosen].operator().apply_into(psi, scratch);
    let n = norm_sqr(scratch).sqrt();
    if n == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let inv = 1.0 / n;
    scratch.iter_mut().for_each(|z| *z *= inv);
    std::mem::swap(psi, scratch);
    Ok(chosen)
}
