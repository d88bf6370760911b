//! Self-checks of the solvers against each other and against closed forms.

use rand::Rng;
use serde::Serialize;

use flipflop::hilbert::{fock_annihilation, level_transition, SparseOperator, StateVector, C64};
use flipflop::master::{evolve_master_equation, steady_state, DensityMatrix, DEFAULT_DIMENSION_CAP, DEFAULT_STEADY_STATE_CAP};
use flipflop::model::{JumpChannel, Model, Observable};
use flipflop::ensemble::run_ensemble;
use flipflop::trajectory::{trajectory_rng, IntegratorSettings};

use crate::error::CliError;
use crate::output::OutputDir;

/// Number of standard errors allowed between ensemble means and exact values.
pub const SIGMA: f64 = 3.0;
/// Absolute slack added to every statistical comparison. Where the ensemble
/// is nearly deterministic (t = 0, or a coherent state that jumps leave
/// unchanged) its standard error drops below the integrator error.
pub const COMPARISON_FLOOR: f64 = 1e-6;
/// Driven-cavity truncation used by `validate`; at 20 levels jumps amplify
/// the clipped tail and 200 trajectories underestimate the spread.
pub const CAVITY_TRUNCATION: usize = 30;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub limit: f64,
    pub note: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

#[derive(Clone, Copy, Debug)]
pub struct ValidationSettings {
    pub seed: u64,
    /// Trajectories per random system.
    pub random_traj: usize,
    pub random_systems: usize,
    /// Trajectories of the driven-cavity oracle.
    pub cavity_traj: usize,
}

impl Default for ValidationSettings {
    fn default() -> Self {
        Self {
            seed: 0,
            random_traj: 500,
            random_systems: 10,
            cavity_traj: 200,
        }
    }
}

pub fn run(settings: &ValidationSettings, out: &mut OutputDir) -> Result<ValidationReport, CliError> {
    let mut checks = random_suite(settings.seed, settings.random_systems, settings.random_traj)?;
    checks.extend(steady_state_checks()?);
    checks.push(blockade_check()?);
    checks.extend(driven_cavity_oracle(settings.seed, settings.cavity_traj)?);
    let report = ValidationReport {
        seed: settings.seed,
        passed: checks.iter().all(|c| c.passed),
        checks,
    };
    out.write_json("validate.json", &report)?;
    Ok(report)
}

/// Worst ratio `|mean − exact| / (σ·stderr + floor)` over a series; the
/// comparison passes when it is at most one.
pub fn worst_excess(mean: &[f64], stderr: &[f64], exact: &[f64]) -> f64 {
    mean.iter()
        .zip(stderr)
        .zip(exact)
        .map(|((m, s), e)| (m - e).abs() / (SIGMA * s + COMPARISON_FLOOR))
        .fold(0.0, f64::max)
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn random_complex(rng: &mut impl Rng) -> C64 {
    c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// A random system of dimension 2-5 with one or two dense jump operators.
pub fn random_system(seed: u64, index: usize) -> Result<(Model, StateVector), CliError> {
    let mut rng = trajectory_rng(seed, index as u64);
    let dim = 2 + index % 4;
    let mut triplets = Vec::new();
    for r in 0..dim {
        triplets.push((r, r, c(rng.random_range(-1.0..1.0), 0.0)));
        for col in r + 1..dim {
            let z = random_complex(&mut rng);
            triplets.push((r, col, z));
            triplets.push((col, r, z.conj()));
        }
    }
    let h = SparseOperator::from_triplets(dim, triplets);
    let jumps = (0..1 + index % 2)
        .map(|k| {
            let scale = rng.random_range(0.3..0.8) / dim as f64;
            let entries: Vec<_> = (0..dim * dim)
                .map(|n| (n / dim, n % dim, random_complex(&mut rng) * scale))
                .collect();
            JumpChannel::new(format!("c{k}"), SparseOperator::from_triplets(dim, entries))
        })
        .collect();
    let mut psi = StateVector::from_amplitudes((0..dim).map(|_| random_complex(&mut rng)).collect());
    psi.normalize()?;
    let p0 = SparseOperator::from_triplets(dim, [(0, 0, c(1.0, 0.0))]);
    let model = Model::simple(h, jumps, vec![Observable::new("p0", p0)])?;
    Ok((model, psi))
}

/// MCWF ensemble means against the master equation for random small systems.
pub fn random_suite(seed: u64, systems: usize, n_traj: usize) -> Result<Vec<Check>, CliError> {
    let settings = IntegratorSettings::new(0.0, 2.0, 0.005, 0.5);
    (0..systems)
        .map(|i| {
            let (model, psi) = random_system(seed, i)?;
            let ens = run_ensemble(&model, &psi, &settings, n_traj, seed.wrapping_add(1 + i as u64))?;
            let me = evolve_master_equation(&model, &DensityMatrix::from_pure(&psi), &settings, DEFAULT_DIMENSION_CAP)?;
            let exact = me.expectation_series(model.observables()[0].operator())?;
            let excess = worst_excess(&ens.mean[0], &ens.stderr[0], &exact);
            Ok(Check {
                name: format!("mcwf_vs_me_random_{i}"),
                passed: excess <= 1.0,
                measured: excess,
                limit: 1.0,
                note: format!(
                    "dim {}, {} jump channels, {n_traj} trajectories, worst |Δ|/({SIGMA}σ + {COMPARISON_FLOOR:e})",
                    model.dim(),
                    model.jumps().len()
                ),
            })
        })
        .collect()
}

fn driven_cavity(truncation: usize, kappa: f64, n_target: f64) -> Result<(SparseOperator, Vec<JumpChannel>, SparseOperator), CliError> {
    let a = fock_annihilation(truncation)?;
    let alpha = n_target.sqrt() * kappa / 2.0;
    let h = a.add(&a.adjoint())?.scale(c(alpha, 0.0));
    let n = a.adjoint().mul(&a)?;
    Ok((h, vec![JumpChannel::new("a", a.scale(c(kappa.sqrt(), 0.0)))], n))
}

const KAPPA: f64 = std::f64::consts::TAU * 0.1;

pub fn steady_state_checks() -> Result<Vec<Check>, CliError> {
    let (h, jumps, n) = driven_cavity(10, KAPPA, 0.0)?;
    let rho = steady_state(&h, &jumps, DEFAULT_STEADY_STATE_CAP)?;
    let vacuum_error = (rho.get(0, 0) - c(1.0, 0.0)).norm().max(rho.expectation(&n)?.norm());

    let (h, jumps, n30) = driven_cavity(30, KAPPA, 8.0)?;
    let rho = steady_state(&h, &jumps, DEFAULT_STEADY_STATE_CAP)?;
    let n_driven = rho.expectation(&n30)?.re;
    let relative = (n_driven - 8.0).abs() / 8.0;
    Ok(vec![
        Check {
            name: "steady_state_vacuum".into(),
            passed: vacuum_error < 1e-9,
            measured: vacuum_error,
            limit: 1e-9,
            note: "undriven damped cavity: max(|ρ₀₀ − 1|, |⟨n⟩|)".into(),
        },
        Check {
            name: "steady_state_driven_cavity".into(),
            passed: relative < 1e-6,
            measured: relative,
            limit: 1e-6,
            note: format!("⟨n⟩ = {n_driven:.9} against 4α²/κ² = 8 at truncation 30"),
        },
    ])
}

/// Driven cavity resonantly coupled to a two-level system with
/// g = 2π×30 MHz: the vacuum Rabi splitting detunes the drive.
pub fn blockade_photon_number(truncation: usize) -> Result<f64, CliError> {
    let a = fock_annihilation(truncation)?;
    let sm = level_transition(2, 1, 0)?;
    let id_c = SparseOperator::identity(truncation);
    let id_q = SparseOperator::identity(2);
    let a_full = a.kron(&id_q);
    let sm_full = id_c.kron(&sm);
    let g = std::f64::consts::TAU * 30.0;
    let alpha = 8f64.sqrt() * KAPPA / 2.0;
    let hop = a_full.adjoint().mul(&sm_full)?;
    let h = hop
        .add(&hop.adjoint())?
        .scale(c(g, 0.0))
        .add(&a_full.add(&a_full.adjoint())?.scale(c(alpha, 0.0)))?;
    let jumps = vec![
        JumpChannel::new("a", a_full.scale(c(KAPPA.sqrt(), 0.0))),
        JumpChannel::new("q", sm_full.scale(c((1.0f64 / 12.0).sqrt(), 0.0))),
    ];
    let rho = steady_state(&h, &jumps, DEFAULT_STEADY_STATE_CAP)?;
    Ok(rho.expectation(&a_full.adjoint().mul(&a_full)?)?.re)
}

pub fn blockade_check() -> Result<Check, CliError> {
    let n = blockade_photon_number(12)?;
    Ok(Check {
        name: "blockade".into(),
        passed: n < 8.0e-3,
        measured: n,
        limit: 8.0e-3,
        note: "steady ⟨a†a⟩ with g = 2π×30 MHz and a drive for ⟨n⟩ = 8, truncation 12".into(),
    })
}

/// `⟨n⟩(1 − e^{−κt/2})²` for a resonantly driven cavity starting in vacuum.
pub fn driven_cavity_curve(n_target: f64, kappa: f64, t: f64) -> f64 {
    n_target * (1.0 - (-kappa * t / 2.0).exp()).powi(2)
}

/// Ensemble mean, standard error, master-equation and closed-form curves of
/// a driven cavity (⟨n⟩ = 8) filling from vacuum, sampled every µs to 40 µs.
pub struct CavityComparison {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub master: Vec<f64>,
    pub closed: Vec<f64>,
}

pub fn driven_cavity_comparison(truncation: usize, seed: u64, n_traj: usize) -> Result<CavityComparison, CliError> {
    let (h, jumps, n) = driven_cavity(truncation, KAPPA, 8.0)?;
    let model = Model::simple(h, jumps, vec![Observable::new("n", n.clone())])?;
    let settings = IntegratorSettings::new(0.0, 40.0, 0.005, 1.0);
    let vacuum = StateVector::basis(truncation, 0);
    let mut ens = run_ensemble(&model, &vacuum, &settings, n_traj, seed)?;
    let me = evolve_master_equation(&model, &DensityMatrix::from_pure(&vacuum), &settings, DEFAULT_DIMENSION_CAP)?;
    let closed = ens.times.iter().map(|&t| driven_cavity_curve(8.0, KAPPA, t)).collect();
    Ok(CavityComparison {
        master: me.expectation_series(&n)?,
        closed,
        mean: std::mem::take(&mut ens.mean[0]),
        stderr: std::mem::take(&mut ens.stderr[0]),
        times: ens.times,
    })
}

/// Driven cavity ensemble against the master equation and against the
/// closed-form filling curve.
pub fn driven_cavity_oracle(seed: u64, n_traj: usize) -> Result<Vec<Check>, CliError> {
    let cmp = driven_cavity_comparison(CAVITY_TRUNCATION, seed, n_traj)?;
    let vs_me = worst_excess(&cmp.mean, &cmp.stderr, &cmp.master);
    let vs_closed = worst_excess(&cmp.mean, &cmp.stderr, &cmp.closed);
    Ok(vec![
        Check {
            name: "driven_cavity_vs_me".into(),
            passed: vs_me <= 1.0,
            measured: vs_me,
            limit: 1.0,
            note: format!(
                "{n_traj} trajectories, truncation {CAVITY_TRUNCATION}, worst |Δ|/({SIGMA}σ + {COMPARISON_FLOOR:e})"
            ),
        },
        Check {
            name: "driven_cavity_vs_closed_form".into(),
            passed: vs_closed <= 1.0,
            measured: vs_closed,
            limit: 1.0,
            note: "against ⟨n⟩(1 − e^{−κt/2})²".into(),
        },
    ])
}
