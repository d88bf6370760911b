//! Flip-flop device model: Hamiltonian, dissipation channels, initial state
//! and the Set/Reset pulse schedule.
//!
//! Everything lives in the frame where each resonator rotates at its drive
//! frequency, drives are resonant and the transistor `e`-`f` transitions and
//! qubits are resonant with their resonators. The Hamiltonian is therefore
//! time-independent apart from drives being switched on.
//!
//! Units: time in µs, angular frequencies and rates in rad/µs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    embed, fock_annihilation, level_transition, CompositeSpace, SparseOperator, StateVector,
    Subsystem, C64, TRANSMON_DIM,
};
use crate::model::{JumpChannel, Model, Observable, ScheduledUnitary};

/// Reduced Planck constant in J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

const TWO_PI: f64 = std::f64::consts::TAU;

/// Transmon levels.
pub const G: usize = 0;
pub const E: usize = 1;
pub const F: usize = 2;

/// Physical parameters of the device.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub chi_a1: f64,
    pub chi_a2: f64,
    pub chi_b1: f64,
    pub chi_b2: f64,
    pub chi_ab: f64,
    /// Residual linear resonator-qubit couplings, normally tuned to zero.
    pub g_res_a: f64,
    pub g_res_b: f64,
    pub g_ta: f64,
    pub g_tb: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
    /// Qubit-a/b decay rate.
    pub gamma: f64,
    /// Transistor `e → g` decay rate.
    pub gamma_t: f64,
    pub n_target_a: f64,
    pub n_target_b: f64,
    /// Bare resonator frequencies; only used for the drive-power estimate.
    pub omega_a: f64,
    pub omega_b: f64,
    pub truncation_a: usize,
    pub truncation_b: usize,
    /// Adds an `f → e` transistor decay channel at rate `gamma_t`.
    #[serde(default)]
    pub transistor_f_decay: bool,
}

impl DeviceParams {
    /// The reference device: χ = 2π×(0.98, 0.011, 1.04, 0.012, 0.07) MHz,
    /// κ = 2π×0.1 MHz, qubit T₁ = 12 µs, g_t = 2π×30 MHz, transistor
    /// T₁ = 20 µs, ⟨n⟩ = 8, ω_a = 2π×7 GHz, ω_b = 2π×5 GHz, truncation 20.
    pub fn reference_device() -> Self {
        Self {
            chi_a1: TWO_PI * 0.98,
            chi_a2: TWO_PI * 0.011,
            chi_b1: TWO_PI * 1.04,
            chi_b2: TWO_PI * 0.012,
            chi_ab: TWO_PI * 0.07,
            g_res_a: 0.0,
            g_res_b: 0.0,
            g_ta: TWO_PI * 30.0,
            g_tb: TWO_PI * 30.0,
            kappa_a: TWO_PI * 0.1,
            kappa_b: TWO_PI * 0.1,
            gamma: 1.0 / 12.0,
            gamma_t: 1.0 / 20.0,
            n_target_a: 8.0,
            n_target_b: 8.0,
            omega_a: TWO_PI * 7000.0,
            omega_b: TWO_PI * 5000.0,
            truncation_a: 20,
            truncation_b: 20,
            transistor_f_decay: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("chi_a1", self.chi_a1),
            ("chi_a2", self.chi_a2),
            ("chi_b1", self.chi_b1),
            ("chi_b2", self.chi_b2),
            ("chi_ab", self.chi_ab),
            ("g_res_a", self.g_res_a),
            ("g_res_b", self.g_res_b),
            ("g_ta", self.g_ta),
            ("g_tb", self.g_tb),
            ("kappa_a", self.kappa_a),
            ("kappa_b", self.kappa_b),
            ("gamma", self.gamma),
            ("gamma_t", self.gamma_t),
            ("n_target_a", self.n_target_a),
            ("n_target_b", self.n_target_b),
            ("omega_a", self.omega_a),
            ("omega_b", self.omega_b),
        ];
        for (name, value) in nonneg {
            if !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("{value} is not finite"),
                });
            }
            if value < 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("{value} is negative"),
                });
            }
        }
        for (name, value) in [
            ("truncation_a", self.truncation_a),
            ("truncation_b", self.truncation_b),
        ] {
            if value < 2 {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("{value} < 2"),
                });
            }
        }
        Ok(())
    }

    pub fn space(&self) -> Result<CompositeSpace> {
        CompositeSpace::new(self.truncation_a, self.truncation_b)
    }

    /// Drive amplitude of resonator `a`.
    pub fn alpha(&self) -> f64 {
        drive_amplitude(self.n_target_a, self.kappa_a)
    }

    /// Drive amplitude of resonator `b`.
    pub fn beta(&self) -> f64 {
        drive_amplitude(self.n_target_b, self.kappa_b)
    }

    /// Effective resonator-b/qubit-b coupling induced by `n_a` photons in `a`.
    pub fn coupling_from_a(&self, n_a: f64) -> f64 {
        effective_coupling(self.chi_a1, self.chi_a2, n_a)
    }

    /// Effective resonator-a/qubit-a coupling induced by `n_b` photons in `b`.
    pub fn coupling_from_b(&self, n_b: f64) -> f64 {
        effective_coupling(self.chi_b1, self.chi_b2, n_b)
    }
}

/// Resonant drive amplitude that fills a resonator to `n_target` photons in
/// steady state: `√n κ / 2`.
pub fn drive_amplitude(n_target: f64, kappa: f64) -> f64 {
    n_target.sqrt() * kappa / 2.0
}

/// Saturated cross-coupling `(χ⁽¹⁾ − χ⁽²⁾ n) n`.
pub fn effective_coupling(chi1: f64, chi2: f64, n: f64) -> f64 {
    (chi1 - chi2 * n) * n
}

/// Power radiated by resonator `a` in steady state, `ħ ω κ ⟨n⟩`, in watts.
pub fn drive_power(p: &DeviceParams) -> f64 {
    // rad/µs → rad/s
    HBAR * (p.omega_a * 1e6) * (p.kappa_a * 1e6) * p.n_target_a
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseKind {
    /// π-pulse on transistor `ta`.
    Set,
    /// π-pulse on transistor `tb`.
    Reset,
}

impl PulseKind {
    pub fn target(self) -> Subsystem {
        match self {
            PulseKind::Set => Subsystem::TransistorA,
            PulseKind::Reset => Subsystem::TransistorB,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseEvent {
    pub time: f64,
    pub kind: PulseKind,
}

/// Set/Reset π-pulses and the times at which each resonator drive turns on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub events: Vec<PulseEvent>,
    pub drive_on_a: f64,
    pub drive_on_b: f64,
}

impl Default for PulseSchedule {
    fn default() -> Self {
        Self {
            events: Vec::new(),
            drive_on_a: 0.0,
            drive_on_b: 5.0,
        }
    }
}

impl PulseSchedule {
    /// Checks ordering and that consecutive events are more than `dt` apart.
    pub fn validate(&self, dt: f64) -> Result<()> {
        for (name, t) in [("drive_on_a", self.drive_on_a), ("drive_on_b", self.drive_on_b)] {
            if !t.is_finite() {
                return Err(Error::InvalidSchedule(format!("{name} = {t} is not finite")));
            }
        }
        for ev in &self.events {
            if !ev.time.is_finite() {
                return Err(Error::InvalidSchedule(format!("event time {} is not finite", ev.time)));
            }
        }
        for pair in self.events.windows(2) {
            if pair[1].time <= pair[0].time {
                return Err(Error::InvalidSchedule(format!(
                    "events at {} and {} are not strictly increasing",
                    pair[0].time, pair[1].time
                )));
            }
            if pair[1].time - pair[0].time <= dt {
                return Err(Error::InvalidSchedule(format!(
                    "events at {} and {} fall within one integrator step ({dt} us)",
                    pair[0].time, pair[1].time
                )));
            }
        }
        Ok(())
    }
}

fn real(x: f64) -> C64 {
    Complex64::new(x, 0.0)
}

/// Ladder and level operators embedded in the full space.
struct Operators {
    a: SparseOperator,
    b: SparseOperator,
    sm_qa: SparseOperator,
    sm_qb: SparseOperator,
    fe_ta: SparseOperator,
    fe_tb: SparseOperator,
}

impl Operators {
    fn new(space: &CompositeSpace) -> Result<Self> {
        let a = embed(
            &fock_annihilation(space.dim(Subsystem::ResonatorA))?,
            Subsystem::ResonatorA,
            space,
        )?;
        let b = embed(
            &fock_annihilation(space.dim(Subsystem::ResonatorB))?,
            Subsystem::ResonatorB,
            space,
        )?;
        let sm = level_transition(2, 1, 0)?;
        let fe = level_transition(TRANSMON_DIM, E, F)?;
        Ok(Self {
            a,
            b,
            sm_qa: embed(&sm, Subsystem::QubitA, space)?,
            sm_qb: embed(&sm, Subsystem::QubitB, space)?,
            fe_ta: embed(&fe, Subsystem::TransistorA, space)?,
            fe_tb: embed(&fe, Subsystem::TransistorB, space)?,
        })
    }
}

fn check_space(p: &DeviceParams, space: &CompositeSpace) -> Result<()> {
    for (slot, trunc) in [
        (Subsystem::ResonatorA, p.truncation_a),
        (Subsystem::ResonatorB, p.truncation_b),
    ] {
        if space.dim(slot) != trunc {
            return Err(Error::DimensionMismatch {
                left: space.dim(slot),
                right: trunc,
            });
        }
    }
    Ok(())
}

/// `H_dyn + H_t + H_drive` with both drives on.
pub fn build_hamiltonian(p: &DeviceParams, space: &CompositeSpace) -> Result<SparseOperator> {
    build_hamiltonian_with_drives(p, space, true, true)
}

/// Device Hamiltonian with each resonator drive switched on or off.
pub fn build_hamiltonian_with_drives(
    p: &DeviceParams,
    space: &CompositeSpace,
    drive_a: bool,
    drive_b: bool,
) -> Result<SparseOperator> {
    p.validate()?;
    check_space(p, space)?;
    let ops = Operators::new(space)?;
    let dim = space.total_dim();
    let levels: Vec<[usize; 6]> = (0..dim).map(|i| space.levels_of(i)).collect();

    // Photon-number-dependent couplings are diagonal in the Fock basis, so
    // (g + f(n_a)) (b†σ_b− + bσ_b+) is assembled by scaling each entry of the
    // exchange term by the value of f at the (unchanged) a-photon number.
    let exchange_b = ops
        .b
        .adjoint()
        .mul(&ops.sm_qb)?
        .add(&ops.b.mul(&ops.sm_qb.adjoint())?)?;
    let exchange_a = ops
        .a
        .adjoint()
        .mul(&ops.sm_qa)?
        .add(&ops.a.mul(&ops.sm_qa.adjoint())?)?;
    let h_a = SparseOperator::from_triplets(
        dim,
        exchange_b.entries().map(|(r, c, v)| {
            let n_a = levels[c][Subsystem::ResonatorA.index()] as f64;
            (r, c, v * (p.g_res_a + p.coupling_from_a(n_a)))
        }),
    );
    let h_b = SparseOperator::from_triplets(
        dim,
        exchange_a.entries().map(|(r, c, v)| {
            let n_b = levels[c][Subsystem::ResonatorB.index()] as f64;
            (r, c, v * (p.g_res_b + p.coupling_from_b(n_b)))
        }),
    );
    let kerr = SparseOperator::diagonal(
        &levels
            .iter()
            .map(|l| {
                real(p.chi_ab * (l[Subsystem::ResonatorA.index()] * l[Subsystem::ResonatorB.index()]) as f64)
            })
            .collect::<Vec<_>>(),
    );

    let t_a = ops.fe_ta.mul(&ops.a)?.scale(real(p.g_ta));
    let t_b = ops.fe_tb.mul(&ops.b)?.scale(real(p.g_tb));
    let h_t = t_a.add(&t_a.adjoint())?.add(&t_b)?.add(&t_b.adjoint())?;

    let mut h = h_a.add(&h_b)?.add(&kerr)?.add(&h_t)?;
    if drive_a {
        h = h.add(&ops.a.add(&ops.a.adjoint())?.scale(real(p.alpha())))?;
    }
    if drive_b {
        h = h.add(&ops.b.add(&ops.b.adjoint())?.scale(real(p.beta())))?;
    }
    Ok(h)
}

/// Dissipation channels: photon loss from both resonators, qubit decay and
/// transistor `e → g` decay (plus `f → e` when enabled). Channels with zero
/// rate are dropped.
pub fn build_jump_operators(p: &DeviceParams, space: &CompositeSpace) -> Result<Vec<JumpChannel>> {
    p.validate()?;
    check_space(p, space)?;
    let ops = Operators::new(space)?;
    let eg = level_transition(TRANSMON_DIM, E, G)?;
    let mut channels = vec![
        ("a", p.kappa_a, ops.a),
        ("b", p.kappa_b, ops.b),
        ("qa", p.gamma, ops.sm_qa),
        ("qb", p.gamma, ops.sm_qb),
        ("ta", p.gamma_t, embed(&eg, Subsystem::TransistorA, space)?),
        ("tb", p.gamma_t, embed(&eg, Subsystem::TransistorB, space)?),
    ];
    if p.transistor_f_decay {
        let fe_down = level_transition(TRANSMON_DIM, F, E)?;
        channels.push(("ta_fe", p.gamma_t, embed(&fe_down, Subsystem::TransistorA, space)?));
        channels.push(("tb_fe", p.gamma_t, embed(&fe_down, Subsystem::TransistorB, space)?));
    }
    Ok(channels
        .into_iter()
        .filter(|(_, rate, _)| *rate > 0.0)
        .map(|(label, rate, op)| JumpChannel::new(label, op.scale(real(rate.sqrt()))))
        .collect())
}

/// Instantaneous π-rotation on the `g`-`e` transition of a transistor:
/// `|g⟩ → −i|e⟩`, `|e⟩ → −i|g⟩`, `|f⟩` untouched.
pub fn pi_pulse_operator(target: Subsystem, space: &CompositeSpace) -> Result<SparseOperator> {
    if !matches!(target, Subsystem::TransistorA | Subsystem::TransistorB) {
        return Err(Error::InvalidParameter {
            name: "target",
            reason: format!("π-pulses address transistors, not `{}`", target.name()),
        });
    }
    let minus_i = Complex64::new(0.0, -1.0);
    let u = SparseOperator::from_triplets(
        TRANSMON_DIM,
        [(E, G, minus_i), (G, E, minus_i), (F, F, real(1.0))],
    );
    embed(&u, target, space)
}

pub fn apply_pi_pulse(
    state: &StateVector,
    target: Subsystem,
    space: &CompositeSpace,
) -> Result<StateVector> {
    pi_pulse_operator(target, space)?.apply(state)
}

/// Everything empty: `|0⟩_a |0⟩_b |g⟩_qa |g⟩_qb |g⟩_ta |g⟩_tb`.
pub fn initial_state(space: &CompositeSpace) -> StateVector {
    StateVector::basis(space.total_dim(), 0)
}

/// Column names of the standard observables, in record order.
pub const OBSERVABLE_LABELS: [&str; 6] = ["n_a", "n_b", "p_qa", "p_qb", "ta_fg", "tb_fg"];

/// `⟨a†a⟩`, `⟨b†b⟩`, qubit excited populations and transistor
/// `⟨|f⟩⟨f| − |g⟩⟨g|⟩`.
pub fn standard_observables(space: &CompositeSpace) -> Result<Vec<Observable>> {
    let diag = |f: &dyn Fn([usize; 6]) -> f64| -> SparseOperator {
        SparseOperator::diagonal(
            &(0..space.total_dim())
                .map(|i| real(f(space.levels_of(i))))
                .collect::<Vec<_>>(),
        )
    };
    let fg = |slot: usize| {
        move |l: [usize; 6]| match l[slot] {
            F => 1.0,
            G => -1.0,
            _ => 0.0,
        }
    };
    let ops = [
        diag(&|l| l[0] as f64),
        diag(&|l| l[1] as f64),
        diag(&|l| l[2] as f64),
        diag(&|l| l[3] as f64),
        diag(&fg(4)),
        diag(&fg(5)),
    ];
    Ok(OBSERVABLE_LABELS
        .iter()
        .zip(ops)
        .map(|(label, op)| Observable::new(*label, op))
        .collect())
}

/// Population of the top two Fock levels of each resonator.
pub fn leakage_monitors(space: &CompositeSpace) -> Vec<Observable> {
    [Subsystem::ResonatorA, Subsystem::ResonatorB]
        .into_iter()
        .map(|slot| {
            let top = space.dim(slot) - 2;
            let op = SparseOperator::diagonal(
                &(0..space.total_dim())
                    .map(|i| real(if space.levels_of(i)[slot.index()] >= top { 1.0 } else { 0.0 }))
                    .collect::<Vec<_>>(),
            );
            Observable::new(if slot == Subsystem::ResonatorA { "leak_a" } else { "leak_b" }, op)
        })
        .collect()
}

/// Assembles the full simulation model: piecewise-constant Hamiltonian
/// following the drive-on times, jump channels, π-pulses and observables.
pub fn build_model(p: &DeviceParams, schedule: &PulseSchedule, dt: f64) -> Result<Model> {
    schedule.validate(dt)?;
    let space = p.space()?;
    let mut switch_times = vec![schedule.drive_on_a, schedule.drive_on_b];
    switch_times.sort_by(f64::total_cmp);
    let mut segments = vec![(
        f64::NEG_INFINITY,
        build_hamiltonian_with_drives(p, &space, false, false)?,
    )];
    for t in switch_times {
        let h = build_hamiltonian_with_drives(
            p,
            &space,
            schedule.drive_on_a <= t,
            schedule.drive_on_b <= t,
        )?;
        segments.push((t, h));
    }
    let pulses = schedule
        .events
        .iter()
        .map(|ev| {
            Ok(ScheduledUnitary {
                time: ev.time,
                label: format!("{:?}", ev.kind).to_lowercase(),
                operator: pi_pulse_operator(ev.kind.target(), &space)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Model::new(
        segments,
        build_jump_operators(p, &space)?,
        pulses,
        standard_observables(&space)?,
        leakage_monitors(&space),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_params() -> DeviceParams {
        DeviceParams {
            truncation_a: 4,
            truncation_b: 4,
            ..DeviceParams::reference_device()
        }
    }

    fn zero_params() -> DeviceParams {
        DeviceParams {
            chi_a1: 0.0,
            chi_a2: 0.0,
            chi_b1: 0.0,
            chi_b2: 0.0,
            chi_ab: 0.0,
            g_ta: 0.0,
            g_tb: 0.0,
            n_target_a: 0.0,
            n_target_b: 0.0,
            ..small_params()
        }
    }

    #[test]
    fn all_couplings_off_gives_zero_hamiltonian() {
        let p = zero_params();
        let h = build_hamiltonian(&p, &p.space().unwrap()).unwrap();
        assert!(h.is_zero());
    }

    #[test]
    fn cross_coupling_matrix_element() {
        let p = DeviceParams {
            chi_a1: 3.0,
            chi_a2: 0.25,
            ..zero_params()
        };
        let s = p.space().unwrap();
        let h = build_hamiltonian(&p, &s).unwrap();
        let row = s.index_of([1, 0, 0, 1, 0, 0]).unwrap();
        let col = s.index_of([1, 1, 0, 0, 0, 0]).unwrap();
        assert_relative_eq!(h.get(row, col).re, 3.0 - 0.25, epsilon = 1e-14);
        assert_eq!(h.get(row, col).im, 0.0);
        // n_a in 1..=3, n_b in 0..=2, both exchange directions, qa and transistors free
        assert_eq!(h.nnz(), 3 * 3 * 2 * 2 * 9);
    }

    #[test]
    fn hamiltonian_is_hermitian() {
        let p = DeviceParams {
            g_res_a: 0.3,
            g_res_b: 0.2,
            ..small_params()
        };
        let h = build_hamiltonian(&p, &p.space().unwrap()).unwrap();
        assert!(h.is_hermitian(1e-12));
    }

    #[test]
    fn effective_couplings_at_eight_photons() {
        let p = DeviceParams::reference_device();
        assert_relative_eq!(p.coupling_from_a(8.0), TWO_PI * 7.1, max_relative = 0.01);
        assert_relative_eq!(p.coupling_from_a(8.0), 44.6, max_relative = 0.01);
        assert_relative_eq!(p.coupling_from_b(8.0), TWO_PI * 7.6, max_relative = 0.01);
    }

    #[test]
    fn support_pattern_without_saturation() {
        let p = DeviceParams {
            chi_a2: 0.0,
            chi_b2: 0.0,
            ..small_params()
        };
        let s = p.space().unwrap();
        let h = build_hamiltonian(&p, &s).unwrap();
        for (r, c, _) in h.entries() {
            if r == c {
                continue;
            }
            let (lr, lc) = (s.levels_of(r), s.levels_of(c));
            let diff: Vec<i64> = (0..6).map(|k| lr[k] as i64 - lc[k] as i64).collect();
            let changed: Vec<usize> = (0..6).filter(|&k| diff[k] != 0).collect();
            let ok = match changed.as_slice() {
                // drive: one photon in a or b
                [k] => *k < 2 && diff[*k].abs() == 1,
                // H_a: b photon <-> qubit-b; H_b: a photon <-> qubit-a
                [1, 3] | [0, 2] => diff[changed[0]] == -diff[changed[1]],
                // H_t: a photon <-> ta (e <-> f); b photon <-> tb
                [0, 4] | [1, 5] => {
                    diff[changed[0]] == -diff[changed[1]]
                        && lr[changed[1]].min(lc[changed[1]]) == E
                }
                _ => false,
            };
            assert!(ok, "unexpected coupling {lc:?} -> {lr:?}");
        }
    }

    #[test]
    fn jump_channels() {
        let p = small_params();
        let s = p.space().unwrap();
        let jumps = build_jump_operators(&p, &s).unwrap();
        let labels: Vec<&str> = jumps.iter().map(|j| j.label()).collect();
        assert_eq!(labels, ["a", "b", "qa", "qb", "ta", "tb"]);

        let ground = initial_state(&s);
        for j in &jumps {
            assert_eq!(j.operator().apply(&ground).unwrap().norm_sqr(), 0.0);
        }

        let one = s.basis_state([1, 0, 0, 0, 0, 0]).unwrap();
        let out = jumps[0].operator().apply(&one).unwrap();
        assert_relative_eq!(out.amplitudes()[0].re, p.kappa_a.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(out.norm_sqr(), p.kappa_a, epsilon = 1e-14);

        let p0 = DeviceParams { kappa_a: 0.0, ..p.clone() };
        let jumps = build_jump_operators(&p0, &s).unwrap();
        assert_eq!(jumps.len(), 5);
        assert!(jumps.iter().all(|j| j.label() != "a"));

        let pf = DeviceParams { transistor_f_decay: true, ..p };
        assert_eq!(build_jump_operators(&pf, &s).unwrap().len(), 8);
    }

    #[test]
    fn reference_cavity_decay_rate() {
        let p = DeviceParams::reference_device();
        assert_relative_eq!(p.kappa_a, 0.6283, epsilon = 1e-4);
        assert_relative_eq!(1.0 / p.kappa_a, 1.59, epsilon = 0.01);
    }

    #[test]
    fn pi_pulses() {
        let s = small_params().space().unwrap();
        let psi = s.basis_state([2, 1, 1, 0, 0, 2]).unwrap();
        let once = apply_pi_pulse(&psi, Subsystem::TransistorA, &s).unwrap();
        let target = s.index_of([2, 1, 1, 0, E, 2]).unwrap();
        assert_eq!(once.amplitudes()[target], Complex64::new(0.0, -1.0));
        assert_eq!(once.norm_sqr(), 1.0);

        let twice = apply_pi_pulse(&once, Subsystem::TransistorA, &s).unwrap();
        assert_eq!(twice, psi.scale(real(-1.0)));

        // tb is in f
        let untouched = apply_pi_pulse(&psi, Subsystem::TransistorB, &s).unwrap();
        assert_eq!(untouched, psi);

        assert!(apply_pi_pulse(&psi, Subsystem::QubitA, &s).is_err());
    }

    #[test]
    fn ground_initial_state() {
        let s = small_params().space().unwrap();
        let psi = initial_state(&s);
        assert_eq!(psi.norm_sqr(), 1.0);
        let obs = standard_observables(&s).unwrap();
        let values: Vec<f64> = obs
            .iter()
            .map(|o| o.operator().expectation(&psi).unwrap().re)
            .collect();
        assert_eq!(values, [0.0, 0.0, 0.0, 0.0, -1.0, -1.0]);
    }

    #[test]
    fn drive_power_estimate() {
        let p = DeviceParams::reference_device();
        let w = drive_power(&p);
        assert_relative_eq!(w, 2.3e-17, max_relative = 0.02);
        assert!(w / 2e-17 < 1.5 && w / 2e-17 > 1.0 / 1.5);
        let doubled = DeviceParams { n_target_a: 16.0, ..p.clone() };
        assert_relative_eq!(drive_power(&doubled), 2.0 * w, max_relative = 1e-15);
        let empty = DeviceParams { n_target_a: 0.0, ..p };
        assert_eq!(drive_power(&empty), 0.0);
    }

    #[test]
    fn drive_amplitude_rule() {
        let p = DeviceParams::reference_device();
        assert_relative_eq!(p.alpha(), 8f64.sqrt() * p.kappa_a / 2.0);
        assert_relative_eq!(4.0 * p.alpha().powi(2) / p.kappa_a.powi(2), 8.0, epsilon = 1e-12);
    }

    #[test]
    fn invalid_parameters() {
        let mut p = small_params();
        p.kappa_a = -1.0;
        assert!(matches!(p.validate(), Err(Error::InvalidParameter { name: "kappa_a", .. })));
        p.kappa_a = f64::NAN;
        assert!(build_hamiltonian(&p, &CompositeSpace::new(4, 4).unwrap()).is_err());
        let p = small_params();
        assert!(matches!(
            build_hamiltonian(&p, &CompositeSpace::new(5, 4).unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn schedule_validation() {
        let ev = |time, kind| PulseEvent { time, kind };
        let ok = PulseSchedule {
            events: vec![ev(10.0, PulseKind::Set), ev(20.0, PulseKind::Reset)],
            ..Default::default()
        };
        assert!(ok.validate(0.0005).is_ok());
        let unsorted = PulseSchedule {
            events: vec![ev(20.0, PulseKind::Set), ev(10.0, PulseKind::Reset)],
            ..Default::default()
        };
        assert!(unsorted.validate(0.0005).is_err());
        let close = PulseSchedule {
            events: vec![ev(10.0, PulseKind::Set), ev(10.0002, PulseKind::Reset)],
            ..Default::default()
        };
        assert!(close.validate(0.0005).is_err());
    }
}
