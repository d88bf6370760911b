use flipflop::hilbert::{fock_annihilation, level_transition, SparseOperator, C64};
use flipflop::master::{liouvillian_residual, steady_state, DEFAULT_STEADY_STATE_CAP};
use flipflop::model::JumpChannel;
use flipflop::Error;

const KAPPA: f64 = std::f64::consts::TAU * 0.1;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Cavity (truncation `n`) ⊗ two-level system, resonant exchange `g`,
/// cavity drive `alpha`, cavity decay and two-level decay at 1/12 µs⁻¹.
fn jaynes_cummings(n: usize, g: f64, alpha: f64) -> (SparseOperator, Vec<JumpChannel>, SparseOperator) {
    let a = fock_annihilation(n).unwrap().kron(&SparseOperator::identity(2));
    let sm = SparseOperator::identity(n).kron(&level_transition(2, 1, 0).unwrap());
    let hop = a.adjoint().mul(&sm).unwrap();
    let h = hop
        .add(&hop.adjoint())
        .unwrap()
        .scale(c(g))
        .add(&a.add(&a.adjoint()).unwrap().scale(c(alpha)))
        .unwrap();
    let jumps = vec![
        JumpChannel::new("a", a.scale(c(KAPPA.sqrt()))),
        JumpChannel::new("q", sm.scale(c((1.0f64 / 12.0).sqrt()))),
    ];
    let n_op = a.adjoint().mul(&a).unwrap();
    (h, jumps, n_op)
}

#[test]
fn vacuum_rabi_splitting_blocks_the_drive() {
    let alpha = 8f64.sqrt() * KAPPA / 2.0;
    let (h, jumps, n) = jaynes_cummings(12, std::f64::consts::TAU * 30.0, alpha);
    let rho = steady_state(&h, &jumps, DEFAULT_STEADY_STATE_CAP).unwrap();
    let photons = rho.expectation(&n).unwrap().re;
    assert!(photons < 1e-2 * 8.0, "⟨n⟩ = {photons}");
    assert!(8.0 / photons > 1e3, "suppression only {}", 8.0 / photons);
    assert!(liouvillian_residual(&h, &jumps, &rho).unwrap() < 1e-8);
}

#[test]
fn without_coupling_the_cavity_fills() {
    let alpha = 8f64.sqrt() * KAPPA / 2.0;
    let (h, jumps, n) = jaynes_cummings(12, 0.0, alpha);
    let rho = steady_state(&h, &jumps, DEFAULT_STEADY_STATE_CAP).unwrap();
    let photons = rho.expectation(&n).unwrap().re;
    // 12 levels clip the mean-8 state well below 8, but it is no longer blocked
    assert!(photons > 4.0 && photons < 8.0, "⟨n⟩ = {photons}");
    assert!((rho.trace() - c(1.0)).norm() < 1e-10);
    assert!(rho.hermiticity_error() < 1e-10);
}

#[test]
fn closed_system_has_degenerate_steady_states() {
    let (h, _, _) = jaynes_cummings(3, 1.0, 0.0);
    match steady_state(&h, &[], DEFAULT_STEADY_STATE_CAP) {
        Err(Error::DegenerateSteadyState { basis }) => assert!(basis.len() > 1),
        other => panic!("expected degeneracy, got {other:?}"),
    }
}
