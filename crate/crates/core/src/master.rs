//! Dense Lindblad master-equation integration and steady states, used to
//! cross-check the trajectory engine at small truncations.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hilbert::{SparseOperator, StateVector, C64};
use crate::model::{JumpChannel, Model};
use crate::trajectory::IntegratorSettings;

/// Largest Hilbert dimension accepted by [`evolve_master_equation`].
pub const DEFAULT_DIMENSION_CAP: usize = 400;
/// Largest Hilbert dimension accepted by [`steady_state`]; the vectorized
/// Liouvillian is dense with `dim⁴` entries.
pub const DEFAULT_STEADY_STATE_CAP: usize = 40;

/// Row-major dense density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl DensityMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    /// `|ψ⟩⟨ψ|`
    pub fn from_pure(state: &StateVector) -> Self {
        let psi = state.amplitudes();
        let dim = psi.len();
        let mut rho = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                rho.data[i * dim + j] = psi[i] * psi[j].conj();
            }
        }
        rho
    }

    pub fn from_data(dim: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                left: dim * dim,
                right: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim + j]
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// `Tr(O ρ)`
    pub fn expectation(&self, op: &SparseOperator) -> Result<C64> {
        if op.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: op.dim(),
            });
        }
        Ok(op.entries().map(|(r, c, v)| v * self.get(c, r)).sum())
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    fn axpy(&mut self, factor: f64, other: &[C64]) {
        for (x, y) in self.data.iter_mut().zip(other) {
            *x += y * factor;
        }
    }
}

/// `out += op · rho` for row-major dense `rho`.
fn left_mul_add(op: &SparseOperator, rho: &[C64], dim: usize, out: &mut [C64]) {
    for r in 0..dim {
        for (k, v) in op.row(r) {
            let src = &rho[k * dim..(k + 1) * dim];
            let dst = &mut out[r * dim..(r + 1) * dim];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += v * s;
            }
        }
    }
}

/// `out += rho · op†` for row-major dense `rho`.
fn right_mul_adjoint_add(rho: &[C64], op: &SparseOperator, dim: usize, out: &mut [C64]) {
    // (ρ O†)[i][j] = Σ_k ρ[i][k] conj(O[j][k])
    for j in 0..dim {
        for (k, v) in op.row(j) {
            let vc = v.conj();
            for i in 0..dim {
                out[i * dim + j] += rho[i * dim + k] * vc;
            }
        }
    }
}

/// Lindbladian `L(ρ) = Gρ + ρG† + Σ c ρ c†` with `G = −iH − ½ Σ c†c`.
struct Lindbladian<'a> {
    generator: &'a SparseOperator,
    jumps: &'a [JumpChannel],
    dim: usize,
    scratch: Vec<C64>,
}

impl<'a> Lindbladian<'a> {
    fn new(generator: &'a SparseOperator, jumps: &'a [JumpChannel]) -> Self {
        let dim = generator.dim();
        Self {
            generator,
            jumps,
            dim,
            scratch: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    fn apply(&mut self, rho: &[C64], out: &mut [C64]) {
        let dim = self.dim;
        out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        left_mul_add(self.generator, rho, dim, out);
        right_mul_adjoint_add(rho, self.generator, dim, out);
        for j in self.jumps {
            self.scratch.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            left_mul_add(j.operator(), rho, dim, &mut self.scratch);
            right_mul_adjoint_add(&self.scratch, j.operator(), dim, out);
        }
    }
}

fn generator(h: &SparseOperator, jumps: &[JumpChannel]) -> Result<SparseOperator> {
    let mut g = h.scale(C64::new(0.0, -1.0));
    for j in jumps {
        g = g.add(&j.rate_operator().scale(C64::new(-0.5, 0.0)))?;
    }
    Ok(g)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MasterEquationSolution {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

impl MasterEquationSolution {
    /// `Tr(O ρ(t))` at every sample time (real part).
    pub fn expectation_series(&self, op: &SparseOperator) -> Result<Vec<f64>> {
        self.states
            .iter()
            .map(|rho| rho.expectation(op).map(|z| z.re))
            .collect()
    }
}

/// Fixed-step fourth-order integration of the Lindblad equation for `model`
/// (Hamiltonian segments and scheduled unitaries included), sampled on the
/// same grid as trajectories.
pub fn evolve_master_equation(
    model: &Model,
    initial: &DensityMatrix,
    settings: &IntegratorSettings,
    dimension_cap: usize,
) -> Result<MasterEquationSolution> {
    settings.validate()?;
    let dim = model.dim();
    if dim > dimension_cap {
        return Err(Error::DimensionCap {
            dim,
            cap: dimension_cap,
        });
    }
    if initial.dim() != dim {
        return Err(Error::DimensionMismatch {
            left: dim,
            right: initial.dim(),
        });
    }
    let generators = model
        .hamiltonians()
        .iter()
        .map(|(_, h)| generator(h, model.jumps()))
        .collect::<Result<Vec<_>>>()?;

    const EPS: f64 = 1e-12;
    let sample_times = settings.sample_times();
    let unitaries = model.unitaries();
    let mut next_unitary = unitaries
        .iter()
        .position(|u| u.time >= settings.t_start - EPS)
        .unwrap_or(unitaries.len());
    let mut next_sample = 0;
    let mut rho = initial.clone();
    let mut t = settings.t_start;
    let mut states = Vec::with_capacity(sample_times.len());
    let n2 = dim * dim;
    let mut k = [vec![C64::new(0.0, 0.0); n2], vec![C64::new(0.0, 0.0); n2], vec![C64::new(0.0, 0.0); n2], vec![C64::new(0.0, 0.0); n2]];
    let mut stage = vec![C64::new(0.0, 0.0); n2];

    loop {
        while next_sample < sample_times.len() && sample_times[next_sample] <= t + EPS {
            states.push(rho.clone());
            next_sample += 1;
        }
        while next_unitary < unitaries.len() && unitaries[next_unitary].time <= t + EPS {
            let u = &unitaries[next_unitary].operator;
            let mut tmp = vec![C64::new(0.0, 0.0); n2];
            left_mul_add(u, &rho.data, dim, &mut tmp);
            let mut out = vec![C64::new(0.0, 0.0); n2];
            right_mul_adjoint_add(&tmp, u, dim, &mut out);
            rho.data = out;
            next_unitary += 1;
        }
        if t >= settings.t_end - EPS {
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
            if ts > t + EPS {
                boundary = boundary.min(ts);
            }
        }
        let (h, t_next) = if boundary - t <= settings.dt + EPS {
            (boundary - t, boundary)
        } else {
            (settings.dt, t + settings.dt)
        };

        let mut l = Lindbladian::new(&generators[segment], model.jumps());
        let [k1, k2, k3, k4] = &mut k;
        l.apply(&rho.data, k1);
        for ((s, r), d) in stage.iter_mut().zip(&rho.data).zip(k1.iter()) {
            *s = r + d * (0.5 * h);
        }
        l.apply(&stage, k2);
        for ((s, r), d) in stage.iter_mut().zip(&rho.data).zip(k2.iter()) {
            *s = r + d * (0.5 * h);
        }
        l.apply(&stage, k3);
        for ((s, r), d) in stage.iter_mut().zip(&rho.data).zip(k3.iter()) {
            *s = r + d * h;
        }
        l.apply(&stage, k4);
        rho.axpy(h / 6.0, k1);
        rho.axpy(h / 3.0, k2);
        rho.axpy(h / 3.0, k3);
        rho.axpy(h / 6.0, k4);
        t = t_next;
    }
    Ok(MasterEquationSolution {
        times: sample_times,
        states,
    })
}

/// Residual `‖L(ρ)‖_F` of a density matrix under `(H, jumps)`.
pub fn liouvillian_residual(
    hamiltonian: &SparseOperator,
    jumps: &[JumpChannel],
    rho: &DensityMatrix,
) -> Result<f64> {
    let g = generator(hamiltonian, jumps)?;
    let mut l = Lindbladian::new(&g, jumps);
    let mut out = vec![C64::new(0.0, 0.0); rho.dim * rho.dim];
    l.apply(&rho.data, &mut out);
    Ok(out.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
}

/// Unique steady state: the null vector of the vectorized Liouvillian,
/// normalized to unit trace. A null space of dimension above one is
/// reported with its basis rather than resolved.
pub fn steady_state(
    hamiltonian: &SparseOperator,
    jumps: &[JumpChannel],
    dimension_cap: usize,
) -> Result<DensityMatrix> {
    let dim = hamiltonian.dim();
    if dim > dimension_cap {
        return Err(Error::DimensionCap {
            dim,
            cap: dimension_cap,
        });
    }
    for j in jumps {
        if j.operator().dim() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: j.operator().dim(),
            });
        }
    }
    let g = generator(hamiltonian, jumps)?;
    let mut l = Lindbladian::new(&g, jumps);
    let n2 = dim * dim;
    let mut superop = DMatrix::<C64>::zeros(n2, n2);
    let mut basis = vec![C64::new(0.0, 0.0); n2];
    let mut column = vec![C64::new(0.0, 0.0); n2];
    for col in 0..n2 {
        basis[col] = C64::new(1.0, 0.0);
        l.apply(&basis, &mut column);
        basis[col] = C64::new(0.0, 0.0);
        for (row, v) in column.iter().enumerate() {
            superop[(row, col)] = *v;
        }
    }

    let svd = superop.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sigma_max = svd.singular_values.max();
    let tol = 1e-9 * sigma_max.max(1e-300);
    let null: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= tol)
        .collect();
    let to_vec = |i: usize| -> Vec<C64> { (0..n2).map(|c| v_t[(i, c)].conj()).collect() };
    match null.len() {
        1 => {}
        0 => {
            // no singular value under tolerance: take the smallest and let
            // the residual check decide
            let smallest = svd.singular_values.imin();
            return finish_steady_state(hamiltonian, jumps, dim, to_vec(smallest));
        }
        _ => {
            return Err(Error::DegenerateSteadyState {
                basis: null.iter().map(|&i| to_vec(i)).collect(),
            })
        }
    }
    finish_steady_state(hamiltonian, jumps, dim, to_vec(null[0]))
}

fn finish_steady_state(
    hamiltonian: &SparseOperator,
    jumps: &[JumpChannel],
    dim: usize,
    vector: Vec<C64>,
) -> Result<DensityMatrix> {
    let mut rho = DensityMatrix::from_data(dim, vector)?;
    let trace = rho.trace();
    if trace.norm() == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let inv = C64::new(1.0, 0.0) / trace;
    rho.data.iter_mut().for_each(|z| *z *= inv);
    // symmetrize away round-off
    let mut sym = rho.clone();
    for i in 0..dim {
        for j in 0..dim {
            sym.data[i * dim + j] = (rho.get(i, j) + rho.get(j, i).conj()) * 0.5;
        }
    }
    let residual = liouvillian_residual(hamiltonian, jumps, &sym)?;
    if residual >= 1e-8 {
        return Err(Error::SteadyStateResidual { residual });
    }
    Ok(sym)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{fock_annihilation, level_transition};
    use crate::model::Observable;
    use approx::assert_abs_diff_eq;

    fn cavity_model(dim: usize, kappa: f64, alpha: f64) -> (SparseOperator, Vec<JumpChannel>, SparseOperator) {
        let a = fock_annihilation(dim).unwrap();
        let h = a.add(&a.adjoint()).unwrap().scale(C64::new(alpha, 0.0));
        let n = a.adjoint().mul(&a).unwrap();
        (h, vec![JumpChannel::new("a", a.scale(C64::new(kappa.sqrt(), 0.0)))], n)
    }

    #[test]
    fn static_without_dynamics() {
        let h = SparseOperator::zeros(3);
        let model = Model::simple(h, Vec::new(), Vec::new()).unwrap();
        let psi = StateVector::from_amplitudes(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8), C64::new(0.0, 0.0)]);
        let rho0 = DensityMatrix::from_pure(&psi);
        let sol = evolve_master_equation(&model, &rho0, &IntegratorSettings::new(0.0, 1.0, 0.1, 0.5), 400).unwrap();
        assert!(sol.states.iter().all(|r| *r == rho0));
    }

    #[test]
    fn single_photon_decay() {
        let kappa = 0.8;
        let (h, jumps, n) = cavity_model(3, kappa, 0.0);
        let model = Model::simple(h, jumps, vec![Observable::new("n", n.clone())]).unwrap();
        let rho0 = DensityMatrix::from_pure(&StateVector::basis(3, 1));
        let sol = evolve_master_equation(&model, &rho0, &IntegratorSettings::new(0.0, 5.0, 0.01, 0.5), 400).unwrap();
        for (t, v) in sol.times.iter().zip(sol.expectation_series(&n).unwrap()) {
            assert_abs_diff_eq!(v, (-kappa * t).exp(), epsilon = 1e-9);
        }
        for rho in &sol.states {
            assert_abs_diff_eq!(rho.trace().re, 1.0, epsilon = 1e-8);
            assert!(rho.hermiticity_error() < 1e-10);
        }
    }

    #[test]
    fn driven_cavity_reaches_coherent_photon_number() {
        let (kappa, n_target): (f64, f64) = (1.0, 2.0);
        let alpha = n_target.sqrt() * kappa / 2.0;
        let (h, jumps, n) = cavity_model(15, kappa, alpha);
        let model = Model::simple(h.clone(), jumps.clone(), Vec::new()).unwrap();
        let rho0 = DensityMatrix::from_pure(&StateVector::basis(15, 0));
        let sol = evolve_master_equation(&model, &rho0, &IntegratorSettings::new(0.0, 30.0, 0.01, 1.0), 400).unwrap();
        let last = sol.states.last().unwrap();
        assert_abs_diff_eq!(last.expectation(&n).unwrap().re, 4.0 * alpha * alpha / (kappa * kappa), epsilon = 1e-5);

        let ss = steady_state(&h, &jumps, 40).unwrap();
        assert_abs_diff_eq!(ss.expectation(&n).unwrap().re, n_target, epsilon = 1e-5);
        assert!(liouvillian_residual(&h, &jumps, &ss).unwrap() < 1e-8);
    }

    #[test]
    fn undriven_steady_state_is_vacuum() {
        let (h, jumps, _) = cavity_model(5, 1.0, 0.0);
        let ss = steady_state(&h, &jumps, 40).unwrap();
        assert_abs_diff_eq!(ss.get(0, 0).re, 1.0, epsilon = 1e-10);
        assert!(ss.data().iter().skip(1).all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn degenerate_null_space_is_reported() {
        // two decoupled levels, no dissipation: every diagonal state is steady
        let h = SparseOperator::zeros(2);
        let err = steady_state(&h, &[], 40);
        match err {
            Err(Error::DegenerateSteadyState { basis }) => assert_eq!(basis.len(), 4),
            other => panic!("expected degeneracy, got {other:?}"),
        }
    }

    #[test]
    fn dimension_caps() {
        let h = SparseOperator::zeros(50);
        assert!(matches!(steady_state(&h, &[], 40), Err(Error::DimensionCap { .. })));
        let model = Model::simple(SparseOperator::zeros(500), Vec::new(), Vec::new()).unwrap();
        let rho = DensityMatrix::zeros(500);
        assert!(matches!(
            evolve_master_equation(&model, &rho, &IntegratorSettings::new(0.0, 1.0, 0.1, 0.1), 400),
            Err(Error::DimensionCap { .. })
        ));
    }

    #[test]
    fn qubit_decay_of_pure_superposition_keeps_hermiticity() {
        let sm = level_transition(2, 1, 0).unwrap();
        let h = sm.add(&sm.adjoint()).unwrap().scale(C64::new(0.7, 0.0));
        let model = Model::simple(h, vec![JumpChannel::new("q", sm.scale(C64::new(0.5, 0.0)))], Vec::new()).unwrap();
        let psi = StateVector::from_amplitudes(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
        let sol = evolve_master_equation(&model, &DensityMatrix::from_pure(&psi), &IntegratorSettings::new(0.0, 10.0, 0.01, 1.0), 400).unwrap();
        for rho in &sol.states {
            assert_abs_diff_eq!(rho.trace().re, 1.0, epsilon = 1e-8);
            assert!(rho.trace().im.abs() < 1e-8);
            assert!(rho.hermiticity_error() < 1e-10);
        }
    }
}
