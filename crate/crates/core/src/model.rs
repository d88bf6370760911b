//! A generic open-system model: piecewise-constant Hamiltonian, jump
//! channels, instantaneous unitaries at scheduled times and the observables
//! to record. Independent of the flip-flop device so the engines can be
//! tested on small systems.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::hilbert::{SparseOperator, StateVector, C64};

#[derive(Clone, Debug)]
pub struct JumpChannel {
    label: String,
    operator: SparseOperator,
    rate_operator: SparseOperator,
}

impl JumpChannel {
    /// `operator` already includes the square root of the rate.
    pub fn new(label: impl Into<String>, operator: SparseOperator) -> Self {
        let rate_operator = operator
            .adjoint()
            .mul(&operator)
            .expect("operator and its adjoint share a dimension");
        Self {
            label: label.into(),
            operator,
            rate_operator,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn operator(&self) -> &SparseOperator {
        &self.operator
    }

    /// `c†c`
    pub fn rate_operator(&self) -> &SparseOperator {
        &self.rate_operator
    }
}

#[derive(Clone, Debug)]
pub struct Observable {
    label: String,
    operator: SparseOperator,
    diagonal: Option<Vec<f64>>,
}

impl Observable {
    pub fn new(label: impl Into<String>, operator: SparseOperator) -> Self {
        let diagonal = operator.as_diagonal();
        Self {
            label: label.into(),
            operator,
            diagonal,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn operator(&self) -> &SparseOperator {
        &self.operator
    }

    /// Real part of `⟨ψ|O|ψ⟩ / ⟨ψ|ψ⟩`.
    pub(crate) fn measure(&self, amplitudes: &[C64], norm_sqr: f64) -> f64 {
        let raw = match &self.diagonal {
            Some(d) => d
                .iter()
                .zip(amplitudes)
                .map(|(w, z)| w * z.norm_sqr())
                .sum(),
            None => self.operator.expectation_raw(amplitudes).re,
        };
        raw / norm_sqr
    }
}

#[derive(Clone, Debug)]
pub struct ScheduledUnitary {
    pub time: f64,
    pub label: String,
    pub operator: SparseOperator,
}

#[derive(Clone, Debug)]
pub struct Model {
    dim: usize,
    hamiltonians: Vec<(f64, SparseOperator)>,
    generators: Vec<SparseOperator>,
    jumps: Vec<JumpChannel>,
    unitaries: Vec<ScheduledUnitary>,
    observables: Vec<Observable>,
    monitors: Vec<Observable>,
}

impl Model {
    /// `hamiltonians` lists `(start_time, H)` segments with increasing start
    /// times; the first segment applies from the beginning regardless of its
    /// start time. `monitors` are leakage diagnostics that must stay small.
    pub fn new(
        hamiltonians: Vec<(f64, SparseOperator)>,
        jumps: Vec<JumpChannel>,
        mut unitaries: Vec<ScheduledUnitary>,
        observables: Vec<Observable>,
        monitors: Vec<Observable>,
    ) -> Result<Self> {
        let dim = match hamiltonians.first() {
            Some((_, h)) => h.dim(),
            None => {
                return Err(Error::InvalidParameter {
                    name: "hamiltonians",
                    reason: "at least one segment is required".into(),
                })
            }
        };
        let dims = hamiltonians
            .iter()
            .map(|(_, h)| h.dim())
            .chain(jumps.iter().map(|j| j.operator.dim()))
            .chain(unitaries.iter().map(|u| u.operator.dim()))
            .chain(observables.iter().chain(&monitors).map(|o| o.operator.dim()));
        for d in dims {
            if d != dim {
                return Err(Error::DimensionMismatch { left: dim, right: d });
            }
        }
        if hamiltonians.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(Error::InvalidParameter {
                name: "hamiltonians",
                reason: "segment start times must be non-decreasing".into(),
            });
        }
        unitaries.sort_by(|x, y| x.time.total_cmp(&y.time));

        let mut decay = SparseOperator::zeros(dim);
        for j in &jumps {
            decay = decay.add(&j.rate_operator)?;
        }
        let decay = decay.scale(C64::new(-0.5, 0.0));
        let generators = hamiltonians
            .iter()
            .map(|(_, h)| h.scale(C64::new(0.0, -1.0)).add(&decay))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dim,
            hamiltonians,
            generators,
            jumps,
            unitaries,
            observables,
            monitors,
        })
    }

    /// Time-independent model with a single Hamiltonian and no unitaries.
    pub fn simple(
        hamiltonian: SparseOperator,
        jumps: Vec<JumpChannel>,
        observables: Vec<Observable>,
    ) -> Result<Self> {
        Self::new(
            vec![(f64::NEG_INFINITY, hamiltonian)],
            jumps,
            Vec::new(),
            observables,
            Vec::new(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonians(&self) -> &[(f64, SparseOperator)] {
        &self.hamiltonians
    }

    pub fn jumps(&self) -> &[JumpChannel] {
        &self.jumps
    }

    pub fn unitaries(&self) -> &[ScheduledUnitary] {
        &self.unitaries
    }

    pub fn observables(&self) -> &[Observable] {
        &self.observables
    }

    pub fn monitors(&self) -> &[Observable] {
        &self.monitors
    }

    /// Index of the Hamiltonian segment in force at time `t`.
    pub(crate) fn segment_at(&self, t: f64) -> usize {
        self.hamiltonians
            .iter()
            .skip(1)
            .take_while(|(start, _)| *start <= t)
            .count()
    }

    /// Start time of the segment after `segment`, if any.
    pub(crate) fn next_switch(&self, segment: usize) -> Option<f64> {
        self.hamiltonians.get(segment + 1).map(|(t, _)| *t)
    }

    /// Non-Hermitian generator `−iH − ½ Σ c†c` of the given segment.
    pub(crate) fn generator(&self, segment: usize) -> &SparseOperator {
        &self.generators[segment]
    }

    /// Basis states reachable from the support of `initial` under every
    /// operator in the model, in increasing order.
    pub fn reachable_indices(&self, initial: &StateVector) -> Result<Vec<usize>> {
        if initial.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: initial.dim(),
            });
        }
        let operators = self
            .hamiltonians
            .iter()
            .map(|(_, h)| h)
            .chain(self.jumps.iter().map(|j| &j.operator))
            .chain(self.unitaries.iter().map(|u| &u.operator));
        // transposed sparsity pattern: row c lists the rows reached from column c
        let pattern = SparseOperator::from_triplets(
            self.dim,
            operators.flat_map(|op| op.entries().map(|(r, c, _)| (c, r, C64::new(1.0, 0.0)))),
        );
        let mut seen = vec![false; self.dim];
        let mut queue: VecDeque<usize> = initial
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(_, z)| z.norm_sqr() > 0.0)
            .map(|(i, _)| i)
            .collect();
        for &i in &queue {
            seen[i] = true;
        }
        while let Some(c) = queue.pop_front() {
            for (r, _) in pattern.row(c) {
                if !seen[r] {
                    seen[r] = true;
                    queue.push_back(r);
                }
            }
        }
        Ok((0..self.dim).filter(|&i| seen[i]).collect())
    }

    /// The model restricted to the subspace reachable from `initial`, with
    /// the restricted initial state. Dynamics starting from `initial` never
    /// leave that subspace, so observables are unchanged.
    pub fn restrict_to_reachable(&self, initial: &StateVector) -> Result<(Model, StateVector)> {
        let indices = self.reachable_indices(initial)?;
        let restrict_obs = |o: &Observable| Observable::new(o.label.clone(), o.operator.restrict(&indices));
        let model = Model::new(
            self.hamiltonians
                .iter()
                .map(|(t, h)| (*t, h.restrict(&indices)))
                .collect(),
            self.jumps
                .iter()
                .map(|j| JumpChannel::new(j.label.clone(), j.operator.restrict(&indices)))
                .collect(),
            self.unitaries
                .iter()
                .map(|u| ScheduledUnitary {
                    time: u.time,
                    label: u.label.clone(),
                    operator: u.operator.restrict(&indices),
                })
                .collect(),
            self.observables.iter().map(restrict_obs).collect(),
            self.monitors.iter().map(restrict_obs).collect(),
        )?;
        let state = StateVector::from_amplitudes(
            indices.iter().map(|&i| initial.amplitudes()[i]).collect(),
        );
        Ok((model, state))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{build_model, initial_state, DeviceParams, PulseEvent, PulseKind, PulseSchedule};

    fn params() -> DeviceParams {
        DeviceParams {
            truncation_a: 4,
            truncation_b: 4,
            ..DeviceParams::reference_device()
        }
    }

    #[test]
    fn unpulsed_device_stays_with_transistors_in_ground() {
        let p = params();
        let model = build_model(&p, &PulseSchedule::default(), 0.0005).unwrap();
        let space = p.space().unwrap();
        let indices = model.reachable_indices(&initial_state(&space)).unwrap();
        assert_eq!(indices.len(), 4 * 4 * 2 * 2);
        assert!(indices.iter().all(|&i| {
            let l = space.levels_of(i);
            l[4] == 0 && l[5] == 0
        }));
    }

    #[test]
    fn pulsed_device_reaches_everything() {
        let p = params();
        let schedule = PulseSchedule {
            events: vec![
                PulseEvent { time: 1.0, kind: PulseKind::Set },
                PulseEvent { time: 2.0, kind: PulseKind::Reset },
            ],
            ..Default::default()
        };
        let model = build_model(&p, &schedule, 0.0005).unwrap();
        let indices = model
            .reachable_indices(&initial_state(&p.space().unwrap()))
            .unwrap();
        assert_eq!(indices.len(), model.dim());
    }

    #[test]
    fn segments_follow_drive_switches() {
        let p = params();
        let model = build_model(&p, &PulseSchedule::default(), 0.0005).unwrap();
        assert_eq!(model.hamiltonians().len(), 3);
        assert_eq!(model.segment_at(-1.0), 0);
        assert_eq!(model.segment_at(0.0), 1);
        assert_eq!(model.segment_at(4.9), 1);
        assert_eq!(model.segment_at(5.0), 2);
        assert_eq!(model.next_switch(1), Some(5.0));
        assert_eq!(model.next_switch(2), None);
    }

    #[test]
    fn rejects_mismatched_dimensions() {
        let err = Model::simple(
            SparseOperator::zeros(3),
            vec![JumpChannel::new("x", SparseOperator::identity(4))],
            Vec::new(),
        );
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }
}
