//! Seeded ensembles of independent trajectories.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::StateVector;
use crate::model::Model;
use crate::trajectory::{evolve_trajectory, IntegratorSettings, TrajectoryRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailedMember {
    pub index: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRecord {
    pub labels: Vec<String>,
    pub times: Vec<f64>,
    pub members: Vec<TrajectoryRecord>,
    pub failed: Vec<FailedMember>,
    /// `mean[k][i]`: ensemble mean of observable `k` at `times[i]`.
    pub mean: Vec<Vec<f64>>,
    /// Standard error of the mean (sample standard deviation / √n).
    pub stderr: Vec<Vec<f64>>,
}

impl EnsembleRecord {
    /// Aggregates member records that share labels and sample times.
    pub fn from_members(members: Vec<TrajectoryRecord>, failed: Vec<FailedMember>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::InsufficientData("every ensemble member failed".into()))?;
        let labels = first.labels.clone();
        let times = first.times.clone();
        for m in &members {
            if m.labels != labels || m.times != times {
                return Err(Error::InvalidParameter {
                    name: "members",
                    reason: "members have different observables or sample times".into(),
                });
            }
        }
        let n = members.len() as f64;
        let mut mean = vec![vec![0.0; times.len()]; labels.len()];
        let mut stderr = vec![vec![0.0; times.len()]; labels.len()];
        for k in 0..labels.len() {
            for i in 0..times.len() {
                let mu = members.iter().map(|m| m.series[k][i]).sum::<f64>() / n;
                mean[k][i] = mu;
                if members.len() > 1 {
                    let var = members
                        .iter()
                        .map(|m| (m.series[k][i] - mu).powi(2))
                        .sum::<f64>()
                        / (n - 1.0);
                    stderr[k][i] = (var / n).sqrt();
                }
            }
        }
        Ok(Self {
            labels,
            times,
            members,
            failed,
            mean,
            stderr,
        })
    }

    pub fn mean_of(&self, label: &str) -> Option<&[f64]> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|k| self.mean[k].as_slice())
    }

    pub fn stderr_of(&self, label: &str) -> Option<&[f64]> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|k| self.stderr[k].as_slice())
    }
}

/// Runs `n_traj` trajectories in parallel; trajectory `i` uses stream `i` of
/// `base_seed`. The model is first restricted to the subspace reachable from
/// `initial`, which leaves every observable unchanged.
pub fn run_ensemble(
    model: &Model,
    initial: &StateVector,
    settings: &IntegratorSettings,
    n_traj: usize,
    base_seed: u64,
) -> Result<EnsembleRecord> {
    if n_traj == 0 {
        return Err(Error::InvalidParameter {
            name: "n_traj",
            reason: "need at least one trajectory".into(),
        });
    }
    settings.validate()?;
    let (reduced, start) = model.restrict_to_reachable(initial)?;
    let outcomes: Vec<Result<TrajectoryRecord>> = (0..n_traj)
        .into_par_iter()
        .map(|i| evolve_trajectory(&reduced, &start, settings, base_seed, i as u64))
        .collect();

    let mut members = Vec::with_capacity(n_traj);
    let mut failed = Vec::new();
    for (index, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(rec) => members.push(rec),
            Err(e) => failed.push(FailedMember {
                index,
                message: e.to_string(),
            }),
        }
    }
    if members.is_empty() {
        return Err(Error::InsufficientData(format!(
            "every ensemble member failed; first error: {}",
            failed[0].message
        )));
    }
    EnsembleRecord::from_members(members, failed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{fock_annihilation, C64};
    use crate::model::{JumpChannel, Observable};

    fn driven_cavity() -> Model {
        driven_cavity_with(0.5)
    }

    fn driven_cavity_with(alpha: f64) -> Model {
        let a = fock_annihilation(6).unwrap();
        let h = a.add(&a.adjoint()).unwrap().scale(C64::new(alpha, 0.0));
        let n = a.adjoint().mul(&a).unwrap();
        Model::simple(
            h,
            vec![JumpChannel::new("a", a.clone())],
            vec![Observable::new("n", n)],
        )
        .unwrap()
    }

    #[test]
    fn single_member_ensemble_equals_record() {
        let model = driven_cavity();
        let settings = IntegratorSettings::new(0.0, 3.0, 0.01, 0.5);
        let psi = StateVector::basis(6, 0);
        let ens = run_ensemble(&model, &psi, &settings, 1, 9).unwrap();
        let single = evolve_trajectory(&model, &psi, &settings, 9, 0).unwrap();
        assert_eq!(ens.mean[0], single.series[0]);
        assert!(ens.stderr[0].iter().all(|&s| s == 0.0));
        assert_eq!(ens.members[0].jumps, single.jumps);
    }

    #[test]
    fn same_base_seed_reproduces_ensemble() {
        let model = driven_cavity();
        let settings = IntegratorSettings::new(0.0, 3.0, 0.01, 0.5);
        let psi = StateVector::basis(6, 0);
        let a = run_ensemble(&model, &psi, &settings, 8, 42).unwrap();
        let b = run_ensemble(&model, &psi, &settings, 8, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn statistics_are_recomputable_from_members() {
        let model = driven_cavity();
        let settings = IntegratorSettings::new(0.0, 3.0, 0.01, 0.5);
        let ens = run_ensemble(&model, &StateVector::basis(6, 0), &settings, 5, 3).unwrap();
        let again = EnsembleRecord::from_members(ens.members.clone(), Vec::new()).unwrap();
        assert_eq!(again.mean, ens.mean);
        assert_eq!(again.stderr, ens.stderr);
    }

    #[test]
    fn failed_members_are_marked() {
        let model = driven_cavity_with(50.0);
        // unstable step size: every member fails
        let settings = IntegratorSettings::new(0.0, 3.0, 2.0, 2.0);
        let err = run_ensemble(&model, &StateVector::basis(6, 0), &settings, 3, 3);
        assert!(matches!(err, Err(Error::InsufficientData(_))));
        assert!(run_ensemble(&model, &StateVector::basis(6, 0), &settings, 0, 3).is_err());
    }
}
