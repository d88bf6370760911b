//! States and sparse operators on the device's tensor-product Hilbert space.
//!
//! The composite space is ordered `(a, b, qa, qb, ta, tb)`: resonator `a`,
//! resonator `b`, qubit-a, qubit-b, transistor `ta`, transistor `tb`. Basis
//! indices are row-major in that order, so `tb` is the fastest-varying slot:
//!
//! ```text
//! index = ((((n_a * N_b + n_b) * 2 + q_a) * 2 + q_b) * 3 + t_a) * 3 + t_b
//! ```
//!
//! Every operator and state in the crate uses this layout.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Entries with modulus at or below this are not stored.
pub const DROP_TOLERANCE: f64 = 1e-15;

/// Qubit dimension (`g`, `e`).
pub const QUBIT_DIM: usize = 2;
/// Transmon dimension (`g`, `e`, `f`).
pub const TRANSMON_DIM: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subsystem {
    ResonatorA,
    ResonatorB,
    QubitA,
    QubitB,
    TransistorA,
    TransistorB,
}

impl Subsystem {
    pub const ALL: [Subsystem; 6] = [
        Subsystem::ResonatorA,
        Subsystem::ResonatorB,
        Subsystem::QubitA,
        Subsystem::QubitB,
        Subsystem::TransistorA,
        Subsystem::TransistorB,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Subsystem::ResonatorA => "a",
            Subsystem::ResonatorB => "b",
            Subsystem::QubitA => "qa",
            Subsystem::QubitB => "qb",
            Subsystem::TransistorA => "ta",
            Subsystem::TransistorB => "tb",
        }
    }
}

/// Layout of the device Hilbert space: two truncated Fock modes, two qubits
/// and two three-level transmons.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompositeSpace {
    dims: [usize; 6],
}

impl CompositeSpace {
    pub fn new(fock_dim_a: usize, fock_dim_b: usize) -> Result<Self> {
        for dim in [fock_dim_a, fock_dim_b] {
            if dim < 2 {
                return Err(Error::InvalidDimension { dim });
            }
        }
        Ok(Self {
            dims: [
                fock_dim_a,
                fock_dim_b,
                QUBIT_DIM,
                QUBIT_DIM,
                TRANSMON_DIM,
                TRANSMON_DIM,
            ],
        })
    }

    pub fn dims(&self) -> [usize; 6] {
        self.dims
    }

    pub fn dim(&self, slot: Subsystem) -> usize {
        self.dims[slot.index()]
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Product of the dimensions of all slots after `slot`.
    pub fn stride(&self, slot: Subsystem) -> usize {
        self.dims[slot.index() + 1..].iter().product()
    }

    /// Basis index of the product state with the given per-slot levels.
    pub fn index_of(&self, levels: [usize; 6]) -> Result<usize> {
        let mut index = 0;
        for (&level, &dims) in levels.iter().zip(&self.dims) {
            if level >= dims {
                return Err(Error::InvalidLevel { level, dims });
            }
            index = index * dims + level;
        }
        Ok(index)
    }

    /// Per-slot levels of a basis index.
    pub fn levels_of(&self, mut index: usize) -> [usize; 6] {
        let mut levels = [0; 6];
        for slot in (0..6).rev() {
            levels[slot] = index % self.dims[slot];
            index /= self.dims[slot];
        }
        levels
    }

    pub fn basis_state(&self, levels: [usize; 6]) -> Result<StateVector> {
        Ok(StateVector::basis(self.total_dim(), self.index_of(levels)?))
    }
}

/// Pure state amplitudes in the composite basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector(Vec<C64>);

impl StateVector {
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Self {
        Self(amplitudes)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![C64::new(0.0, 0.0); dim])
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut state = Self::zeros(dim);
        state.0[index] = C64::new(1.0, 0.0);
        state
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.0
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.0
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.0)
    }

    pub fn normalize(&mut self) -> Result<()> {
        let norm = self.norm_sqr().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let inv = 1.0 / norm;
        self.0.iter_mut().for_each(|z| *z *= inv);
        Ok(())
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_dims(self.dim(), other.dim())?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(x, y)| x.conj() * y)
            .sum())
    }

    pub fn scale(&self, factor: C64) -> StateVector {
        StateVector(self.0.iter().map(|z| z * factor).collect())
    }

    pub fn add(&self, other: &StateVector) -> Result<StateVector> {
        check_dims(self.dim(), other.dim())?;
        Ok(StateVector(
            self.0.iter().zip(&other.0).map(|(x, y)| x + y).collect(),
        ))
    }
}

pub(crate) fn norm_sqr(amplitudes: &[C64]) -> f64 {
    amplitudes.iter().map(|z| z.norm_sqr()).sum()
}

fn check_dims(left: usize, right: usize) -> Result<()> {
    if left == right {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { left, right })
    }
}

/// Immutable square sparse complex matrix in compressed-row form.
///
/// Entries within a row are sorted by column, duplicates are summed at
/// construction and entries at or below [`DROP_TOLERANCE`] are removed, so two
/// operators built from the same inputs are identical bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<C64>,
}

impl SparseOperator {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: vec![0; dim + 1],
            cols: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![C64::new(1.0, 0.0); dim])
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        Self::from_triplets(
            diag.len(),
            diag.iter().enumerate().map(|(i, &v)| (i, i, v)),
        )
    }

    /// Builds an operator from `(row, col, value)` triplets in any order.
    ///
    /// Panics if an index is out of range.
    pub fn from_triplets<I>(dim: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, C64)>,
    {
        let mut rows: Vec<BTreeMap<usize, C64>> = vec![BTreeMap::new(); dim];
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "entry ({r}, {c}) outside {dim}x{dim}");
            *rows[r].entry(c).or_insert(C64::new(0.0, 0.0)) += v;
        }
        let mut op = Self::zeros(dim);
        for (r, row) in rows.into_iter().enumerate() {
            for (c, v) in row {
                if v.norm() > DROP_TOLERANCE {
                    op.cols.push(c);
                    op.values.push(v);
                }
            }
            op.row_ptr[r + 1] = op.cols.len();
        }
        op
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }

    /// Stored entries of row `r` as `(col, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// All stored entries as `(row, col, value)` in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn add(&self, other: &SparseOperator) -> Result<SparseOperator> {
        check_dims(self.dim, other.dim)?;
        Ok(Self::from_triplets(
            self.dim,
            self.entries().chain(other.entries()),
        ))
    }

    pub fn sub(&self, other: &SparseOperator) -> Result<SparseOperator> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, factor: C64) -> SparseOperator {
        Self::from_triplets(
            self.dim,
            self.entries().map(|(r, c, v)| (r, c, v * factor)),
        )
    }

    /// Matrix product `self * other`.
    pub fn mul(&self, other: &SparseOperator) -> Result<SparseOperator> {
        check_dims(self.dim, other.dim)?;
        let triplets = self.entries().flat_map(|(r, k, v)| {
            other.row(k).map(move |(c, w)| (r, c, v * w))
        });
        Ok(Self::from_triplets(self.dim, triplets))
    }

    pub fn adjoint(&self) -> SparseOperator {
        Self::from_triplets(self.dim, self.entries().map(|(r, c, v)| (c, r, v.conj())))
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &SparseOperator) -> SparseOperator {
        let d = other.dim;
        let mut op = Self::zeros(self.dim * d);
        for r in 0..self.dim {
            for s in 0..d {
                for (c, v) in self.row(r) {
                    for (t, w) in other.row(s) {
                        let value = v * w;
                        if value.norm() > DROP_TOLERANCE {
                            op.cols.push(c * d + t);
                            op.values.push(value);
                        }
                    }
                }
                op.row_ptr[r * d + s + 1] = op.cols.len();
            }
        }
        op
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.entries()
            .all(|(r, c, v)| (v - self.get(c, r).conj()).norm() <= tol)
            && self
                .adjoint()
                .entries()
                .all(|(r, c, v)| (v - self.get(r, c)).norm() <= tol)
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        check_dims(self.dim, state.dim())?;
        let mut out = StateVector::zeros(self.dim);
        self.apply_into(state.amplitudes(), out.amplitudes_mut());
        Ok(out)
    }

    /// `out = self * input` without allocation. Lengths must equal `dim`.
    pub fn apply_into(&self, input: &[C64], out: &mut [C64]) {
        debug_assert_eq!(input.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        for (r, slot) in out.iter_mut().enumerate() {
            let span = self.row_ptr[r]..self.row_ptr[r + 1];
            let mut acc = C64::new(0.0, 0.0);
            for (&c, &v) in self.cols[span.clone()].iter().zip(&self.values[span]) {
                acc += v * input[c];
            }
            *slot = acc;
        }
    }

    /// `⟨ψ|O|ψ⟩` for the state as given (no normalization).
    pub fn expectation(&self, state: &StateVector) -> Result<C64> {
        check_dims(self.dim, state.dim())?;
        Ok(self.expectation_raw(state.amplitudes()))
    }

    pub(crate) fn expectation_raw(&self, amplitudes: &[C64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (r, &psi_r) in amplitudes.iter().enumerate() {
            let span = self.row_ptr[r]..self.row_ptr[r + 1];
            let mut row_acc = C64::new(0.0, 0.0);
            for (&c, &v) in self.cols[span.clone()].iter().zip(&self.values[span]) {
                row_acc += v * amplitudes[c];
            }
            acc += psi_r.conj() * row_acc;
        }
        acc
    }

    /// Diagonal entries, if the operator has no off-diagonal entries.
    pub fn as_diagonal(&self) -> Option<Vec<f64>> {
        let mut diag = vec![0.0; self.dim];
        for (r, c, v) in self.entries() {
            if r != c || v.im.abs() > DROP_TOLERANCE {
                return None;
            }
            diag[r] = v.re;
        }
        Some(diag)
    }

    /// Matrix restricted to the given basis indices (rows and columns), in
    /// the order given.
    pub fn restrict(&self, indices: &[usize]) -> SparseOperator {
        let mut position = vec![usize::MAX; self.dim];
        for (k, &i) in indices.iter().enumerate() {
            position[i] = k;
        }
        let triplets = indices.iter().enumerate().flat_map(|(k, &i)| {
            let position = &position;
            self.row(i).filter_map(move |(c, v)| {
                let p = position[c];
                (p != usize::MAX).then_some((k, p, v))
            })
        });
        Self::from_triplets(indices.len(), triplets)
    }
}

/// Annihilation operator on a `dim`-level Fock space: `⟨n−1|a|n⟩ = √n`.
pub fn fock_annihilation(dim: usize) -> Result<SparseOperator> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim });
    }
    Ok(SparseOperator::from_triplets(
        dim,
        (1..dim).map(|n| (n - 1, n, C64::new((n as f64).sqrt(), 0.0))),
    ))
}

/// Single-entry operator `|to⟩⟨from|` on a `dims`-level system.
pub fn level_transition(dims: usize, from_level: usize, to_level: usize) -> Result<SparseOperator> {
    if dims < 2 {
        return Err(Error::InvalidDimension { dim: dims });
    }
    for level in [from_level, to_level] {
        if level >= dims {
            return Err(Error::InvalidLevel { level, dims });
        }
    }
    Ok(SparseOperator::from_triplets(
        dims,
        [(to_level, from_level, C64::new(1.0, 0.0))],
    ))
}

/// Lifts a single-subsystem operator to the full space, acting as the
/// identity on every other slot.
pub fn embed(op: &SparseOperator, slot: Subsystem, space: &CompositeSpace) -> Result<SparseOperator> {
    let slot_dim = space.dim(slot);
    if op.dim() != slot_dim {
        return Err(Error::InvalidEmbedding {
            op_dim: op.dim(),
            slot: slot.name(),
            slot_dim,
        });
    }
    let left: usize = space.dims()[..slot.index()].iter().product();
    let right = space.stride(slot);
    Ok(SparseOperator::identity(left)
        .kron(op)
        .kron(&SparseOperator::identity(right)))
}
