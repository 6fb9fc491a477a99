//! Dense complex linear algebra on finite Hilbert spaces.
//!
//! Inner products are conjugate-linear in the first argument:
//! `⟨v, w⟩ = Σ conj(v_i) w_i`.
//!
//! Composite spaces `S ⊗ M` always use the system-major index convention
//! fixed by [`TensorLayout`]: the basis vector `e_i ⊗ f_j` sits at composite
//! index `i * dim_m + j`.

mod eigen;

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

pub use eigen::{hermitian_eigensystem, Eigensystem, DEGENERACY_TOL};

use crate::error::{Error, Result};
use crate::math::sqrt;

pub type C64 = num_complex::Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Tolerance on `|⟨v,v⟩ - 1|` for a state to count as normalized.
pub const NORMALIZED_TOL: f64 = 1e-12;
/// Tolerance on `max |A - A†|` for the Hermitian tag.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance on `max |U U† - I|` for the unitary tag.
pub const UNITARY_TOL: f64 = 1e-10;
/// Tolerance on `max |P² - P|` for the projector tag.
pub const PROJECTOR_TOL: f64 = 1e-10;
/// Tolerance on the trace and on negative eigenvalues of a density matrix.
pub const DENSITY_TOL: f64 = 1e-10;

/// A pure state, or any vector, in a finite Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
}

impl StateVector {
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::EmptyDimension);
        }
        Ok(StateVector { amps })
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        StateVector {
            amps: vec![ZERO; dim],
        }
    }

    /// Standard basis vector `e_index`.
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim, "basis index {index} out of range for dim {dim}");
        let mut v = Self::zeros(dim);
        v.amps[index] = ONE;
        v
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn get(&self, i: usize) -> C64 {
        self.amps[i]
    }

    /// `⟨self, other⟩`, conjugate-linear in `self`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.amps
            .iter()
            .zip(&other.amps)
            .fold(ZERO, |acc, (a, b)| acc + a.conj() * b)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        sqrt(self.norm_sqr())
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORMALIZED_TOL
    }

    /// `v / |v|`.
    pub fn normalized(&self) -> Result<StateVector> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroVector);
        }
        Ok(self.scale(C64::new(1.0 / n, 0.0)))
    }

    pub fn scale(&self, c: C64) -> StateVector {
        StateVector {
            amps: self.amps.iter().map(|a| a * c).collect(),
        }
    }

    /// Euclidean distance `|self - other|`.
    pub fn distance(&self, other: &StateVector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        sqrt(
            self.amps
                .iter()
                .zip(&other.amps)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum(),
        )
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

impl Add for &StateVector {
    type Output = StateVector;
    fn add(self, rhs: &StateVector) -> StateVector {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in state sum");
        StateVector {
            amps: self.amps.iter().zip(&rhs.amps).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &StateVector {
    type Output = StateVector;
    fn sub(self, rhs: &StateVector) -> StateVector {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in state difference");
        StateVector {
            amps: self.amps.iter().zip(&rhs.amps).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &StateVector {
    type Output = StateVector;
    fn neg(self) -> StateVector {
        self.scale(-ONE)
    }
}

/// Structure tags carried by an [`Operator`]. Tags are only ever attached
/// after the corresponding invariant has been checked.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tags(u8);

impl Tags {
    pub const NONE: Tags = Tags(0);
    pub const HERMITIAN: Tags = Tags(1);
    pub const UNITARY: Tags = Tags(2);
    pub const PROJECTOR: Tags = Tags(4);

    pub fn contains(self, other: Tags) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn union(self, other: Tags) -> Tags {
        Tags(self.0 | other.0)
    }

    pub fn intersection(self, other: Tags) -> Tags {
        Tags(self.0 & other.0)
    }
}

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    dim: usize,
    entries: Vec<C64>,
    tags: Tags,
}

impl Operator {
    /// Untagged operator from row-major entries.
    pub fn new(dim: usize, entries: Vec<C64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyDimension);
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Ok(Operator {
            dim,
            entries,
            tags: Tags::NONE,
        })
    }

    pub fn from_rows(rows: &[&[C64]]) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        Self::new(dim, entries)
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            entries.extend(row.iter().map(|&x| C64::new(x, 0.0)));
        }
        Self::new(dim, entries)
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        assert!(dim > 0, "dimension must be positive");
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(f(i, j));
            }
        }
        Operator {
            dim,
            entries,
            tags: Tags::NONE,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_fn(dim, |_, _| ZERO).with_tags_unchecked(Tags::HERMITIAN)
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { ONE } else { ZERO }).with_tags_unchecked(
            Tags::HERMITIAN
                .union(Tags::UNITARY)
                .union(Tags::PROJECTOR),
        )
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        let dim = diag.len();
        Self::from_fn(dim, |i, j| if i == j { diag[i] } else { ZERO })
    }

    /// `|v⟩⟨w|`, i.e. the operator `x ↦ ⟨w, x⟩ v`.
    pub fn outer(v: &StateVector, w: &StateVector) -> Self {
        let dim = v.dim();
        assert_eq!(dim, w.dim(), "dimension mismatch in outer product");
        Self::from_fn(dim, |i, j| v.get(i) * w.get(j).conj())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tags(&self) -> Tags {
        self.tags
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[i * self.dim + j]
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, value: C64) {
        self.entries[i * self.dim + j] = value;
    }

    pub(crate) fn with_tags_unchecked(mut self, tags: Tags) -> Self {
        self.tags = tags;
        self
    }

    /// Attaches `tags` after verifying each invariant.
    pub fn with_tags(self, tags: Tags) -> Result<Self> {
        if tags.contains(Tags::HERMITIAN) || tags.contains(Tags::PROJECTOR) {
            let d = self.hermitian_deviation();
            if d > HERMITIAN_TOL {
                return Err(Error::Tag {
                    tag: "hermitian",
                    deviation: d,
                });
            }
        }
        if tags.contains(Tags::UNITARY) {
            let d = self.unitary_deviation();
            if d > UNITARY_TOL {
                return Err(Error::Tag {
                    tag: "unitary",
                    deviation: d,
                });
            }
        }
        if tags.contains(Tags::PROJECTOR) {
            let d = self.projector_deviation();
            if d > PROJECTOR_TOL {
                return Err(Error::Tag {
                    tag: "a projector",
                    deviation: d,
                });
            }
        }
        let mut tags = tags;
        if tags.contains(Tags::PROJECTOR) {
            tags = tags.union(Tags::HERMITIAN);
        }
        let tags = self.tags.union(tags);
        Ok(self.with_tags_unchecked(tags))
    }

    /// Checks and tags the Hermitian invariant; the usual entry point for observables.
    pub fn hermitian(self) -> Result<Self> {
        self.with_tags(Tags::HERMITIAN)
    }

    pub fn unitary(self) -> Result<Self> {
        self.with_tags(Tags::UNITARY)
    }

    pub fn is_hermitian(&self) -> bool {
        self.tags.contains(Tags::HERMITIAN)
    }

    pub fn is_unitary(&self) -> bool {
        self.tags.contains(Tags::UNITARY)
    }

    pub fn is_projector(&self) -> bool {
        self.tags.contains(Tags::PROJECTOR)
    }

    /// `max |A - A†|`.
    pub fn hermitian_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// `max |A A† - I|`.
    pub fn unitary_deviation(&self) -> f64 {
        let prod = self.mul_op(&self.adjoint());
        prod.max_abs_diff(&Operator::identity(self.dim))
    }

    /// `max |A² - A|`.
    pub fn projector_deviation(&self) -> f64 {
        self.mul_op(self).max_abs_diff(self)
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn adjoint(&self) -> Operator {
        let mut out = Operator::from_fn(self.dim, |i, j| self.get(j, i).conj());
        out.tags = self.tags;
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn apply(&self, v: &StateVector) -> StateVector {
        assert_eq!(self.dim, v.dim(), "dimension mismatch in operator application");
        let x = v.amplitudes();
        let amps = self
            .entries
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(x).fold(ZERO, |acc, (a, b)| acc + a * b))
            .collect();
        StateVector { amps }
    }

    /// `⟨v, A v⟩`.
    pub fn expectation(&self, v: &StateVector) -> C64 {
        v.inner(&self.apply(v))
    }

    /// `⟨v, A w⟩`.
    pub fn matrix_element(&self, v: &StateVector, w: &StateVector) -> C64 {
        v.inner(&self.apply(w))
    }

    pub fn mul_op(&self, other: &Operator) -> Operator {
        assert_eq!(self.dim, other.dim, "dimension mismatch in operator product");
        let n = self.dim;
        let mut entries = vec![ZERO; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == ZERO {
                    continue;
                }
                let row = &other.entries[k * n..(k + 1) * n];
                let out = &mut entries[i * n..(i + 1) * n];
                for (o, b) in out.iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        let tags = self.tags.intersection(other.tags).intersection(Tags::UNITARY);
        Operator {
            dim: n,
            entries,
            tags,
        }
    }

    pub fn scale(&self, c: C64) -> Operator {
        let mut out = Operator {
            dim: self.dim,
            entries: self.entries.iter().map(|a| a * c).collect(),
            tags: Tags::NONE,
        };
        if c.im == 0.0 && self.is_hermitian() {
            out.tags = Tags::HERMITIAN;
        }
        out
    }

    fn zip_with(&self, other: &Operator, f: impl Fn(C64, C64) -> C64) -> Operator {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(&a, &b)| f(a, b))
            .collect();
        let tags = self.tags.intersection(other.tags).intersection(Tags::HERMITIAN);
        Operator {
            dim: self.dim,
            entries,
            tags,
        }
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.dim,
            });
        }
        Ok(())
    }

    pub(crate) fn require_hermitian(&self) -> Result<()> {
        if self.is_hermitian() {
            return Ok(());
        }
        let d = self.hermitian_deviation();
        if d > HERMITIAN_TOL {
            return Err(Error::Tag {
                tag: "hermitian",
                deviation: d,
            });
        }
        Ok(())
    }

    pub(crate) fn require_projector(&self) -> Result<()> {
        if self.is_projector() {
            return Ok(());
        }
        self.require_hermitian()?;
        let d = self.projector_deviation();
        if d > PROJECTOR_TOL {
            return Err(Error::Tag {
                tag: "a projector",
                deviation: d,
            });
        }
        Ok(())
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.mul_op(rhs)
    }
}

/// A mixed state: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    op: Operator,
}

impl DensityMatrix {
    pub fn new(op: Operator) -> Result<Self> {
        op.require_hermitian()?;
        let tr = op.trace();
        if (tr.re - 1.0).abs() > DENSITY_TOL || tr.im.abs() > DENSITY_TOL {
            return Err(Error::InvalidDensity {
                reason: "trace differs from 1",
                value: tr.re - 1.0,
            });
        }
        let op = op.with_tags_unchecked(Tags::HERMITIAN);
        let min = hermitian_eigensystem(&op)?.values()[0];
        if min < -DENSITY_TOL {
            return Err(Error::InvalidDensity {
                reason: "negative eigenvalue",
                value: min,
            });
        }
        Ok(DensityMatrix { op })
    }

    /// `P_v` for a nonzero `v`, normalized as `P_{v/|v|}`.
    pub fn pure(v: &StateVector) -> Result<Self> {
        let op = crate::states::projector(v)?;
        Ok(DensityMatrix { op })
    }

    /// `I / dim`.
    pub fn maximally_mixed(dim: usize) -> Self {
        let op = Operator::identity(dim)
            .scale(C64::new(1.0 / dim as f64, 0.0))
            .with_tags_unchecked(Tags::HERMITIAN);
        DensityMatrix { op }
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn into_op(self) -> Operator {
        self.op
    }

    /// `tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.op.mul_op(&self.op).trace().re
    }
}

/// Factorization `S ⊗ M` with `dim(S) = dim_s` and `dim(M) = dim_m`.
///
/// The composite index of `(system i, meter j)` is `i * dim_m + j`; this is
/// the only convention used anywhere in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorLayout {
    dim_s: usize,
    dim_m: usize,
}

impl TensorLayout {
    pub fn new(dim_s: usize, dim_m: usize) -> Result<Self> {
        if dim_s == 0 || dim_m == 0 {
            return Err(Error::EmptyDimension);
        }
        Ok(TensorLayout { dim_s, dim_m })
    }

    pub fn dim_s(&self) -> usize {
        self.dim_s
    }

    pub fn dim_m(&self) -> usize {
        self.dim_m
    }

    pub fn dim(&self) -> usize {
        self.dim_s * self.dim_m
    }

    #[inline]
    pub fn index(&self, system: usize, meter: usize) -> usize {
        system * self.dim_m + meter
    }

    #[inline]
    pub fn split(&self, composite: usize) -> (usize, usize) {
        (composite / self.dim_m, composite % self.dim_m)
    }

    fn check(&self, dim: usize) -> Result<()> {
        if dim != self.dim() {
            return Err(Error::Layout {
                dim_s: self.dim_s,
                dim_m: self.dim_m,
                found: dim,
            });
        }
        Ok(())
    }
}

/// Kronecker product `a ⊗ b`.
pub fn tensor_state(a: &StateVector, b: &StateVector) -> StateVector {
    let mut amps = Vec::with_capacity(a.dim() * b.dim());
    for x in a.amplitudes() {
        amps.extend(b.amplitudes().iter().map(|y| x * y));
    }
    StateVector { amps }
}

/// Kronecker product `A ⊗ B`; Hermitian and unitary tags propagate when
/// both factors carry them.
pub fn tensor_op(a: &Operator, b: &Operator) -> Operator {
    let layout = TensorLayout {
        dim_s: a.dim(),
        dim_m: b.dim(),
    };
    let out = Operator::from_fn(layout.dim(), |r, c| {
        let (i, j) = layout.split(r);
        let (k, l) = layout.split(c);
        a.get(i, k) * b.get(j, l)
    });
    let tags = a
        .tags()
        .intersection(b.tags())
        .intersection(Tags::HERMITIAN.union(Tags::UNITARY).union(Tags::PROJECTOR));
    out.with_tags_unchecked(tags)
}

/// Partial trace over the meter: `(tr_M L)_{ik} = Σ_α L_{(i,α),(k,α)}`.
pub fn partial_trace_meter(l: &Operator, layout: TensorLayout) -> Result<Operator> {
    layout.check(l.dim())?;
    let dm = layout.dim_m();
    let out = Operator::from_fn(layout.dim_s(), |i, k| {
        (0..dm)
            .map(|a| l.get(layout.index(i, a), layout.index(k, a)))
            .sum()
    });
    Ok(out.with_tags_unchecked(l.tags().intersection(Tags::HERMITIAN)))
}

/// Partial trace over the system: `(tr_S L)_{jl} = Σ_α L_{(α,j),(α,l)}`.
pub fn partial_trace_system(l: &Operator, layout: TensorLayout) -> Result<Operator> {
    layout.check(l.dim())?;
    let ds = layout.dim_s();
    let out = Operator::from_fn(layout.dim_m(), |j, k| {
        (0..ds)
            .map(|a| l.get(layout.index(a, j), layout.index(a, k)))
            .sum()
    });
    Ok(out.with_tags_unchecked(l.tags().intersection(Tags::HERMITIAN)))
}

/// `√tr(ρ-σ)²`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    sigma.op().check_dim(rho.dim())?;
    let d = rho.op() - sigma.op();
    // tr(D²) for Hermitian D is Σ |D_ij|²; the trace form is kept literal.
    let tr = d.mul_op(&d).trace().re;
    Ok(sqrt(tr.max(0.0)))
}

/// Squared Schmidt coefficients of a composite vector, in descending order.
///
/// These are the eigenvalues of the reshaped amplitude matrix `C C†`, which
/// is `tr_M P_u` scaled by `|u|²`.
pub fn schmidt_spectrum(u: &StateVector, layout: TensorLayout) -> Result<Vec<f64>> {
    layout.check(u.dim())?;
    let rho = partial_trace_meter(&crate::states::projector(u)?, layout)?;
    let mut values = hermitian_eigensystem(&rho)?.values().to_vec();
    values.reverse();
    Ok(values)
}

/// Number of Schmidt coefficients above `tol`.
pub fn schmidt_rank(u: &StateVector, layout: TensorLayout, tol: f64) -> Result<usize> {
    Ok(schmidt_spectrum(u, layout)?
        .iter()
        .filter(|&&w| w > tol)
        .count())
}

#[cfg(test)]
mod tests;
