//! Cyclic Jacobi eigensolver for Hermitian matrices.

use alloc::vec::Vec;

use super::{Operator, StateVector, Tags, C64, ONE, ZERO};
use crate::error::Result;
use crate::math::{cis, hypot, sqrt};

/// Eigenvalues closer than this are treated as one degenerate cluster.
pub const DEGENERACY_TOL: f64 = 1e-9;

const MAX_SWEEPS: usize = 64;

/// Orthonormal eigenbasis of a Hermitian operator with ascending eigenvalues.
///
/// Inside a degenerate cluster the basis is rebuilt by Gram-Schmidt on the
/// standard basis vectors (in index order) projected onto the cluster's
/// eigenspace, so it does not depend on the iteration history of the solver.
/// Outside clusters each vector's phase is fixed by making its first
/// dominant component real and positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigensystem {
    values: Vec<f64>,
    vectors: Vec<StateVector>,
}

impl Eigensystem {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> &[StateVector] {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Index ranges of eigenvalue clusters (within [`DEGENERACY_TOL`]).
    pub fn clusters(&self) -> Vec<core::ops::Range<usize>> {
        cluster_ranges(&self.values)
    }

    /// `Σ_i f(α_i) P_{a_i}`.
    pub fn synthesize(&self, mut f: impl FnMut(f64) -> C64) -> Operator {
        let n = self.dim();
        let mut out = Operator::zeros(n).with_tags_unchecked(Tags::NONE);
        for (value, v) in self.values.iter().zip(&self.vectors) {
            let w = f(*value);
            for i in 0..n {
                let vi = v.get(i) * w;
                for j in 0..n {
                    let cur = out.get(i, j);
                    out.set(i, j, cur + vi * v.get(j).conj());
                }
            }
        }
        out
    }

    /// Spectral projectors, one per degenerate cluster, with the cluster's
    /// mean eigenvalue.
    pub fn spectral_projectors(&self) -> Vec<(f64, Operator)> {
        let n = self.dim();
        self.clusters()
            .into_iter()
            .map(|r| {
                let mean = self.values[r.clone()].iter().sum::<f64>() / r.len() as f64;
                let mut p = Operator::zeros(n).with_tags_unchecked(Tags::NONE);
                for v in &self.vectors[r] {
                    let outer = Operator::outer(v, v);
                    p = &p + &outer;
                }
                (
                    mean,
                    p.with_tags_unchecked(Tags::HERMITIAN.union(Tags::PROJECTOR)),
                )
            })
            .collect()
    }
}

fn cluster_ranges(values: &[f64]) -> Vec<core::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i] - values[i - 1] > DEGENERACY_TOL {
            out.push(start..i);
            start = i;
        }
    }
    out
}

/// Eigen-decomposition `A = Σ α_i P_{a_i}` of a Hermitian operator.
pub fn hermitian_eigensystem(a: &Operator) -> Result<Eigensystem> {
    a.require_hermitian()?;
    let n = a.dim();
    let mut m: Vec<C64> = a.entries().to_vec();
    // Symmetrize exactly so the rotations see a Hermitian matrix.
    for i in 0..n {
        m[i * n + i] = C64::new(m[i * n + i].re, 0.0);
        for j in i + 1..n {
            let avg = (m[i * n + j] + m[j * n + i].conj()) * 0.5;
            m[i * n + j] = avg;
            m[j * n + i] = avg.conj();
        }
    }
    let mut vecs: Vec<C64> = (0..n * n)
        .map(|k| if k / n == k % n { ONE } else { ZERO })
        .collect();

    let scale = m.iter().map(|z| z.norm_sqr()).sum::<f64>().max(f64::MIN_POSITIVE);
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j].norm_sqr())
            .sum();
        if off <= scale * 1e-32 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut m, &mut vecs, n, p, q);
            }
        }
    }

    let mut pairs: Vec<(f64, StateVector)> = (0..n)
        .map(|k| {
            let col = (0..n).map(|i| vecs[i * n + k]).collect();
            (m[k * n + k].re, StateVector { amps: col })
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let (values, raw): (Vec<f64>, Vec<StateVector>) = pairs.into_iter().unzip();

    let mut vectors = Vec::with_capacity(n);
    for r in cluster_ranges(&values) {
        if r.len() == 1 {
            vectors.push(fix_phase(&raw[r.start]));
        } else {
            vectors.extend(cluster_basis(&raw[r], n));
        }
    }
    Ok(Eigensystem { values, vectors })
}

/// One complex Jacobi rotation annihilating `m[p][q]`.
fn rotate(m: &mut [C64], vecs: &mut [C64], n: usize, p: usize, q: usize) {
    let apq = m[p * n + q];
    let g = apq.norm();
    if g == 0.0 {
        return;
    }
    let app = m[p * n + p].re;
    let aqq = m[q * n + q].re;
    // Remove the phase of a_pq, then apply the real symmetric rotation.
    let phase = cis(-apq.arg());
    let tau = (aqq - app) / (2.0 * g);
    let t = if tau >= 0.0 {
        1.0 / (tau + hypot(1.0, tau))
    } else {
        -1.0 / (-tau + hypot(1.0, tau))
    };
    let c = 1.0 / sqrt(1.0 + t * t);
    let s = t * c;
    let cp = phase.conj();

    // A <- A U (columns p, q)
    for i in 0..n {
        let xp = m[i * n + p];
        let xq = m[i * n + q];
        m[i * n + p] = xp * c - xq * phase * s;
        m[i * n + q] = xp * s + xq * phase * c;
    }
    // A <- U† A (rows p, q)
    for j in 0..n {
        let xp = m[p * n + j];
        let xq = m[q * n + j];
        m[p * n + j] = xp * c - xq * cp * s;
        m[q * n + j] = xp * s + xq * cp * c;
    }
    m[p * n + q] = ZERO;
    m[q * n + p] = ZERO;
    m[p * n + p] = C64::new(app - t * g, 0.0);
    m[q * n + q] = C64::new(aqq + t * g, 0.0);
    for i in 0..n {
        let xp = vecs[i * n + p];
        let xq = vecs[i * n + q];
        vecs[i * n + p] = xp * c - xq * phase * s;
        vecs[i * n + q] = xp * s + xq * phase * c;
    }
}

fn fix_phase(v: &StateVector) -> StateVector {
    let max = v.amps.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let lead = v
        .amps
        .iter()
        .find(|z| z.norm() >= 0.5 * max)
        .copied()
        .unwrap_or(ONE);
    let v = v.scale(lead.conj() / lead.norm());
    v.normalized().unwrap_or(v)
}

/// Deterministic orthonormal basis of the span of `raw`.
fn cluster_basis(raw: &[StateVector], n: usize) -> Vec<StateVector> {
    let project = |x: &StateVector| {
        let mut out = StateVector::zeros(n);
        for v in raw {
            let c = v.inner(x);
            for (o, a) in out.amps.iter_mut().zip(&v.amps) {
                *o += a * c;
            }
        }
        out
    };
    let orthogonalize = |x: &mut StateVector, basis: &[StateVector]| {
        // Two passes of modified Gram-Schmidt.
        for _ in 0..2 {
            for b in basis {
                let c = b.inner(x);
                for (o, a) in x.amps.iter_mut().zip(&b.amps) {
                    *o -= a * c;
                }
            }
        }
    };
    let threshold = 1e-3 / n as f64;
    let mut basis: Vec<StateVector> = Vec::with_capacity(raw.len());
    for k in 0..n {
        if basis.len() == raw.len() {
            break;
        }
        let mut x = project(&StateVector::basis(n, k));
        orthogonalize(&mut x, &basis);
        let w = x.norm_sqr();
        if w >= threshold {
            basis.push(x.normalized().expect("residual above threshold"));
        }
    }
    // Unreachable for exact arithmetic; keeps the count right under roundoff.
    while basis.len() < raw.len() {
        let mut best: Option<StateVector> = None;
        let mut best_w = -1.0;
        for k in 0..n {
            let mut x = project(&StateVector::basis(n, k));
            orthogonalize(&mut x, &basis);
            let w = x.norm_sqr();
            if w > best_w {
                best_w = w;
                best = Some(x);
            }
        }
        match best.and_then(|x| x.normalized().ok()) {
            Some(x) => basis.push(x),
            None => break,
        }
    }
    basis
}
