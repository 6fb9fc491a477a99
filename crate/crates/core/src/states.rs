//! Projective measurements: projectors, resolutions of the identity and Born
//! probabilities.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::qlin::{DensityMatrix, Operator, StateVector, Tags, C64, PROJECTOR_TOL};

/// Rank-one projector onto the ray of `v`. Unnormalized `v` is accepted:
/// `P_v = P_{v/|v|}`.
pub fn projector(v: &StateVector) -> Result<Operator> {
    let n2 = v.norm_sqr();
    if n2 == 0.0 || !n2.is_finite() {
        return Err(Error::ZeroVector);
    }
    let inv = 1.0 / n2;
    let dim = v.dim();
    let mut p = Operator::from_fn(dim, |i, j| v.get(i) * v.get(j).conj() * inv);
    // Exact Hermitian symmetry and a real diagonal.
    for i in 0..dim {
        let d = p.get(i, i);
        p.set(i, i, C64::new(d.re, 0.0));
    }
    Ok(p.with_tags_unchecked(Tags::HERMITIAN.union(Tags::PROJECTOR)))
}

/// Pairwise orthogonal projectors summing to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionOfIdentity {
    projectors: Vec<Operator>,
}

impl ResolutionOfIdentity {
    pub fn new(projectors: Vec<Operator>) -> Result<Self> {
        let first = projectors.first().ok_or(Error::InvalidResolution {
            reason: "no projectors",
            deviation: 1.0,
        })?;
        let dim = first.dim();
        let mut sum = Operator::zeros(dim);
        for p in &projectors {
            p.check_dim(dim)?;
            p.require_projector()?;
            sum = &sum + p;
        }
        let dev = sum.max_abs_diff(&Operator::identity(dim));
        if dev > PROJECTOR_TOL {
            return Err(Error::InvalidResolution {
                reason: "projectors do not sum to the identity",
                deviation: dev,
            });
        }
        for (i, p) in projectors.iter().enumerate() {
            for q in &projectors[i + 1..] {
                let dev = p.mul_op(q).max_abs_diff(&Operator::zeros(dim));
                if dev > PROJECTOR_TOL {
                    return Err(Error::InvalidResolution {
                        reason: "projectors are not pairwise orthogonal",
                        deviation: dev,
                    });
                }
            }
        }
        let projectors = projectors
            .into_iter()
            .map(|p| p.with_tags_unchecked(Tags::HERMITIAN.union(Tags::PROJECTOR)))
            .collect();
        Ok(ResolutionOfIdentity { projectors })
    }

    /// `{P_{b_i}}` for an orthonormal basis `{b_i}`.
    pub fn from_basis(basis: &[StateVector]) -> Result<Self> {
        Self::new(basis.iter().map(projector).collect::<Result<_>>()?)
    }

    /// The single-element resolution `{I}`.
    pub fn trivial(dim: usize) -> Self {
        ResolutionOfIdentity {
            projectors: alloc::vec![Operator::identity(dim)],
        }
    }

    pub fn projectors(&self) -> &[Operator] {
        &self.projectors
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].dim()
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }
}

/// One branch of a projective measurement. `post_state` is the
/// unnormalized `P_{E_i} v`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementOutcome {
    pub index: usize,
    pub probability: f64,
    pub post_state: StateVector,
}

/// `tr(ρ P_E)`, clamped to `[0, 1]`.
pub fn born_probability(rho: &DensityMatrix, e: &Operator) -> Result<f64> {
    e.check_dim(rho.dim())?;
    e.require_projector()?;
    let p = rho.op().mul_op(e).trace().re;
    Ok(p.clamp(0.0, 1.0))
}

/// Measures `v` against `res`. Every branch is returned, including those with
/// vanishing probability.
pub fn projective_measure(
    v: &StateVector,
    res: &ResolutionOfIdentity,
) -> Result<Vec<MeasurementOutcome>> {
    v.check_dim(res.dim())?;
    let n2 = v.norm_sqr();
    if n2 == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(res
        .projectors()
        .iter()
        .enumerate()
        .map(|(index, p)| {
            let post_state = p.apply(v);
            MeasurementOutcome {
                index,
                probability: post_state.norm_sqr() / n2,
                post_state,
            }
        })
        .collect())
}
