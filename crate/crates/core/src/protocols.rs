//! Finite-dimensional meter protocols.
//!
//! Two families are covered. The qubit-meter protocol prepares
//! `r̂(ε) ∝ (V⊗I)(s⊗m₀√(1−ε²) + As⊗m₁ε)` directly, and the general-meter
//! protocol prepares `e^{−iε(A⊗G)}(s⊗m)` by exact spectral synthesis. Both
//! expose the unconditional and postselected meter averages, whose `ε → 0`
//! limits are compared with the closed-form weak values.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{cis, sqrt};
use crate::qlin::{
    hermitian_eigensystem, tensor_op, tensor_state, Operator, StateVector, Tags, TensorLayout, C64,
    ONE, ZERO,
};
use crate::states::projector;

/// Tolerance on `|Vs − s|`.
pub const FIXED_STATE_TOL: f64 = 1e-10;
/// `|⟨m,Bm⟩|` above this rules out a general meter.
pub const METER_MEAN_TOL: f64 = 1e-10;
/// Tolerance on `2 Im⟨m,BGm⟩ = 1`.
pub const METER_NORMALIZATION_TOL: f64 = 1e-9;
/// Conditional averages refuse postselection probabilities below this.
pub const POSTSELECTION_FLOOR: f64 = 1e-14;
/// Closed-form weak values refuse `|⟨f̂,s⟩|²` below this.
pub const OVERLAP_FLOOR: f64 = 1e-10;

/// Default ε ladder for limit fits.
pub const DEFAULT_EPSILONS: [f64; 7] = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4];

pub(crate) fn require_normalized(v: &StateVector) -> Result<()> {
    if !v.is_normalized() {
        return Err(Error::NotNormalized {
            norm_sqr: v.norm_sqr(),
        });
    }
    Ok(())
}

pub(crate) fn require_fixed(v: &Operator, s: &StateVector) -> Result<()> {
    let deviation = v.apply(s).distance(s);
    if deviation > FIXED_STATE_TOL {
        return Err(Error::UnitaryMovesState { deviation });
    }
    Ok(())
}

/// `⟨f,s⟩` after checking that `|⟨f̂,s⟩|²` clears [`OVERLAP_FLOOR`].
pub(crate) fn postselection_overlap(f: &StateVector, s: &StateVector) -> Result<C64> {
    f.check_dim(s.dim())?;
    let fs = f.inner(s);
    let n2 = f.norm_sqr() * s.norm_sqr();
    if n2 == 0.0 {
        return Err(Error::ZeroVector);
    }
    let overlap_sqr = fs.norm_sqr() / n2;
    if overlap_sqr < OVERLAP_FLOOR {
        return Err(Error::UndefinedWeakValue { overlap_sqr });
    }
    Ok(fs)
}

fn require_epsilon(eps: f64, lo_open: f64, hi_open: f64, domain: &'static str) -> Result<()> {
    if !(eps > lo_open && eps < hi_open) {
        return Err(Error::Domain {
            name: "epsilon",
            value: eps,
            domain,
        });
    }
    Ok(())
}

/// The default qubit meter observable `B = [[0, ½], [½, 0]]`.
pub fn default_meter_observable() -> Operator {
    Operator::from_real_rows(&[&[0.0, 0.5], &[0.5, 0.0]])
        .expect("2x2")
        .with_tags_unchecked(Tags::HERMITIAN)
}

/// `V = P_s + η(I − P_s)`; in dimension 2 this is `diag(1, η)` in the
/// basis `(s, s⊥)`.
pub fn eta_phase_unitary(s: &StateVector, eta: C64) -> Result<Operator> {
    let modulus = eta.norm();
    if (modulus - 1.0).abs() > 1e-12 {
        return Err(Error::Domain {
            name: "|eta|",
            value: modulus,
            domain: "{1}",
        });
    }
    let ps = projector(s)?;
    let id = Operator::identity(s.dim());
    let v = &ps + &(&id - &ps).scale(eta);
    v.unitary()
}

/// A unitary with `Vs = s` and `Vu = w`, for `u, w` orthogonal to `s` with
/// `|u| = |w|`.
///
/// Built as a phase correction after a Householder reflection: with
/// `φ = arg⟨w,u⟩` and `w' = e^{iφ}w`, the reflection through
/// `x = u − w'` sends `u` to `w'` and fixes `s`; `I + (e^{−iφ} − 1)P_{w'}`
/// then rotates `w'` onto `w`.
pub fn householder_completion(
    s: &StateVector,
    u: &StateVector,
    w: &StateVector,
) -> Result<Operator> {
    u.check_dim(s.dim())?;
    w.check_dim(s.dim())?;
    let ns = s.norm_sqr();
    if ns == 0.0 {
        return Err(Error::ZeroVector);
    }
    for v in [u, w] {
        let leak = v.inner(s).norm() / sqrt(ns);
        if leak > 1e-10 * v.norm().max(1.0) {
            return Err(Error::Domain {
                name: "overlap with s",
                value: leak,
                domain: "{0}",
            });
        }
    }
    let (nu, nw) = (u.norm(), w.norm());
    if (nu - nw).abs() > 1e-10 * nu.max(1.0) {
        return Err(Error::Domain {
            name: "|u| - |w|",
            value: nu - nw,
            domain: "{0}",
        });
    }
    let dim = s.dim();
    let id = Operator::identity(dim);
    if nu == 0.0 {
        return Ok(id);
    }
    let overlap = w.inner(u);
    let phi = if overlap.norm() > 0.0 { overlap.arg() } else { 0.0 };
    let w_rot = w.scale(cis(phi));
    let x = u - &w_rot;
    let reflect = if x.norm() <= 1e-15 * nu {
        id.clone()
    } else {
        &id - &projector(&x)?.scale(C64::new(2.0, 0.0))
    };
    let rephase = &id + &projector(&w_rot)?.scale(cis(-phi) - ONE);
    rephase.mul_op(&reflect).unitary()
}

/// Qubit-meter protocol: system state `s`, observable `A`, unitary `V`
/// with `Vs = s`, meter observable `B` on `span{m₀, m₁}` and coupling
/// strength `ε ∈ (0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitMeterProtocol {
    s: StateVector,
    a: Operator,
    v: Operator,
    b: Operator,
    epsilon: f64,
}

impl QubitMeterProtocol {
    pub fn new(s: StateVector, a: Operator, v: Operator, b: Operator, epsilon: f64) -> Result<Self> {
        require_normalized(&s)?;
        a.check_dim(s.dim())?;
        v.check_dim(s.dim())?;
        b.check_dim(2)?;
        let a = a.hermitian()?;
        let v = v.unitary()?;
        let b = b.hermitian()?;
        require_fixed(&v, &s)?;
        require_epsilon(epsilon, 0.0, 1.0, "(0, 1)")?;
        if a.apply(&s).norm_sqr() == 0.0 {
            return Err(Error::ProtocolNormalization {
                what: "|As|",
                value: 0.0,
            });
        }
        Ok(QubitMeterProtocol { s, a, v, b, epsilon })
    }

    /// Same protocol with `V = I` and the default `B`.
    pub fn usual(s: StateVector, a: Operator, epsilon: f64) -> Result<Self> {
        let dim = s.dim();
        Self::new(s, a, Operator::identity(dim), default_meter_observable(), epsilon)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        require_epsilon(epsilon, 0.0, 1.0, "(0, 1)")?;
        Ok(QubitMeterProtocol {
            epsilon,
            ..self.clone()
        })
    }

    pub fn s(&self) -> &StateVector {
        &self.s
    }
    pub fn a(&self) -> &Operator {
        &self.a
    }
    pub fn v(&self) -> &Operator {
        &self.v
    }
    pub fn b(&self) -> &Operator {
        &self.b
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn layout(&self) -> TensorLayout {
        TensorLayout::new(self.s.dim(), 2).expect("nonzero dims")
    }
}

/// `r̂(ε) = (V⊗I)(s⊗m₀√(1−ε²) + As⊗m₁ε) / √(1−ε²+ε²|As|²)`.
pub fn coupled_state(p: &QubitMeterProtocol) -> Result<StateVector> {
    let eps = p.epsilon;
    let c = sqrt(1.0 - eps * eps);
    let as_ = p.a.apply(&p.s);
    let norm = sqrt(1.0 - eps * eps + eps * eps * as_.norm_sqr());
    let m0 = StateVector::basis(2, 0);
    let m1 = StateVector::basis(2, 1);
    let raw = &tensor_state(&p.s, &m0).scale(C64::new(c, 0.0))
        + &tensor_state(&as_, &m1).scale(C64::new(eps, 0.0));
    let vi = tensor_op(&p.v, &Operator::identity(2));
    Ok(vi.apply(&raw).scale(C64::new(1.0 / norm, 0.0)))
}

/// `⟨r̂,(I⊗B)r̂⟩ / ε`; tends to `2⟨s,As⟩ Re B₁₀` as `ε → 0`.
pub fn normalized_meter_expectation(p: &QubitMeterProtocol) -> Result<f64> {
    let b00 = p.b.get(0, 0).re;
    if b00 != 0.0 {
        return Err(Error::MeterOffset { b00 });
    }
    let r = coupled_state(p)?;
    let ib = tensor_op(&Operator::identity(p.s.dim()), &p.b);
    Ok(ib.expectation(&r).re / p.epsilon)
}

/// Postselected meter average `⟨u,(P_f⊗B)u⟩ / ⟨u,(P_f⊗I)u⟩` of a
/// composite state `u` over `S ⊗ M` with meter observable `b`.
pub fn conditional_average(
    u: &StateVector,
    layout: TensorLayout,
    f: &StateVector,
    b: &Operator,
) -> Result<f64> {
    f.check_dim(layout.dim_s())?;
    b.check_dim(layout.dim_m())?;
    let pf = projector(f)?;
    let num = tensor_op(&pf, b).expectation(u).re;
    let den = tensor_op(&pf, &Operator::identity(layout.dim_m())).expectation(u).re / u.norm_sqr();
    if den < POSTSELECTION_FLOOR {
        return Err(Error::DegeneratePostselection { probability: den });
    }
    Ok(num / u.norm_sqr() / den)
}

/// `E_ε(B|f) = ⟨r̂,(P_f⊗B)r̂⟩ / ⟨r̂,(P_f⊗I)r̂⟩`.
pub fn conditional_meter_expectation(p: &QubitMeterProtocol, f: &StateVector) -> Result<f64> {
    conditional_average(&coupled_state(p)?, p.layout(), f, &p.b)
}

/// `E_ε(B|f) / ε`.
pub fn normalized_conditional_expectation(p: &QubitMeterProtocol, f: &StateVector) -> Result<f64> {
    Ok(conditional_meter_expectation(p, f)? / p.epsilon)
}

/// Probability that `f` is found after preparing `r̂(ε)`.
pub fn postselection_probability(p: &QubitMeterProtocol, f: &StateVector) -> Result<f64> {
    f.check_dim(p.s.dim())?;
    let pf = tensor_op(&projector(f)?, &Operator::identity(2));
    Ok(pf.expectation(&coupled_state(p)?).re)
}

/// `⟨f,VAs⟩ / ⟨f,s⟩`.
pub fn complex_weak_value(
    s: &StateVector,
    a: &Operator,
    v: &Operator,
    f: &StateVector,
) -> Result<C64> {
    a.check_dim(s.dim())?;
    v.check_dim(s.dim())?;
    require_fixed(v, s)?;
    let fs = postselection_overlap(f, s)?;
    Ok(f.inner(&v.apply(&a.apply(s))) / fs)
}

/// `Re(⟨f,VAs⟩ / ⟨f,s⟩)`; with `V = I` the usual weak value.
pub fn weak_value_finite(
    s: &StateVector,
    a: &Operator,
    v: &Operator,
    f: &StateVector,
) -> Result<f64> {
    Ok(complex_weak_value(s, a, v, f)?.re)
}

/// Conditional expectation of `A` given `f` when `A` is measured
/// projectively first: `Σ_λ λ |⟨f,P_λ s⟩|² / Σ_λ |⟨f,P_λ s⟩|²` over the
/// spectral projectors `P_λ` of `A`. For nondegenerate `A` this is
/// `Σ α_i |⟨a_i,s⟩|² |⟨f,a_i⟩|² / Σ |⟨a_i,s⟩|² |⟨f,a_i⟩|²`.
pub fn strong_conditional_expectation(s: &StateVector, a: &Operator, f: &StateVector) -> Result<f64> {
    a.check_dim(s.dim())?;
    f.check_dim(s.dim())?;
    let es = hermitian_eigensystem(a)?;
    let fhat = f.normalized()?;
    let shat = s.normalized()?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (lambda, p) in es.spectral_projectors() {
        let w = fhat.inner(&p.apply(&shat)).norm_sqr();
        num += lambda * w;
        den += w;
    }
    if den < POSTSELECTION_FLOOR {
        return Err(Error::DegeneratePostselection { probability: den });
    }
    Ok(num / den)
}

/// General-meter protocol with preparation `e^{−iε(A⊗G)}(s⊗m)` and meter
/// readout `B`, subject to `⟨m,Bm⟩ = 0` and `2 Im⟨m,BGm⟩ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralMeterProtocol {
    s: StateVector,
    a: Operator,
    f: StateVector,
    m: StateVector,
    b: Operator,
    g: Operator,
    epsilon: f64,
}

impl GeneralMeterProtocol {
    pub fn new(
        s: StateVector,
        a: Operator,
        f: StateVector,
        m: StateVector,
        b: Operator,
        g: Operator,
        epsilon: f64,
    ) -> Result<Self> {
        require_normalized(&s)?;
        require_normalized(&m)?;
        a.check_dim(s.dim())?;
        f.check_dim(s.dim())?;
        b.check_dim(m.dim())?;
        g.check_dim(m.dim())?;
        let a = a.hermitian()?;
        let b = b.hermitian()?;
        let g = g.hermitian()?;
        require_epsilon(epsilon, 0.0, f64::INFINITY, "(0, inf)")?;
        let mean = b.expectation(&m);
        if mean.norm() > METER_MEAN_TOL {
            return Err(Error::MeterOffset { b00: mean.re });
        }
        let kappa2 = 2.0 * m.inner(&b.mul_op(&g).apply(&m)).im;
        if (kappa2 - 1.0).abs() > METER_NORMALIZATION_TOL {
            return Err(Error::ProtocolNormalization {
                what: "2 Im<m,BGm>",
                value: kappa2,
            });
        }
        Ok(GeneralMeterProtocol { s, a, f, m, b, g, epsilon })
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        require_epsilon(epsilon, 0.0, f64::INFINITY, "(0, inf)")?;
        Ok(GeneralMeterProtocol {
            epsilon,
            ..self.clone()
        })
    }

    pub fn s(&self) -> &StateVector {
        &self.s
    }
    pub fn a(&self) -> &Operator {
        &self.a
    }
    pub fn f(&self) -> &StateVector {
        &self.f
    }
    pub fn m(&self) -> &StateVector {
        &self.m
    }
    pub fn b(&self) -> &Operator {
        &self.b
    }
    pub fn g(&self) -> &Operator {
        &self.g
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn layout(&self) -> TensorLayout {
        TensorLayout::new(self.s.dim(), self.m.dim()).expect("nonzero dims")
    }

    /// `ρ = Re⟨m,BGm⟩`.
    pub fn rho(&self) -> f64 {
        self.m.inner(&self.b.mul_op(&self.g).apply(&self.m)).re
    }
}

/// Two-dimensional meter with `m = m₀`, `G = [[0,1],[1,0]]` and
/// `B = [[0, ρ+i/2], [ρ−i/2, 0]]`, so that `⟨m,BGm⟩ = ρ + i/2`.
pub fn two_level_meter(rho: f64) -> (StateVector, Operator, Operator) {
    let m = StateVector::basis(2, 0);
    let g = Operator::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
        .expect("2x2")
        .with_tags_unchecked(Tags::HERMITIAN.union(Tags::UNITARY));
    let b = Operator::from_rows(&[
        &[ZERO, C64::new(rho, 0.5)],
        &[C64::new(rho, -0.5), ZERO],
    ])
    .expect("2x2")
    .with_tags_unchecked(Tags::HERMITIAN);
    (m, b, g)
}

/// `e^{−iε(A⊗G)}(s⊗m)` by spectral synthesis of `A⊗G`.
pub fn general_coupled_state(p: &GeneralMeterProtocol) -> Result<StateVector> {
    let h = tensor_op(&p.a, &p.g);
    let es = hermitian_eigensystem(&h)?;
    let eps = p.epsilon;
    let u = es.synthesize(|x| cis(-eps * x));
    Ok(u.apply(&tensor_state(&p.s, &p.m)))
}

/// `‖e^{−iε(A⊗G)}(s⊗m) − (s⊗m − iε As⊗Gm)‖`, which is `O(ε²)`.
pub fn first_order_residual(p: &GeneralMeterProtocol) -> Result<f64> {
    let exact = general_coupled_state(p)?;
    let first = &tensor_state(&p.s, &p.m)
        - &tensor_state(&p.a.apply(&p.s), &p.g.apply(&p.m)).scale(C64::new(0.0, p.epsilon));
    Ok(exact.distance(&first))
}

/// Closed-form limit and exact finite-ε quotient of the general-meter
/// protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralMeterValue {
    /// `Re wv + 2ρ Im wv` with `wv = ⟨f,As⟩/⟨f,s⟩`, written as
    /// `2 Im(wv ⟨m,BGm⟩)`.
    pub limit: f64,
    /// `E_ε(B|f) / ε` from the exact prepared state.
    pub finite: f64,
}

impl GeneralMeterValue {
    pub fn error(&self) -> f64 {
        (self.finite - self.limit).abs()
    }
}

pub fn general_meter_weak_value(p: &GeneralMeterProtocol) -> Result<GeneralMeterValue> {
    let id = Operator::identity(p.s.dim());
    let wv = complex_weak_value(&p.s, &p.a, &id, &p.f)?;
    let bg = p.m.inner(&p.b.mul_op(&p.g).apply(&p.m));
    let limit = 2.0 * (wv * bg).im;
    let u = general_coupled_state(p)?;
    let finite = conditional_average(&u, p.layout(), &p.f, &p.b)? / p.epsilon;
    Ok(GeneralMeterValue { limit, finite })
}

/// Unconditional normalized meter average of the general protocol; tends
/// to `⟨s,As⟩` under the normalization `2 Im⟨m,BGm⟩ = 1`.
pub fn general_normalized_meter_expectation(p: &GeneralMeterProtocol) -> Result<f64> {
    let u = general_coupled_state(p)?;
    let ib = tensor_op(&Operator::identity(p.s.dim()), &p.b);
    Ok(ib.expectation(&u).re / p.epsilon)
}

/// Values of `f(ε)` over a ladder, for slope fits.
pub fn over_epsilons<T>(
    eps: &[f64],
    mut f: impl FnMut(f64) -> Result<T>,
) -> Result<Vec<T>> {
    eps.iter().map(|&e| f(e)).collect()
}
