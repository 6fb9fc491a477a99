//! Grid-sampled `L²(ℝ)` meter.
//!
//! Meter functions are closed-form expression trees, so translation,
//! dilation and phase twists are exact and the trapezoid rule on a uniform
//! grid is the only discretization. The momentum operator never appears as
//! a difference quotient: `e^{−iβP}` is applied as the translation
//! `m ↦ m(· − β)`, and `Pm = −im'` uses the closed-form derivative.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{cis, exp, sqrt, PI};
use crate::protocols::{postselection_overlap, require_fixed, require_normalized, POSTSELECTION_FLOOR};
use crate::qlin::{hermitian_eigensystem, Operator, StateVector, C64, ZERO};

/// Default grid half-width in units of the meter width.
pub const DEFAULT_HALF_WIDTH: f64 = 16.0;
/// Default number of grid points.
pub const DEFAULT_POINTS: usize = 8192;
/// Largest meter mass tolerated in the boundary band.
pub const BOUNDARY_MASS_TOL: f64 = 1e-6;
/// Tolerance on `‖m‖² = 1` and `⟨m,Qm⟩ = 0`.
pub const METER_TOL: f64 = 1e-8;

/// Uniform grid `q_k = q_min + k h`, `k = 0..n`, `h = (q_max − q_min)/n`,
/// integrated with the periodic trapezoid rule (weight `h` per point).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    q_min: f64,
    q_max: f64,
    n_points: usize,
}

impl Grid {
    pub fn new(q_min: f64, q_max: f64, n_points: usize) -> Result<Self> {
        if !(q_min.is_finite() && q_max.is_finite()) {
            return Err(Error::Grid {
                reason: "bounds must be finite",
            });
        }
        if q_min >= q_max {
            return Err(Error::Grid {
                reason: "q_min must be below q_max",
            });
        }
        if n_points < 2 {
            return Err(Error::Grid {
                reason: "at least 2 points are required",
            });
        }
        Ok(Grid {
            q_min,
            q_max,
            n_points,
        })
    }

    /// `[−16 w, 16 w]` with 8192 points.
    pub fn default_for_width(width: f64) -> Result<Self> {
        Self::new(
            -DEFAULT_HALF_WIDTH * width,
            DEFAULT_HALF_WIDTH * width,
            DEFAULT_POINTS,
        )
    }

    pub fn q_min(&self) -> f64 {
        self.q_min
    }

    pub fn q_max(&self) -> f64 {
        self.q_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        (self.q_max - self.q_min) / self.n_points as f64
    }

    #[inline]
    pub fn point(&self, k: usize) -> f64 {
        self.q_min + k as f64 * self.spacing()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.spacing();
        (0..self.n_points).map(move |k| self.q_min + k as f64 * h)
    }

    /// Same interval with twice the points.
    pub fn refined(&self) -> Self {
        Grid {
            n_points: 2 * self.n_points,
            ..*self
        }
    }

    /// Same number of points on `[q_min·c, q_max·c]`.
    pub fn dilated(&self, c: f64) -> Result<Self> {
        Self::new(self.q_min * c, self.q_max * c, self.n_points)
    }

    /// Same spacing, with a different point count or origin.
    pub fn with_points(&self, n_points: usize) -> Result<Self> {
        Self::new(self.q_min, self.q_max, n_points)
    }

    /// Points per side in the boundary band (the outer 1/32 of the grid).
    pub fn band_points(&self) -> usize {
        self.n_points.div_ceil(32)
    }

    /// `(m(q_k))_k`.
    pub fn sample(&self, m: &MeterFunction) -> Vec<C64> {
        self.points().map(|q| m.value(q)).collect()
    }

    /// `h Σ conj(a_k) b_k`.
    pub fn inner(&self, a: &[C64], b: &[C64]) -> C64 {
        let sum: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
        sum * self.spacing()
    }

    /// `h Σ conj(a_k) q_k b_k`.
    pub fn position_element(&self, a: &[C64], b: &[C64]) -> C64 {
        let sum: C64 = a
            .iter()
            .zip(b)
            .zip(self.points())
            .map(|((x, y), q)| x.conj() * y * q)
            .sum();
        sum * self.spacing()
    }

    /// Mass of `|g|²` in the boundary band on either side.
    pub fn boundary_mass(&self, g: &[C64]) -> f64 {
        let band = self.band_points().min(g.len());
        let lo: f64 = g[..band].iter().map(|z| z.norm_sqr()).sum();
        let hi: f64 = g[g.len() - band..].iter().map(|z| z.norm_sqr()).sum();
        (lo + hi) * self.spacing()
    }

    /// Fails with a grid-support error if the boundary mass exceeds
    /// [`BOUNDARY_MASS_TOL`].
    pub fn check_support(&self, g: &[C64]) -> Result<()> {
        let mass = self.boundary_mass(g);
        if mass > BOUNDARY_MASS_TOL {
            return Err(Error::GridSupport { mass });
        }
        Ok(())
    }
}

/// Closed-form meter function `q ↦ m(q)`.
#[derive(Debug, Clone, PartialEq)]
pub enum MeterFunction {
    /// `[e^{−q²/2σ²} / (√(2π) σ)]^{1/2}`.
    Gaussian { sigma: f64 },
    /// `√(128/35w) cos⁴(π(q − c)/w)` on `|q − c| ≤ w/2`, zero elsewhere.
    Bump { center: f64, width: f64 },
    /// `m(q − β)`.
    Translated { base: Box<MeterFunction>, beta: f64 },
    /// `e^{−iq²δ/2} m(q)`.
    Twisted { base: Box<MeterFunction>, delta: f64 },
    /// `m(qε)√ε`.
    Scaled { base: Box<MeterFunction>, eps: f64 },
}

impl MeterFunction {
    /// `(m(q), m'(q))`.
    pub fn eval(&self, q: f64) -> (C64, C64) {
        match self {
            MeterFunction::Gaussian { sigma } => {
                let norm = 1.0 / sqrt(sqrt(2.0 * PI) * sigma);
                let v = norm * exp(-q * q / (4.0 * sigma * sigma));
                let d = -q / (2.0 * sigma * sigma) * v;
                (C64::new(v, 0.0), C64::new(d, 0.0))
            }
            MeterFunction::Bump { center, width } => {
                let x = q - center;
                if x.abs() > 0.5 * width {
                    return (ZERO, ZERO);
                }
                let norm = sqrt(128.0 / (35.0 * width));
                let k = PI / width;
                let (s, c) = (libm::sin(k * x), libm::cos(k * x));
                let c3 = c * c * c;
                (
                    C64::new(norm * c3 * c, 0.0),
                    C64::new(-4.0 * norm * k * c3 * s, 0.0),
                )
            }
            MeterFunction::Translated { base, beta } => base.eval(q - beta),
            MeterFunction::Twisted { base, delta } => {
                let (v, d) = base.eval(q);
                let phase = cis(-0.5 * delta * q * q);
                (phase * v, phase * (d - C64::new(0.0, delta * q) * v))
            }
            MeterFunction::Scaled { base, eps } => {
                let (v, d) = base.eval(q * eps);
                let r = sqrt(*eps);
                (v * r, d * (r * eps))
            }
        }
    }

    pub fn value(&self, q: f64) -> C64 {
        self.eval(q).0
    }

    pub fn derivative(&self, q: f64) -> C64 {
        self.eval(q).1
    }

    /// True when every value is real by construction.
    pub fn is_real(&self) -> bool {
        match self {
            MeterFunction::Gaussian { .. } | MeterFunction::Bump { .. } => true,
            MeterFunction::Translated { base, .. } | MeterFunction::Scaled { base, .. } => {
                base.is_real()
            }
            MeterFunction::Twisted { base, delta } => *delta == 0.0 && base.is_real(),
        }
    }

    /// Half-width of the region outside which `|m|` is negligible, used to
    /// size default grids.
    pub fn scale(&self) -> f64 {
        match self {
            MeterFunction::Gaussian { sigma } => *sigma,
            MeterFunction::Bump { width, .. } => *width,
            MeterFunction::Translated { base, beta } => base.scale() + beta.abs(),
            MeterFunction::Twisted { base, .. } => base.scale(),
            MeterFunction::Scaled { base, eps } => base.scale() / eps,
        }
    }

    /// Checks `‖m‖² = 1`, `⟨m,Qm⟩ = 0` and grid support.
    pub fn check_admissible(&self, grid: &Grid) -> Result<()> {
        let g = grid.sample(self);
        grid.check_support(&g)?;
        let n2 = grid.inner(&g, &g).re;
        if (n2 - 1.0).abs() > METER_TOL {
            return Err(Error::MeterState {
                what: "|m|^2 - 1",
                value: n2 - 1.0,
            });
        }
        let mean = grid.position_element(&g, &g).re;
        if mean.abs() > METER_TOL {
            return Err(Error::MeterState {
                what: "<m,Qm>",
                value: mean,
            });
        }
        Ok(())
    }
}

pub fn gaussian_meter(sigma: f64) -> Result<MeterFunction> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain {
            name: "sigma",
            value: sigma,
            domain: "(0, inf)",
        });
    }
    Ok(MeterFunction::Gaussian { sigma })
}

/// Compactly supported, twice continuously differentiable meter of total
/// width `width` centred at `center`.
pub fn compact_bump(center: f64, width: f64) -> Result<MeterFunction> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::Domain {
            name: "width",
            value: width,
            domain: "(0, inf)",
        });
    }
    if !center.is_finite() {
        return Err(Error::Domain {
            name: "center",
            value: center,
            domain: "finite reals",
        });
    }
    Ok(MeterFunction::Bump { center, width })
}

/// `m_β(q) = m(q − β)`.
pub fn translate(m: &MeterFunction, beta: f64) -> MeterFunction {
    if beta == 0.0 {
        return m.clone();
    }
    MeterFunction::Translated {
        base: Box::new(m.clone()),
        beta,
    }
}

/// `e^{−iq²δ/2} m₀(q)` for a real `m₀`.
pub fn phase_twist(m0: &MeterFunction, delta: f64) -> Result<MeterFunction> {
    if !m0.is_real() {
        return Err(Error::Domain {
            name: "phase_twist base",
            value: delta,
            domain: "real-valued meters",
        });
    }
    if delta == 0.0 {
        return Ok(m0.clone());
    }
    Ok(MeterFunction::Twisted {
        base: Box::new(m0.clone()),
        delta,
    })
}

/// `m[ε](q) = m(qε)√ε`.
pub fn scale_meter(m: &MeterFunction, eps: f64) -> Result<MeterFunction> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain {
            name: "epsilon",
            value: eps,
            domain: "(0, inf)",
        });
    }
    if eps == 1.0 {
        return Ok(m.clone());
    }
    Ok(MeterFunction::Scaled {
        base: Box::new(m.clone()),
        eps,
    })
}

/// `⟨m,Q^k m⟩` by quadrature.
pub fn position_moment(m: &MeterFunction, grid: &Grid, k: i32) -> f64 {
    let h = grid.spacing();
    grid.points()
        .map(|q| m.value(q).norm_sqr() * libm::pow(q, k as f64))
        .sum::<f64>()
        * h
}

/// `⟨m,QPm⟩` with `Pm = −im'`.
pub fn qp_expectation(m: &MeterFunction, grid: &Grid) -> C64 {
    let h = grid.spacing();
    let minus_i = C64::new(0.0, -1.0);
    let sum: C64 = grid
        .points()
        .map(|q| {
            let (v, d) = m.eval(q);
            v.conj() * q * minus_i * d
        })
        .sum();
    sum * h
}

/// One term `V P_λ s ⊗ m_{εα}` of the prepared state.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub alpha: f64,
    pub system: StateVector,
    pub meter: MeterFunction,
}

/// Continuum-meter scenario: `(V⊗I)e^{−iεA⊗P}(s⊗m)` postselected on `f`
/// and read out with `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct AAVScenario {
    s: StateVector,
    a: Operator,
    v: Operator,
    f: StateVector,
    m: MeterFunction,
    grid: Grid,
    epsilon: f64,
}

impl AAVScenario {
    /// `ε = 0` is accepted (no coupling); the weak-value quotient itself
    /// needs `ε > 0`.
    pub fn new(
        s: StateVector,
        a: Operator,
        v: Operator,
        f: StateVector,
        m: MeterFunction,
        grid: Grid,
        epsilon: f64,
    ) -> Result<Self> {
        require_normalized(&s)?;
        a.check_dim(s.dim())?;
        v.check_dim(s.dim())?;
        f.check_dim(s.dim())?;
        if f.norm_sqr() == 0.0 {
            return Err(Error::ZeroVector);
        }
        let a = a.hermitian()?;
        let v = v.unitary()?;
        require_fixed(&v, &s)?;
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::Domain {
                name: "epsilon",
                value: epsilon,
                domain: "[0, inf)",
            });
        }
        m.check_admissible(&grid)?;
        Ok(AAVScenario {
            s,
            a,
            v,
            f,
            m,
            grid,
            epsilon,
        })
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::Domain {
                name: "epsilon",
                value: epsilon,
                domain: "[0, inf)",
            });
        }
        Ok(AAVScenario {
            epsilon,
            ..self.clone()
        })
    }

    pub fn with_grid(&self, grid: Grid) -> Result<Self> {
        self.m.check_admissible(&grid)?;
        Ok(AAVScenario {
            grid,
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
    pub fn f(&self) -> &StateVector {
        &self.f
    }
    pub fn meter(&self) -> &MeterFunction {
        &self.m
    }
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `e^{−iεA⊗P}(s⊗m) = Σ_λ P_λ s ⊗ m_{ελ}` over the spectral projectors
    /// of `A`, followed by `V⊗I`.
    pub fn branches(&self) -> Result<Vec<Branch>> {
        branches(&self.s, &self.a, &self.v, &self.m, self.epsilon)
    }
}

fn branches(
    s: &StateVector,
    a: &Operator,
    v: &Operator,
    m: &MeterFunction,
    shift_scale: f64,
) -> Result<Vec<Branch>> {
    let es = hermitian_eigensystem(a)?;
    Ok(es
        .spectral_projectors()
        .into_iter()
        .map(|(alpha, p)| Branch {
            alpha,
            system: v.apply(&p.apply(s)),
            meter: translate(m, shift_scale * alpha),
        })
        .collect())
}

/// Numerator `⟨·,(T⊗Q)·⟩` and denominator `⟨·,(T⊗I)·⟩` with
/// `T = P_f` (or `I` when `f` is `None`) for a branch expansion.
fn branch_quotient(
    branches: &[Branch],
    f: Option<&StateVector>,
    grid: &Grid,
) -> Result<(C64, C64)> {
    let samples: Vec<Vec<C64>> = branches.iter().map(|b| grid.sample(&b.meter)).collect();
    for g in &samples {
        grid.check_support(g)?;
    }
    let fhat = f.map(|f| f.normalized()).transpose()?;
    let mut num = ZERO;
    let mut den = ZERO;
    for (i, bi) in branches.iter().enumerate() {
        for (j, bj) in branches.iter().enumerate() {
            let t = match &fhat {
                Some(f) => f.inner(&bi.system).conj() * f.inner(&bj.system),
                None => bi.system.inner(&bj.system),
            };
            if t == ZERO {
                continue;
            }
            num += t * grid.position_element(&samples[i], &samples[j]);
            den += t * grid.inner(&samples[i], &samples[j]);
        }
    }
    Ok((num, den))
}

fn require_positive_epsilon(eps: f64) -> Result<()> {
    if !(eps > 0.0) {
        return Err(Error::Domain {
            name: "epsilon",
            value: eps,
            domain: "(0, inf)",
        });
    }
    Ok(())
}

/// `⟨·,(P_f⊗Q)·⟩ / (ε ⟨·,(P_f⊗I)·⟩)` for the prepared state
/// `(V⊗I)e^{−iεA⊗P}(s⊗m)`.
pub fn aav_conditional_expectation(sc: &AAVScenario) -> Result<f64> {
    require_positive_epsilon(sc.epsilon)?;
    postselection_overlap(&sc.f, &sc.s)?;
    let (num, den) = branch_quotient(&sc.branches()?, Some(&sc.f), &sc.grid)?;
    if den.re < POSTSELECTION_FLOOR {
        return Err(Error::DegeneratePostselection {
            probability: den.re,
        });
    }
    Ok(num.re / den.re / sc.epsilon)
}

/// Probability of passing postselection, `⟨·,(P_f⊗I)·⟩`.
pub fn aav_postselection_probability(sc: &AAVScenario) -> Result<f64> {
    let (_, den) = branch_quotient(&sc.branches()?, Some(&sc.f), &sc.grid)?;
    Ok(den.re)
}

/// Unconditional `⟨·,(I⊗Q)·⟩ / ε`; tends to `⟨s,As⟩`.
pub fn aav_normalized_meter_expectation(sc: &AAVScenario) -> Result<f64> {
    require_positive_epsilon(sc.epsilon)?;
    let (num, _) = branch_quotient(&sc.branches()?, None, &sc.grid)?;
    Ok(num.re / sc.epsilon)
}

/// `⟨m_{εα_i}, Q m_{εα_j}⟩` by quadrature.
pub fn translation_kernel(m: &MeterFunction, grid: &Grid, a: f64, b: f64) -> C64 {
    let gi = grid.sample(&translate(m, a));
    let gj = grid.sample(&translate(m, b));
    grid.position_element(&gi, &gj)
}

/// `Re w + 2δ Im w` with `w = ⟨f,VAs⟩/⟨f,Vs⟩`.
pub fn aav_weak_value_analytic(
    s: &StateVector,
    a: &Operator,
    v: &Operator,
    f: &StateVector,
    delta: f64,
) -> Result<f64> {
    a.check_dim(s.dim())?;
    v.check_dim(s.dim())?;
    let vs = v.apply(s);
    let den = postselection_overlap(f, &vs)?;
    let w = f.inner(&v.apply(&a.apply(s))) / den;
    Ok(w.re + 2.0 * delta * w.im)
}

/// Both sides of the rescaling identity with `V = I`:
/// `lhs` uses `H(ε) = εA⊗P` with meter `m` on `grid`, and `rhs` uses
/// `H(1)` with meter `m[ε]` on `grid` dilated by `1/ε`.
pub fn hamiltonian_equivalence_check(
    s: &StateVector,
    a: &Operator,
    f: &StateVector,
    m: &MeterFunction,
    eps: f64,
    grid: &Grid,
) -> Result<(f64, f64)> {
    let id = Operator::identity(s.dim());
    let sc = AAVScenario::new(s.clone(), a.clone(), id.clone(), f.clone(), m.clone(), *grid, eps)?;
    let lhs = aav_conditional_expectation(&sc)?;

    let wide = grid.dilated(1.0 / eps)?;
    let m_eps = scale_meter(m, eps)?;
    m_eps.check_admissible(&wide)?;
    let (num, den) = branch_quotient(&branches(s, &sc.a, &id, &m_eps, 1.0)?, Some(f), &wide)?;
    if den.re < POSTSELECTION_FLOOR {
        return Err(Error::DegeneratePostselection {
            probability: den.re,
        });
    }
    Ok((lhs, num.re / den.re))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convergence::loglog_slope;
    use crate::protocols::{complex_weak_value, eta_phase_unitary};
    use crate::qlin::ONE;
    use core::f64::consts::FRAC_1_SQRT_2;
    use std::vec;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sigma_x() -> Operator {
        Operator::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
    }

    fn unit_gaussian() -> MeterFunction {
        gaussian_meter(1.0).unwrap()
    }

    fn grid12() -> Grid {
        Grid::new(-12.0, 12.0, 4096).unwrap()
    }

    fn scenario_2d() -> (StateVector, Operator, StateVector) {
        let s = StateVector::new(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let a = Operator::from_rows(&[
            &[c(0.3, 0.0), c(0.5, -0.2)],
            &[c(0.5, 0.2), c(-0.7, 0.0)],
        ])
        .unwrap();
        let f = StateVector::new(vec![c(0.9, 0.1), c(0.2, 0.4)]).unwrap();
        (s, a, f)
    }

    #[test]
    fn gaussian_moments() {
        let m = unit_gaussian();
        let g = grid12();
        assert!((position_moment(&m, &g, 0) - 1.0).abs() < 1e-8);
        assert!(position_moment(&m, &g, 1).abs() < 1e-10);
        assert!((position_moment(&m, &g, 2) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn translation_shifts_the_mean() {
        let m = unit_gaussian();
        let g = grid12();
        assert_eq!(translate(&m, 0.0), m);
        assert!((position_moment(&translate(&m, 0.3), &g, 1) - 0.3).abs() < 1e-8);
    }

    #[test]
    fn translations_are_strongly_continuous() {
        let m = unit_gaussian();
        let g = grid12();
        let base = g.sample(&m);
        let betas = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];
        let dists: Vec<f64> = betas
            .iter()
            .map(|&b| {
                let moved = g.sample(&translate(&m, b));
                let d: Vec<C64> = moved.iter().zip(&base).map(|(x, y)| x - y).collect();
                sqrt(g.inner(&d, &d).re)
            })
            .collect();
        let slope = loglog_slope(&betas, &dists).unwrap();
        assert!((slope - 1.0).abs() < 0.05, "{slope}");
    }

    #[test]
    fn twist_keeps_modulus() {
        let m0 = unit_gaussian();
        assert_eq!(phase_twist(&m0, 0.0).unwrap(), m0);
        let m = phase_twist(&m0, 0.7).unwrap();
        for q in grid12().points() {
            assert!((m.value(q).norm() - m0.value(q).norm()).abs() < 1e-15);
        }
        assert!(phase_twist(&m, 0.1).is_err());
    }

    #[test]
    fn twisted_qp_expectation() {
        let g = grid12();
        for delta in [-1.0, -0.3, 0.0, 0.5, 1.0] {
            let m = phase_twist(&unit_gaussian(), delta).unwrap();
            let qp = qp_expectation(&m, &g);
            assert!((qp.im - 0.5).abs() < 1e-6);
            // ⟨m₀,Q²m₀⟩ = 1, so the real part is −δ.
            assert!((qp.re + delta).abs() < 1e-6, "{delta}: {qp}");
        }
    }

    #[test]
    fn scaled_gaussian_is_wider_gaussian() {
        let eps = 0.25;
        let scaled = scale_meter(&unit_gaussian(), eps).unwrap();
        let wide = gaussian_meter(1.0 / eps).unwrap();
        let g = Grid::new(-64.0, 64.0, 4096).unwrap();
        for q in g.points() {
            assert!((scaled.value(q) - wide.value(q)).norm() < 1e-15);
        }
        assert!((position_moment(&scaled, &g, 0) - 1.0).abs() < 1e-8);
        assert_eq!(scale_meter(&unit_gaussian(), 1.0).unwrap(), unit_gaussian());
        assert!(scale_meter(&unit_gaussian(), 0.0).is_err());
    }

    #[test]
    fn bump_is_admissible_and_compact() {
        let m = compact_bump(0.0, 1.0).unwrap();
        let g = Grid::new(-2.0, 2.0, 4096).unwrap();
        m.check_admissible(&g).unwrap();
        assert_eq!(m.value(0.51), ZERO);
        // Closed-form derivative against a central difference.
        let h = 1e-6;
        for q in [-0.3, -0.1, 0.05, 0.2, 0.45] {
            let fd = (m.value(q + h) - m.value(q - h)) / (2.0 * h);
            assert!((fd - m.derivative(q)).norm() < 1e-6);
        }
    }

    #[test]
    fn boundary_guard_trips() {
        let m = gaussian_meter(1.0).unwrap();
        let narrow = Grid::new(-4.0, 4.0, 1024).unwrap();
        assert!(matches!(
            m.check_admissible(&narrow),
            Err(Error::GridSupport { .. })
        ));
        let off_centre = translate(&m, 1.0);
        assert!(matches!(
            off_centre.check_admissible(&grid12()),
            Err(Error::MeterState { .. })
        ));
    }

    #[test]
    fn usual_weak_value_on_grid() {
        let (s, a, f) = scenario_2d();
        let grid = Grid::default_for_width(1.0).unwrap();
        let id = Operator::identity(2);
        let sc = AAVScenario::new(s.clone(), a.clone(), id.clone(), f.clone(), unit_gaussian(), grid, 1e-3).unwrap();
        let got = aav_conditional_expectation(&sc).unwrap();
        let want = aav_weak_value_analytic(&s, &a, &id, &f, 0.0).unwrap();
        assert!(((got - want) / want).abs() < 1e-2, "{got} vs {want}");
    }

    #[test]
    fn eta_phase_on_grid() {
        let s = StateVector::basis(2, 0);
        let f = StateVector::from_real(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]).unwrap();
        let v = eta_phase_unitary(&s, c(-1.0, 0.0)).unwrap();
        let sc = AAVScenario::new(s.clone(), sigma_x(), v.clone(), f.clone(), unit_gaussian(), grid12(), 1e-3).unwrap();
        let got = aav_conditional_expectation(&sc).unwrap();
        assert!((got + 1.0).abs() < 1e-2);
        assert_eq!(aav_weak_value_analytic(&s, &sigma_x(), &v, &f, 0.0).unwrap(), -1.0);
    }

    #[test]
    fn analytic_delta_sweep() {
        // w = 0.3 + 0.4i: s = (1,0), f = (1,0)... built so that ⟨f,As⟩/⟨f,s⟩ = w.
        let s = StateVector::basis(2, 0);
        let a = Operator::from_rows(&[&[c(0.3, 0.0), c(0.2, -0.4)], &[c(0.2, 0.4), ZERO]]).unwrap();
        // ⟨f,As⟩/⟨f,s⟩ = 0.3 + (0.2+0.4i)·f₂*/f₁*; take f = (1, 1).
        let f = StateVector::from_real(&[1.0, 1.0]).unwrap();
        let id = Operator::identity(2);
        let w = complex_weak_value(&s, &a, &id, &f).unwrap();
        assert!((w - c(0.5, 0.4)).norm() < 1e-15);
        let a = &a - &Operator::identity(2).scale(c(0.2, 0.0));
        let got: Vec<f64> = [-1.0, 0.0, 1.0]
            .iter()
            .map(|&d| aav_weak_value_analytic(&s, &a, &id, &f, d).unwrap())
            .collect();
        for (g, want) in got.iter().zip([-0.5, 0.3, 1.1]) {
            assert!((g - want).abs() < 1e-14, "{got:?}");
        }
    }

    #[test]
    fn kernel_limit_for_real_and_twisted_meters() {
        let g = grid12();
        let (ai, aj) = (0.7, -1.3);
        let eps = [1e-1, 1e-2, 1e-3];
        for delta in [0.0, 0.5] {
            let m = phase_twist(&unit_gaussian(), delta).unwrap();
            let errs: Vec<f64> = eps
                .iter()
                .map(|&e| {
                    let k = translation_kernel(&m, &g, e * ai, e * aj) / e;
                    let want = c((ai + aj) / 2.0, (aj - ai) * delta);
                    (k - want).norm()
                })
                .collect();
            assert!(errs[2] < 1e-2, "{delta}: {errs:?}");
        }
    }

    #[test]
    fn denominator_tends_to_overlap() {
        let (s, a, f) = scenario_2d();
        let sc = AAVScenario::new(s.clone(), a, Operator::identity(2), f.clone(), unit_gaussian(), grid12(), 1e-4).unwrap();
        let want = f.normalized().unwrap().inner(&s).norm_sqr();
        assert!((aav_postselection_probability(&sc).unwrap() - want).abs() < 1e-6);
    }

    #[test]
    fn unconditional_expectation_for_any_fixed_unitary() {
        let (s, a, f) = scenario_2d();
        let want = a.expectation(&s).re;
        for eta in [ONE, c(0.0, 1.0), c(-1.0, 0.0)] {
            let v = eta_phase_unitary(&s, eta).unwrap();
            let sc = AAVScenario::new(s.clone(), a.clone(), v, f.clone(), unit_gaussian(), grid12(), 1e-3).unwrap();
            assert!((aav_normalized_meter_expectation(&sc).unwrap() - want).abs() < 1e-6);
        }
    }

    #[test]
    fn grid_refinement_is_converged() {
        let (s, a, f) = scenario_2d();
        let grid = Grid::default_for_width(1.0).unwrap();
        let sc = AAVScenario::new(s, a, Operator::identity(2), f, unit_gaussian(), grid, 1e-2).unwrap();
        let coarse = aav_conditional_expectation(&sc).unwrap();
        let fine = aav_conditional_expectation(&sc.with_grid(grid.refined()).unwrap()).unwrap();
        assert!((coarse - fine).abs() < 1e-6);
    }

    #[test]
    fn rescaling_identity() {
        let (s, a, f) = scenario_2d();
        let grid = Grid::default_for_width(1.0).unwrap();
        for eps in [1.0, 0.3, 0.1, 0.03] {
            let (lhs, rhs) = hamiltonian_equivalence_check(&s, &a, &f, &unit_gaussian(), eps, &grid).unwrap();
            assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs().max(1.0), "{eps}: {lhs} {rhs}");
        }
    }

    #[test]
    fn twisted_meter_moves_weak_value_along_imaginary_part() {
        // With m = e^{−iq²δ/2} m₀ the kernel gains +iεδ(α_j − α_i), which
        // sums to Re w − 2δ Im w for the postselected quotient.
        let s = StateVector::new(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let f = StateVector::from_real(&[1.0, 0.5]).unwrap();
        let id = Operator::identity(2);
        let w = complex_weak_value(&s, &sigma_x(), &id, &f).unwrap();
        let grid = Grid::default_for_width(1.0).unwrap();
        for delta in [-1.0, -0.5, 0.5, 1.0] {
            let m = phase_twist(&unit_gaussian(), delta).unwrap();
            let sc = AAVScenario::new(s.clone(), sigma_x(), id.clone(), f.clone(), m, grid, 1e-3).unwrap();
            let got = aav_conditional_expectation(&sc).unwrap();
            assert!((got - (w.re - 2.0 * delta * w.im)).abs() < 1e-4, "{delta}: {got}");
            let mirrored = aav_weak_value_analytic(&s, &sigma_x(), &id, &f, -delta).unwrap();
            assert!((got - mirrored).abs() < 1e-4);
        }
    }

    #[test]
    fn quotient_needs_positive_epsilon() {
        let (s, a, f) = scenario_2d();
        let sc = AAVScenario::new(s, a, Operator::identity(2), f, unit_gaussian(), grid12(), 0.0).unwrap();
        assert!(matches!(
            aav_conditional_expectation(&sc),
            Err(Error::Domain { .. })
        ));
    }
}
