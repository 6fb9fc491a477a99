//! Disturbance of the system by a binned meter readout.
//!
//! `Q` has no eigenvectors, so the readout is modelled by the binned
//! position `(B_λ g)(q) = λ⌊q/λ⌋ g(q)`, whose spectral projectors `P_k` are
//! indicator functions of `[kλ, (k+1)λ)`. The post-readout system state is
//! then well defined and its trace distance from `P_s` measures how weak the
//! coupling was.

use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::math::{ceil, floor};
use crate::meter_grid::{translate, AAVScenario, Grid};
use crate::qlin::{
    hermitian_eigensystem, trace_distance, DensityMatrix, Operator, StateVector, Tags, C64, ZERO,
};

/// Eigenvalues in `[−NEGATIVE_REPAIR_TOL, 0)` are clamped to zero.
pub const NEGATIVE_REPAIR_TOL: f64 = 1e-9;

/// One bin `[kλ, (k+1)λ)` and the grid points it owns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bin {
    pub k: i64,
    pub points: Range<usize>,
}

/// `B_λ` on a grid whose spacing divides `λ` and whose origin is a
/// multiple of the spacing, so every bin boundary is a grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedPosition {
    lambda: f64,
    grid: Grid,
    bins: Vec<Bin>,
}

impl BinnedPosition {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// The aligned grid; it covers the requested interval with spacing no
    /// larger than the requested one.
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn bins(&self) -> &[Bin] {
        &self.bins
    }

    /// `kλ`.
    pub fn eigenvalue(&self, k: i64) -> f64 {
        k as f64 * self.lambda
    }

    /// `B_λ g` for samples on [`Self::grid`].
    pub fn apply(&self, g: &[C64]) -> Vec<C64> {
        let mut out = alloc::vec![ZERO; g.len()];
        for bin in &self.bins {
            let value = self.eigenvalue(bin.k);
            for i in bin.points.clone() {
                out[i] = g[i] * value;
            }
        }
        out
    }

    /// `max_k |λ⌊q_k/λ⌋ − q_k|`.
    pub fn sup_deviation_from_position(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for bin in &self.bins {
            let value = self.eigenvalue(bin.k);
            for i in bin.points.clone() {
                worst = worst.max((value - self.grid.point(i)).abs());
            }
        }
        worst
    }

    /// `‖P_k g‖²` for every bin, in bin order.
    pub fn bin_masses(&self, g: &[C64]) -> Vec<f64> {
        let h = self.grid.spacing();
        self.bins
            .iter()
            .map(|b| g[b.points.clone()].iter().map(|z| z.norm_sqr()).sum::<f64>() * h)
            .collect()
    }
}

/// Builds `B_λ` on a grid aligned with `grid`: the spacing is reduced to
/// `λ / ⌈λ/h⌉` and the interval is widened outward to whole spacings.
pub fn binned_position(lambda: f64, grid: &Grid) -> Result<BinnedPosition> {
    let h = grid.spacing();
    if !(lambda > h && lambda.is_finite()) {
        return Err(Error::BinResolution { lambda, spacing: h });
    }
    let per_bin = ceil(lambda / h - 1e-9).max(1.0) as i64;
    let h_aligned = lambda / per_bin as f64;
    let first = floor(grid.q_min() / h_aligned + 1e-9) as i64;
    let last = ceil(grid.q_max() / h_aligned - 1e-9) as i64;
    let n = (last - first) as usize;
    let aligned = Grid::new(first as f64 * h_aligned, last as f64 * h_aligned, n)?;

    // Integer bin assignment: point j = first + i lies in bin ⌊j / per_bin⌋.
    let mut bins: Vec<Bin> = Vec::new();
    for i in 0..n {
        let k = (first + i as i64).div_euclid(per_bin);
        match bins.last_mut() {
            Some(b) if b.k == k => b.points.end = i + 1,
            _ => bins.push(Bin { k, points: i..i + 1 }),
        }
    }
    Ok(BinnedPosition {
        lambda,
        grid: aligned,
        bins,
    })
}

/// Per-eigenvector data: `σ_i = ⟨a_i, s⟩` and the sampled `m_{εα_i}`.
struct EigenBranches {
    sigma: Vec<C64>,
    samples: Vec<Vec<C64>>,
}

fn eigen_branches(sc: &AAVScenario, bp: &BinnedPosition) -> Result<EigenBranches> {
    let es = hermitian_eigensystem(sc.a())?;
    let grid = bp.grid();
    let sigma: Vec<C64> = es.vectors().iter().map(|a| a.inner(sc.s())).collect();
    let samples: Vec<Vec<C64>> = es
        .values()
        .iter()
        .map(|&al| grid.sample(&translate(sc.meter(), sc.epsilon() * al)))
        .collect();
    for g in &samples {
        grid.check_support(g)?;
    }
    Ok(EigenBranches {
        sigma,
        samples,
    })
}

/// `⟨P_k x, P_k y⟩` for every bin.
fn binned_overlaps(bp: &BinnedPosition, x: &[C64], y: &[C64]) -> Vec<C64> {
    let h = bp.grid().spacing();
    bp.bins()
        .iter()
        .map(|b| {
            let r = b.points.clone();
            x[r.clone()]
                .iter()
                .zip(&y[r])
                .map(|(a, c)| a.conj() * c)
                .sum::<C64>()
                * h
        })
        .collect()
}

/// The system state after reading `B_λ`, as a matrix in the basis
/// `{V a_i}`: `ρ_ij = σ_i σ_j* Σ_k ⟨P_k m_{εα_j}, P_k m_{εα_i}⟩`,
/// divided by its trace (the grid norm of `m`).
///
/// Eigenvalues in `[−1e-9, 0)` are clamped to zero; anything more negative
/// is reported as a numeric-guard error.
pub fn post_measurement_system_state(
    sc: &AAVScenario,
    bp: &BinnedPosition,
) -> Result<DensityMatrix> {
    let br = eigen_branches(sc, bp)?;
    let n = br.sigma.len();
    let mut rho = Operator::zeros(n);
    for i in 0..n {
        for j in i..n {
            let overlap: C64 = binned_overlaps(bp, &br.samples[j], &br.samples[i])
                .into_iter()
                .sum();
            let z = br.sigma[i] * br.sigma[j].conj() * overlap;
            rho.set(i, j, z);
            rho.set(j, i, z.conj());
        }
        let d = rho.get(i, i);
        rho.set(i, i, C64::new(d.re, 0.0));
    }
    let tr = rho.trace().re;
    let rho = rho.scale(C64::new(1.0 / tr, 0.0));
    repair_positivity(rho)
}

fn repair_positivity(rho: Operator) -> Result<DensityMatrix> {
    let rho = rho.with_tags_unchecked(Tags::HERMITIAN);
    let es = hermitian_eigensystem(&rho)?;
    let min = es.values()[0];
    if min < -NEGATIVE_REPAIR_TOL {
        return Err(Error::NegativeEigenvalue { value: min });
    }
    if min >= 0.0 {
        return DensityMatrix::new(rho);
    }
    let clamped = es
        .synthesize(|x| C64::new(x.max(0.0), 0.0))
        .with_tags_unchecked(Tags::HERMITIAN);
    let tr = clamped.trace().re;
    DensityMatrix::new(clamped.scale(C64::new(1.0 / tr, 0.0)))
}

/// `P_s` in the basis `{V a_i}`, i.e. `σσ*`.
pub fn initial_state_in_eigenbasis(sc: &AAVScenario) -> Result<DensityMatrix> {
    let es = hermitian_eigensystem(sc.a())?;
    let sigma: Vec<C64> = es.vectors().iter().map(|a| a.inner(sc.s())).collect();
    DensityMatrix::pure(&StateVector::new(sigma)?)
}

/// Trace distance between the post-readout system state and `P_s`.
pub fn weakness_deficit(sc: &AAVScenario, bp: &BinnedPosition) -> Result<f64> {
    let rho = post_measurement_system_state(sc, bp)?;
    let ps = initial_state_in_eigenbasis(sc)?;
    trace_distance(&rho, &ps)
}

/// Number of bins in which some branch `m_{εα_i}` has nonzero mass.
pub fn active_bin_count(sc: &AAVScenario, bp: &BinnedPosition) -> Result<usize> {
    let br = eigen_branches(sc, bp)?;
    let mut active = alloc::vec![false; bp.bins().len()];
    for (sigma, g) in br.sigma.iter().zip(&br.samples) {
        if *sigma == ZERO {
            continue;
        }
        for (flag, mass) in active.iter_mut().zip(bp.bin_masses(g)) {
            *flag |= mass > 0.0;
        }
    }
    Ok(active.into_iter().filter(|&a| a).count())
}

/// Joint distribution of (bin eigenvalue `kλ`, postselection on `f`) for
/// the prepared state `(V⊗I)e^{−iεA⊗P}(s⊗m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedJoint {
    pub values: Vec<f64>,
    pub p_yes: Vec<f64>,
    pub p_no: Vec<f64>,
}

pub fn binned_joint_distribution(sc: &AAVScenario, bp: &BinnedPosition) -> Result<BinnedJoint> {
    let br = eigen_branches(sc, bp)?;
    let es = hermitian_eigensystem(sc.a())?;
    let fhat = sc.f().normalized()?;
    let systems: Vec<StateVector> = es
        .vectors()
        .iter()
        .zip(&br.sigma)
        .map(|(a, s)| sc.v().apply(&a.scale(*s)))
        .collect();
    let n = systems.len();
    let nb = bp.bins().len();
    let mut p_yes = alloc::vec![0.0; nb];
    let mut p_all = alloc::vec![0.0; nb];
    for i in 0..n {
        for j in 0..n {
            let gram = systems[i].inner(&systems[j]);
            let t = fhat.inner(&systems[i]).conj() * fhat.inner(&systems[j]);
            if gram == ZERO && t == ZERO {
                continue;
            }
            let ov = binned_overlaps(bp, &br.samples[i], &br.samples[j]);
            for (k, o) in ov.iter().enumerate() {
                p_yes[k] += (t * o).re;
                p_all[k] += (gram * o).re;
            }
        }
    }
    let p_no = p_all
        .iter()
        .zip(&p_yes)
        .map(|(a, y)| (a - y).max(0.0))
        .collect();
    let p_yes = p_yes.into_iter().map(|p| p.max(0.0)).collect();
    let values = bp.bins().iter().map(|b| bp.eigenvalue(b.k)).collect();
    Ok(BinnedJoint {
        values,
        p_yes,
        p_no,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meter_grid::{compact_bump, gaussian_meter, MeterFunction};
    use crate::qlin::TensorLayout;
    use proptest::prelude::*;
    use std::vec;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sigma_z() -> Operator {
        Operator::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]).unwrap()
    }

    fn s_plus() -> StateVector {
        StateVector::new(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap()
    }

    fn bump_scenario(a: Operator, eps: f64) -> AAVScenario {
        let grid = Grid::new(-4.0, 4.0, 4096).unwrap();
        let f = StateVector::from_real(&[1.0, 1.0]).unwrap();
        AAVScenario::new(
            s_plus(),
            a,
            Operator::identity(2),
            f,
            compact_bump(0.0, 1.0).unwrap(),
            grid,
            eps,
        )
        .unwrap()
    }

    #[test]
    fn single_bin_support() {
        let grid = Grid::new(-2.0, 2.0, 800).unwrap();
        let bp = binned_position(0.5, &grid).unwrap();
        let g: Vec<C64> = bp
            .grid()
            .points()
            .map(|q| if (0.7..0.9).contains(&q) { c(1.0, 0.5) } else { ZERO })
            .collect();
        let out = bp.apply(&g);
        for (x, y) in out.iter().zip(&g) {
            assert_eq!(*x, y * 0.5);
        }
    }

    #[test]
    fn bins_align_with_grid_points() {
        let grid = Grid::new(-3.3, 2.9, 1000).unwrap();
        let bp = binned_position(0.7, &grid).unwrap();
        assert!(bp.grid().q_min() <= -3.3 && bp.grid().q_max() >= 2.9);
        assert!(bp.grid().spacing() <= grid.spacing() + 1e-15);
        for b in bp.bins() {
            assert_eq!(bp.eigenvalue(b.k), b.k as f64 * 0.7);
            let q0 = bp.grid().point(b.points.start);
            assert!(q0 >= bp.eigenvalue(b.k) - 1e-12);
            let q1 = bp.grid().point(b.points.end - 1);
            assert!(q1 < bp.eigenvalue(b.k + 1) - 1e-12);
        }
        let covered: usize = bp.bins().iter().map(|b| b.points.len()).sum();
        assert_eq!(covered, bp.grid().n_points());
        assert!(bp.sup_deviation_from_position() <= 0.7);
    }

    #[test]
    fn resolution_is_complete() {
        let m = gaussian_meter(1.0).unwrap();
        let grid = Grid::new(-12.0, 12.0, 2048).unwrap();
        let bp = binned_position(1.0, &grid).unwrap();
        let g = bp.grid().sample(&m);
        let total: f64 = bp.bin_masses(&g).iter().sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn bin_width_must_exceed_spacing() {
        let grid = Grid::new(-1.0, 1.0, 10).unwrap();
        assert!(matches!(
            binned_position(0.2, &grid),
            Err(Error::BinResolution { .. })
        ));
    }

    #[test]
    fn zero_coupling_leaves_state_fixed() {
        let sc = bump_scenario(sigma_z(), 0.0);
        let bp = binned_position(1.0, sc.grid()).unwrap();
        assert!(weakness_deficit(&sc, &bp).unwrap() < 1e-12);
    }

    #[test]
    fn scalar_observable_never_disturbs() {
        let a = Operator::identity(2).scale(c(0.7, 0.0));
        for eps in [0.0, 0.1, 0.5] {
            let sc = bump_scenario(a.clone(), eps);
            let bp = binned_position(1.0, sc.grid()).unwrap();
            assert!(weakness_deficit(&sc, &bp).unwrap() < 1e-10);
        }
    }

    #[test]
    fn post_state_is_a_density_matrix() {
        let sc = bump_scenario(sigma_z(), 1e-2);
        let bp = binned_position(1.0, sc.grid()).unwrap();
        let rho = post_measurement_system_state(&sc, &bp).unwrap();
        assert!((rho.op().trace().re - 1.0).abs() < 1e-8);
        let off = rho.op().get(0, 1).norm();
        let bound = (rho.op().get(0, 0).re * rho.op().get(1, 1).re).sqrt();
        assert!(off <= bound + 1e-12);
        assert!(off < bound);
    }

    /// Direct evaluation of the reduced state of
    /// `Σ_i σ_i a_i ⊗ m_{εα_i}` with a dense partial trace.
    fn unbinned_oracle(sc: &AAVScenario, bp: &BinnedPosition) -> Operator {
        let es = hermitian_eigensystem(sc.a()).unwrap();
        let grid = bp.grid();
        let n = grid.n_points();
        let dim = es.dim();
        let mut amps = vec![ZERO; dim * n];
        let h = grid.spacing().sqrt();
        for (i, (alpha, a)) in es.values().iter().zip(es.vectors()).enumerate() {
            let sigma = a.inner(sc.s());
            let g = grid.sample(&translate(sc.meter(), sc.epsilon() * alpha));
            for (k, z) in g.iter().enumerate() {
                amps[i * n + k] = sigma * z * h;
            }
        }
        let u = StateVector::new(amps).unwrap();
        let layout = TensorLayout::new(dim, n).unwrap();
        // tr_M P_u with u written in the {a_i} ⊗ grid basis.
        let mut rho = Operator::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                let z: C64 = (0..n)
                    .map(|k| u.get(layout.index(i, k)) * u.get(layout.index(j, k)).conj())
                    .sum();
                rho.set(i, j, z / u.norm_sqr());
            }
        }
        rho
    }

    #[test]
    fn binning_does_not_change_the_reduced_state() {
        let a = Operator::from_rows(&[&[c(0.2, 0.0), c(0.4, 0.3)], &[c(0.4, -0.3), c(-0.9, 0.0)]]).unwrap();
        let sc = bump_scenario(a, 0.2);
        let bp = binned_position(1.0, sc.grid()).unwrap();
        let rho = post_measurement_system_state(&sc, &bp).unwrap();
        assert!(rho.op().max_abs_diff(&unbinned_oracle(&sc, &bp)) < 1e-12);
    }

    fn deficits(m: MeterFunction, grid: Grid) -> Vec<f64> {
        let f = StateVector::from_real(&[1.0, 1.0]).unwrap();
        let sc = AAVScenario::new(s_plus(), sigma_z(), Operator::identity(2), f, m, grid, 0.0).unwrap();
        let bp = binned_position(1.0, &grid).unwrap();
        [1e-1, 5e-2, 2.5e-2, 1e-2, 5e-3, 2.5e-3, 1e-3]
            .iter()
            .map(|&e| weakness_deficit(&sc.with_epsilon(e).unwrap(), &bp).unwrap())
            .collect()
    }

    #[test]
    fn compact_meter_deficit_decreases() {
        let d = deficits(compact_bump(0.0, 1.0).unwrap(), Grid::new(-4.0, 4.0, 4096).unwrap());
        for w in d.windows(2) {
            assert!(w[1] < w[0], "{d:?}");
        }
        assert!(d[d.len() - 1] < 1e-3);
    }

    #[test]
    fn gaussian_meter_deficit_decreases() {
        let d = deficits(gaussian_meter(1.0).unwrap(), Grid::default_for_width(1.0).unwrap());
        for w in d.windows(2) {
            assert!(w[1] < w[0], "{d:?}");
        }
    }

    #[test]
    fn active_bins_freeze_for_small_coupling() {
        // Bump of width λ centred at 0, max|α| = 1: constant below ε = 1/2.
        let counts: Vec<usize> = [0.4, 0.2, 0.1, 1e-2, 1e-3]
            .iter()
            .map(|&e| {
                let sc = bump_scenario(sigma_z(), e);
                let bp = binned_position(1.0, sc.grid()).unwrap();
                active_bin_count(&sc, &bp).unwrap()
            })
            .collect();
        assert!(counts.iter().all(|&n| n == counts[0]), "{counts:?}");
        let sc = bump_scenario(sigma_z(), 1.2);
        let bp = binned_position(1.0, sc.grid()).unwrap();
        assert!(active_bin_count(&sc, &bp).unwrap() > counts[0]);
    }

    #[test]
    fn joint_distribution_is_normalized() {
        let sc = bump_scenario(sigma_z(), 0.3);
        let bp = binned_position(1.0, sc.grid()).unwrap();
        let j = binned_joint_distribution(&sc, &bp).unwrap();
        let total: f64 = j.p_yes.iter().chain(&j.p_no).sum();
        assert!((total - 1.0).abs() < 1e-10);
        let yes: f64 = j.p_yes.iter().sum();
        let direct = crate::meter_grid::aav_postselection_probability(&sc.with_grid(*bp.grid()).unwrap()).unwrap();
        assert!((yes - direct).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn post_state_invariants(
            eps in 0.0f64..0.4,
            a01 in (-1.0f64..1.0, -1.0f64..1.0),
            diag in (-1.0f64..1.0, -1.0f64..1.0),
        ) {
            let a = Operator::from_rows(&[
                &[c(diag.0, 0.0), c(a01.0, a01.1)],
                &[c(a01.0, -a01.1), c(diag.1, 0.0)],
            ]).unwrap();
            let sc = bump_scenario(a, eps);
            let bp = binned_position(1.0, sc.grid()).unwrap();
            let rho = post_measurement_system_state(&sc, &bp).unwrap();
            prop_assert!(rho.op().is_hermitian());
            prop_assert!((rho.op().trace().re - 1.0).abs() < 1e-9);
            let min = hermitian_eigensystem(rho.op()).unwrap().values()[0];
            prop_assert!(min >= -1e-9);
        }
    }
}
