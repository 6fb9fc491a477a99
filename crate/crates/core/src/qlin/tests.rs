use super::*;
use crate::states::projector;
use proptest::prelude::*;
use std::vec::Vec;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn sigma_x() -> Operator {
    Operator::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
}

fn state(pairs: &[(f64, f64)]) -> StateVector {
    StateVector::new(pairs.iter().map(|&(a, b)| c(a, b)).collect()).unwrap()
}

/// Hermitian matrix from a flat list of real parameters.
fn hermitian_from(dim: usize, xs: &[f64]) -> Operator {
    let mut k = 0;
    let mut next = || {
        let v = xs[k % xs.len()];
        k += 1;
        v
    };
    let mut m = Operator::zeros(dim);
    for i in 0..dim {
        m.set(i, i, c(next(), 0.0));
        for j in i + 1..dim {
            let z = c(next(), next());
            m.set(i, j, z);
            m.set(j, i, z.conj());
        }
    }
    m
}

#[test]
fn basis_tensor_product() {
    let v = tensor_state(&StateVector::basis(2, 0), &StateVector::basis(2, 1));
    assert_eq!(v, StateVector::basis(4, 1));
}

#[test]
fn tensor_product_distributes() {
    let s = &StateVector::basis(2, 0) + &StateVector::basis(2, 1);
    let v = tensor_state(&s, &s);
    assert_eq!(v, StateVector::from_real(&[1.0, 1.0, 1.0, 1.0]).unwrap());
}

#[test]
fn tensor_norm_multiplies() {
    let a = state(&[(0.6, 0.0), (0.0, 0.8)]);
    let b = state(&[(0.0, 0.28), (0.96, 0.0)]);
    assert!((tensor_state(&a, &b).norm() - 1.0).abs() < 1e-12);
}

#[test]
fn identity_tensor_identity() {
    let id = tensor_op(&Operator::identity(2), &Operator::identity(3));
    assert_eq!(id, Operator::identity(6));
    assert!(id.is_unitary() && id.is_hermitian());
}

#[test]
fn system_and_meter_factors_commute() {
    let theta: f64 = 0.7;
    let v = Operator::from_rows(&[
        &[c(theta.cos(), 0.0), c(0.0, theta.sin())],
        &[c(0.0, theta.sin()), c(theta.cos(), 0.0)],
    ])
    .unwrap()
    .unitary()
    .unwrap();
    let b = hermitian_from(2, &[0.3, -0.2, 0.5, 1.1]).hermitian().unwrap();
    let left = tensor_op(&v, &Operator::identity(2)).mul_op(&tensor_op(&Operator::identity(2), &b));
    let right = tensor_op(&Operator::identity(2), &b).mul_op(&tensor_op(&v, &Operator::identity(2)));
    assert!(left.max_abs_diff(&right) < 1e-15);
    assert!(tensor_op(&v, &v).is_unitary());
}

#[test]
fn tensor_op_acts_factorwise() {
    let a = hermitian_from(2, &[0.1, 0.4, -0.3, 0.9]);
    let b = hermitian_from(3, &[1.0, -0.5, 0.2, 0.7, 0.3, -0.8, 0.6, 0.1, 0.4]);
    let x = state(&[(0.3, 0.1), (-0.2, 0.5)]);
    let y = state(&[(0.7, 0.0), (0.1, -0.1), (0.0, 0.4)]);
    let lhs = tensor_op(&a, &b).apply(&tensor_state(&x, &y));
    let rhs = tensor_state(&a.apply(&x), &b.apply(&y));
    assert!(lhs.distance(&rhs) < 1e-12);
}

#[test]
fn partial_trace_of_product_state() {
    let layout = TensorLayout::new(2, 3).unwrap();
    let s = state(&[(0.6, 0.0), (0.0, 0.8)]);
    let m = state(&[(0.0, 0.6), (0.8, 0.0), (0.0, 0.0)]);
    let p = projector(&tensor_state(&s, &m)).unwrap();
    let rho_s = partial_trace_meter(&p, layout).unwrap();
    let rho_m = partial_trace_system(&p, layout).unwrap();
    assert!(rho_s.max_abs_diff(&projector(&s).unwrap()) < 1e-12);
    assert!(rho_m.max_abs_diff(&projector(&m).unwrap()) < 1e-12);
}

#[test]
fn bell_state_reduces_to_maximally_mixed() {
    let layout = TensorLayout::new(2, 2).unwrap();
    let e = StateVector::from_real(&[1.0, 0.0, 0.0, 1.0]).unwrap();
    let p = projector(&e).unwrap();
    let half = DensityMatrix::maximally_mixed(2);
    assert!(partial_trace_meter(&p, layout).unwrap().max_abs_diff(half.op()) < 1e-15);
    assert!(partial_trace_system(&p, layout).unwrap().max_abs_diff(half.op()) < 1e-15);
}

/// Brute-force double sum `Σ_{α,β} ⟨f_β, f_α⟩ |s_α⟩⟨s_β| / |u|²` for
/// `u = Σ s_α ⊗ f_α` with standard meter basis vectors `f_α`.
fn brute_force_reduced(u: &StateVector, layout: TensorLayout) -> Operator {
    let (ds, dm) = (layout.dim_s(), layout.dim_m());
    let parts: Vec<StateVector> = (0..dm)
        .map(|a| StateVector::new((0..ds).map(|i| u.get(layout.index(i, a))).collect()).unwrap())
        .collect();
    let n2 = u.norm_sqr();
    let mut out = Operator::zeros(ds);
    for a in 0..dm {
        for b in 0..dm {
            let fb = StateVector::basis(dm, b);
            let fa = StateVector::basis(dm, a);
            let w = fb.inner(&fa) / n2;
            if w == ZERO {
                continue;
            }
            out = &out + &Operator::outer(&parts[a], &parts[b]).scale(w);
        }
    }
    out
}

#[test]
fn meter_trace_matches_double_sum() {
    let layout = TensorLayout::new(2, 3).unwrap();
    let u = state(&[(0.3, 0.1), (0.5, -0.2), (0.0, 0.7), (0.4, 0.4), (-0.1, 0.0), (0.2, 0.3)]);
    let direct = partial_trace_meter(&projector(&u).unwrap(), layout).unwrap();
    assert!(direct.max_abs_diff(&brute_force_reduced(&u, layout)) < 1e-12);
}

#[test]
fn system_trace_of_unnormalized_entangled_state() {
    let layout = TensorLayout::new(2, 2).unwrap();
    let u = StateVector::from_real(&[1.0, 0.0, 0.0, 1.0]).unwrap();
    // Gram-matrix evaluation: (tr_S P_u)_{kj} = ⟨s_j, s_k⟩ / |u|².
    let parts = [StateVector::basis(2, 0), StateVector::basis(2, 1)];
    let want = Operator::from_fn(2, |k, j| parts[j].inner(&parts[k]) / u.norm_sqr());
    let got = partial_trace_system(&projector(&u).unwrap(), layout).unwrap();
    assert!(got.max_abs_diff(&want) < 1e-15);
}

#[test]
fn partial_trace_rejects_bad_layout() {
    let layout = TensorLayout::new(2, 3).unwrap();
    assert!(matches!(
        partial_trace_meter(&Operator::identity(5), layout),
        Err(Error::Layout { found: 5, .. })
    ));
    assert!(matches!(
        partial_trace_system(&Operator::identity(4), layout),
        Err(Error::Layout { .. })
    ));
}

#[test]
fn trace_distance_examples() {
    let p0 = DensityMatrix::pure(&StateVector::basis(2, 0)).unwrap();
    let p1 = DensityMatrix::pure(&StateVector::basis(2, 1)).unwrap();
    let half = DensityMatrix::maximally_mixed(2);
    assert_eq!(trace_distance(&p0, &p0).unwrap(), 0.0);
    assert!((trace_distance(&p0, &p1).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    assert!((trace_distance(&p0, &half).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
    assert!(trace_distance(&p0, &DensityMatrix::maximally_mixed(3)).is_err());
}

#[test]
fn density_rejects_bad_input() {
    let neg = Operator::from_real_rows(&[&[1.5, 0.0], &[0.0, -0.5]]).unwrap();
    assert!(matches!(DensityMatrix::new(neg), Err(Error::InvalidDensity { .. })));
    let trace2 = Operator::identity(2);
    assert!(matches!(DensityMatrix::new(trace2), Err(Error::InvalidDensity { .. })));
}

#[test]
fn sigma_x_eigensystem() {
    let es = hermitian_eigensystem(&sigma_x()).unwrap();
    assert!((es.values()[0] + 1.0).abs() < 1e-14);
    assert!((es.values()[1] - 1.0).abs() < 1e-14);
    let r = 0.5f64.sqrt();
    let minus = StateVector::from_real(&[r, -r]).unwrap();
    let plus = StateVector::from_real(&[r, r]).unwrap();
    assert!((es.vectors()[0].inner(&minus).norm() - 1.0).abs() < 1e-12);
    assert!((es.vectors()[1].inner(&plus).norm() - 1.0).abs() < 1e-12);
}

#[test]
fn diagonal_eigensystem_is_standard_basis() {
    let d = Operator::diagonal(&[c(3.0, 0.0), c(-1.0, 0.0), c(2.0, 0.0)]);
    let es = hermitian_eigensystem(&d).unwrap();
    assert_eq!(es.values(), &[-1.0, 2.0, 3.0]);
    assert_eq!(es.vectors()[0], StateVector::basis(3, 1));
    assert_eq!(es.vectors()[1], StateVector::basis(3, 2));
    assert_eq!(es.vectors()[2], StateVector::basis(3, 0));
}

#[test]
fn degenerate_cluster_basis_is_deterministic() {
    // I + P_w has eigenvalue 1 twice; the cluster basis must be the same
    // for any input ordering of rows.
    let w = StateVector::from_real(&[1.0, 1.0, 1.0]).unwrap();
    let a = &Operator::identity(3) + &projector(&w).unwrap();
    let es = hermitian_eigensystem(&a.hermitian().unwrap()).unwrap();
    assert_eq!(es.clusters().len(), 2);
    let again = hermitian_eigensystem(&es.synthesize(|x| c(x, 0.0)).hermitian().unwrap()).unwrap();
    for (x, y) in es.vectors().iter().zip(again.vectors()) {
        assert!(x.distance(y) < 1e-10);
    }
    let projs = es.spectral_projectors();
    assert_eq!(projs.len(), 2);
    assert!((projs[0].1.trace().re - 2.0).abs() < 1e-12);
}

#[test]
fn eigensystem_rejects_non_hermitian() {
    let a = Operator::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
    assert!(matches!(hermitian_eigensystem(&a), Err(Error::Tag { .. })));
}

#[test]
fn tag_checks() {
    let a = Operator::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
    assert!(a.clone().hermitian().is_err());
    assert!(a.unitary().is_err());
    assert!(sigma_x().unitary().unwrap().is_unitary());
    let p = Operator::from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]).unwrap();
    assert!(p.with_tags(Tags::PROJECTOR).unwrap().is_hermitian());
}

fn arb_state(dim: usize) -> impl Strategy<Value = StateVector> {
    proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim)
        .prop_map(|v| StateVector::new(v.into_iter().map(|(a, b)| c(a, b)).collect()).unwrap())
        .prop_filter("nonzero", |v| v.norm() > 1e-3)
}

fn arb_composite() -> impl Strategy<Value = (TensorLayout, StateVector)> {
    (1usize..=4, 1usize..=5).prop_flat_map(|(ds, dm)| {
        arb_state(ds * dm).prop_map(move |u| (TensorLayout::new(ds, dm).unwrap(), u))
    })
}

fn arb_operator(dim: usize) -> impl Strategy<Value = Operator> {
    proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim * dim).prop_map(move |v| {
        Operator::new(dim, v.into_iter().map(|(a, b)| c(a, b)).collect()).unwrap()
    })
}

proptest! {
    #[test]
    fn partial_traces_preserve_trace(
        (ds, dm) in (1usize..=4, 1usize..=5),
        seed in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 400),
    ) {
        let layout = TensorLayout::new(ds, dm).unwrap();
        let n = layout.dim();
        let l = Operator::new(n, seed[..n * n].iter().map(|&(a, b)| c(a, b)).collect()).unwrap();
        let t = l.trace();
        prop_assert!((partial_trace_meter(&l, layout).unwrap().trace() - t).norm() < 1e-10);
        prop_assert!((partial_trace_system(&l, layout).unwrap().trace() - t).norm() < 1e-10);
    }

    #[test]
    fn meter_trace_matches_brute_force((layout, u) in arb_composite()) {
        let direct = partial_trace_meter(&projector(&u).unwrap(), layout).unwrap();
        prop_assert!(direct.max_abs_diff(&brute_force_reduced(&u, layout)) < 1e-12);
    }

    #[test]
    fn partial_trace_is_linear(
        l1 in arb_operator(6),
        l2 in arb_operator(6),
        a in (-2.0f64..2.0, -2.0f64..2.0),
        b in (-2.0f64..2.0, -2.0f64..2.0),
    ) {
        let layout = TensorLayout::new(2, 3).unwrap();
        let (a, b) = (c(a.0, a.1), c(b.0, b.1));
        let combo = &l1.scale(a) + &l2.scale(b);
        let lhs = partial_trace_meter(&combo, layout).unwrap();
        let rhs = &partial_trace_meter(&l1, layout).unwrap().scale(a)
            + &partial_trace_meter(&l2, layout).unwrap().scale(b);
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn product_round_trip(s in arb_state(3), m in arb_state(4)) {
        let layout = TensorLayout::new(3, 4).unwrap();
        let m = m.normalized().unwrap();
        let ps = projector(&s).unwrap();
        let pm = projector(&m).unwrap();
        let back = partial_trace_meter(&tensor_op(&ps, &pm), layout).unwrap();
        prop_assert!(back.max_abs_diff(&ps) < 1e-12);
    }

    #[test]
    fn purity_iff_product(
        s in arb_state(3),
        m in arb_state(2),
        t in arb_state(3),
        n in arb_state(2),
        mix in 0.0f64..1.0,
    ) {
        let layout = TensorLayout::new(3, 2).unwrap();
        let u = &tensor_state(&s, &m).normalized().unwrap()
            + &tensor_state(&t, &n).normalized().unwrap().scale(c(mix, 0.0));
        prop_assume!(u.norm() > 1e-3);
        let rho = DensityMatrix::new(partial_trace_meter(&projector(&u).unwrap(), layout).unwrap()).unwrap();
        let rank = schmidt_rank(&u, layout, 1e-9).unwrap();
        let pure = (rho.purity() - 1.0).abs() <= 1e-9;
        prop_assert_eq!(pure, rank == 1);
    }

    #[test]
    fn eigensystem_is_orthonormal_and_exact(
        dim in 1usize..=6,
        xs in proptest::collection::vec(-1.0f64..1.0, 36),
    ) {
        let a = hermitian_from(dim, &xs).hermitian().unwrap();
        let es = hermitian_eigensystem(&a).unwrap();
        for w in es.values().windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        for (i, (alpha, v)) in es.values().iter().zip(es.vectors()).enumerate() {
            let resid = &a.apply(v) - &v.scale(c(*alpha, 0.0));
            prop_assert!(resid.norm() <= 1e-10);
            for (j, w) in es.vectors().iter().enumerate() {
                let want = if i == j { ONE } else { ZERO };
                prop_assert!((v.inner(w) - want).norm() <= 1e-10);
            }
        }
        prop_assert!(es.synthesize(|x| c(x, 0.0)).max_abs_diff(&a) <= 1e-10);
    }

    #[test]
    fn degenerate_eigensystem(w in arb_state(4)) {
        // A = 2 P_w has eigenvalue 0 three times.
        let pw = projector(&w).unwrap();
        let q = &Operator::identity(4) - &pw;
        let a = pw.scale(c(2.0, 0.0)).hermitian().unwrap();
        let es = hermitian_eigensystem(&a).unwrap();
        let projs = es.spectral_projectors();
        prop_assert_eq!(projs.len(), 2);
        prop_assert!(projs[1].1.max_abs_diff(&pw) < 1e-10);
        prop_assert!(projs[0].1.max_abs_diff(&q) < 1e-10);
        for (i, v) in es.vectors().iter().enumerate() {
            for (j, u) in es.vectors().iter().enumerate() {
                let want = if i == j { ONE } else { ZERO };
                prop_assert!((v.inner(u) - want).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn trace_distance_is_symmetric(s in arb_state(3), t in arb_state(3)) {
        let a = DensityMatrix::pure(&s).unwrap();
        let b = DensityMatrix::pure(&t).unwrap();
        let d = trace_distance(&a, &b).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!((d - trace_distance(&b, &a).unwrap()).abs() < 1e-14);
    }
}
