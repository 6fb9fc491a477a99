//! Trial-by-trial simulation of postselected weak measurements.
//!
//! `P_f ⊗ I` and `I ⊗ B` commute, so each trial draws the pair
//! (meter eigenvalue, postselection outcome) in one step from the exact
//! joint Born distribution. Trial `t` consumes the single uniform at word
//! position `2t` of a ChaCha8 stream keyed by the seed, so any partition
//! of the trial range into chunks yields identical counts.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::math::sqrt;
use crate::meter_grid::AAVScenario;
use crate::protocols::{coupled_state, general_coupled_state, GeneralMeterProtocol, QubitMeterProtocol};
use crate::qlin::{hermitian_eigensystem, tensor_op, Operator, StateVector, TensorLayout};
use crate::states::projector;
use crate::weakness::{binned_joint_distribution, BinnedPosition};

/// Joint probabilities must sum to one within this tolerance.
pub const DISTRIBUTION_TOL: f64 = 1e-9;
/// Default per-ε trial cap for [`sample_cost_curve`].
pub const DEFAULT_TRIAL_CAP: u64 = 100_000_000;
/// Trials per chunk; chunk boundaries never affect results.
pub const CHUNK_TRIALS: u64 = 1 << 16;
/// Stopping rule of [`sample_cost_curve`]: inspect every this many trials.
pub const COST_CHECK_STRIDE: u64 = 64;
/// Stopping rule of [`sample_cost_curve`]: minimum postselected trials.
pub const COST_MIN_POSTSELECTED: u64 = 30;

/// Exact distribution of (meter eigenvalue, postselection) for one ε.
///
/// Cell `2k` is (value `k`, postselected), cell `2k+1` is (value `k`,
/// rejected).
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    values: Vec<f64>,
    cumulative: Vec<f64>,
    probabilities: Vec<f64>,
    epsilon: f64,
}

impl JointDistribution {
    /// From per-value probabilities of the two postselection outcomes.
    pub fn new(values: Vec<f64>, p_yes: Vec<f64>, p_no: Vec<f64>, epsilon: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyDimension);
        }
        if p_yes.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: values.len(),
                found: p_yes.len(),
            });
        }
        if p_no.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: values.len(),
                found: p_no.len(),
            });
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Domain {
                name: "epsilon",
                value: epsilon,
                domain: "(0, inf)",
            });
        }
        let mut probabilities = Vec::with_capacity(2 * values.len());
        for (y, n) in p_yes.iter().zip(&p_no) {
            probabilities.push(*y);
            probabilities.push(*n);
        }
        let total: f64 = probabilities.iter().sum();
        if probabilities.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > DISTRIBUTION_TOL {
            return Err(Error::InvalidDistribution { total });
        }
        for p in &mut probabilities {
            *p /= total;
        }
        let mut acc = 0.0;
        let cumulative = probabilities
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(JointDistribution {
            values,
            cumulative,
            probabilities,
            epsilon,
        })
    }

    /// Born probabilities of `u` for `P_f ⊗ Q_λ`, where `Q_λ` are the
    /// spectral projectors of the meter observable `b`.
    pub fn from_state(
        u: &StateVector,
        layout: TensorLayout,
        f: &StateVector,
        b: &Operator,
        epsilon: f64,
    ) -> Result<Self> {
        f.check_dim(layout.dim_s())?;
        b.check_dim(layout.dim_m())?;
        let pf = projector(f)?;
        let id_s = Operator::identity(layout.dim_s());
        let norm = u.norm_sqr();
        let mut values = Vec::new();
        let mut p_yes = Vec::new();
        let mut p_no = Vec::new();
        for (lambda, q) in hermitian_eigensystem(b)?.spectral_projectors() {
            let all = tensor_op(&id_s, &q).expectation(u).re / norm;
            let yes = tensor_op(&pf, &q).expectation(u).re / norm;
            values.push(lambda);
            p_yes.push(yes.max(0.0));
            p_no.push((all - yes).max(0.0));
        }
        Self::new(values, p_yes, p_no, epsilon)
    }

    pub fn from_qubit(p: &QubitMeterProtocol, f: &StateVector) -> Result<Self> {
        Self::from_state(&coupled_state(p)?, p.layout(), f, p.b(), p.epsilon())
    }

    pub fn from_general(p: &GeneralMeterProtocol) -> Result<Self> {
        Self::from_state(&general_coupled_state(p)?, p.layout(), p.f(), p.b(), p.epsilon())
    }

    /// Grid meter read out through `B_λ`.
    pub fn from_binned(sc: &AAVScenario, bp: &BinnedPosition) -> Result<Self> {
        let j = binned_joint_distribution(sc, bp)?;
        Self::new(j.values, j.p_yes, j.p_no, sc.epsilon())
    }

    /// Meter eigenvalues, one per outcome.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Exact postselection probability.
    pub fn postselection_probability(&self) -> f64 {
        self.probabilities.iter().step_by(2).sum()
    }

    /// Exact conditional mean of the meter value given postselection.
    pub fn conditional_mean(&self) -> Result<f64> {
        let p = self.postselection_probability();
        if p == 0.0 {
            return Err(Error::EmptyConditional);
        }
        let num: f64 = self
            .values
            .iter()
            .zip(self.probabilities.iter().step_by(2))
            .map(|(v, q)| v * q)
            .sum();
        Ok(num / p)
    }

    fn cell(&self, u: f64) -> usize {
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.cumulative.len() - 1)
    }
}

/// Outcome tallies: `counts[2k]` postselected, `counts[2k+1]` rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeCounts {
    pub counts: Vec<u64>,
}

impl OutcomeCounts {
    pub fn zeros(dist: &JointDistribution) -> Self {
        OutcomeCounts {
            counts: alloc::vec![0; dist.cumulative.len()],
        }
    }

    pub fn merge(&mut self, other: &OutcomeCounts) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn postselected(&self) -> u64 {
        self.counts.iter().step_by(2).sum()
    }

    /// Postselected count for each meter value.
    pub fn postselected_by_value(&self) -> impl Iterator<Item = u64> + '_ {
        self.counts.iter().step_by(2).copied()
    }
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Tallies trials `start .. start + len`.
pub fn sample_chunk(dist: &JointDistribution, seed: u64, start: u64, len: u64) -> OutcomeCounts {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(2 * start as u128);
    let mut out = OutcomeCounts::zeros(dist);
    for _ in 0..len {
        out.counts[dist.cell(uniform(&mut rng))] += 1;
    }
    out
}

/// Chunks `(start, len)` covering `0 .. n_trials` in order.
pub fn chunk_plan(n_trials: u64) -> impl Iterator<Item = (u64, u64)> {
    (0..n_trials.div_ceil(CHUNK_TRIALS)).map(move |c| {
        let start = c * CHUNK_TRIALS;
        (start, CHUNK_TRIALS.min(n_trials - start))
    })
}

/// Summary of a batch of simulated trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialBatchReport {
    pub n_total: u64,
    pub n_postselected: u64,
    pub mean_meter: f64,
    /// Sample standard deviation over `√n_postselected`; infinite when only
    /// one trial was postselected.
    pub stderr: f64,
    pub normalized_estimate: f64,
    pub seed: u64,
}

/// Conditional mean and standard error from tallies.
pub fn report_from_counts(
    dist: &JointDistribution,
    counts: &OutcomeCounts,
    seed: u64,
) -> Result<TrialBatchReport> {
    let n_post = counts.postselected();
    if n_post == 0 {
        return Err(Error::EmptyConditional);
    }
    let n = n_post as f64;
    let mean = dist
        .values
        .iter()
        .zip(counts.postselected_by_value())
        .map(|(v, c)| v * c as f64)
        .sum::<f64>()
        / n;
    let stderr = if n_post > 1 {
        let ss: f64 = dist
            .values
            .iter()
            .zip(counts.postselected_by_value())
            .map(|(v, c)| c as f64 * (v - mean) * (v - mean))
            .sum();
        sqrt(ss / (n - 1.0)) / sqrt(n)
    } else {
        f64::INFINITY
    };
    Ok(TrialBatchReport {
        n_total: counts.total(),
        n_postselected: n_post,
        mean_meter: mean,
        stderr,
        normalized_estimate: mean / dist.epsilon,
        seed,
    })
}

/// Runs `n_trials` trials serially. Parallel drivers can instead combine
/// [`sample_chunk`] over [`chunk_plan`] and call [`report_from_counts`];
/// the result is bit-identical.
pub fn simulate_weak_experiment(
    dist: &JointDistribution,
    n_trials: u64,
    seed: u64,
) -> Result<TrialBatchReport> {
    let counts = simulate_counts(dist, n_trials, seed)?;
    report_from_counts(dist, &counts, seed)
}

/// Tallies of [`simulate_weak_experiment`].
pub fn simulate_counts(dist: &JointDistribution, n_trials: u64, seed: u64) -> Result<OutcomeCounts> {
    if n_trials == 0 {
        return Err(Error::Domain {
            name: "n_trials",
            value: 0.0,
            domain: "[1, inf)",
        });
    }
    let mut counts = OutcomeCounts::zeros(dist);
    for (start, len) in chunk_plan(n_trials) {
        counts.merge(&sample_chunk(dist, seed, start, len));
    }
    Ok(counts)
}

/// Trials needed at one ε; `None` when the cap was reached first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleCost {
    pub epsilon: f64,
    pub trials: Option<u64>,
}

/// First trial count (a multiple of 64, with at least 30 postselected
/// trials) at which `stderr / ε ≤ target_precision`.
pub fn trials_needed(
    dist: &JointDistribution,
    target_precision: f64,
    seed: u64,
    cap: u64,
) -> Result<Option<u64>> {
    if !(target_precision > 0.0) {
        return Err(Error::Domain {
            name: "target_precision",
            value: target_precision,
            domain: "(0, inf)",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = OutcomeCounts::zeros(dist);
    let mut n: u64 = 0;
    while n < cap {
        let len = COST_CHECK_STRIDE.min(cap - n);
        for _ in 0..len {
            counts.counts[dist.cell(uniform(&mut rng))] += 1;
        }
        n += len;
        if counts.postselected() >= COST_MIN_POSTSELECTED {
            let r = report_from_counts(dist, &counts, seed)?;
            if r.stderr / dist.epsilon <= target_precision {
                return Ok(Some(n));
            }
        }
    }
    Ok(None)
}

/// [`trials_needed`] for each ε, with distributions built by `build`.
pub fn sample_cost_curve(
    mut build: impl FnMut(f64) -> Result<JointDistribution>,
    target_precision: f64,
    eps_list: &[f64],
    seed: u64,
    cap: u64,
) -> Result<Vec<SampleCost>> {
    eps_list
        .iter()
        .map(|&epsilon| {
            let dist = build(epsilon)?;
            Ok(SampleCost {
                epsilon,
                trials: trials_needed(&dist, target_precision, seed, cap)?,
            })
        })
        .collect()
}

/// Log-log slope of trials against ε over the points that met the target.
pub fn sample_cost_slope(curve: &[SampleCost]) -> Result<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = curve
        .iter()
        .filter_map(|c| c.trials.map(|t| (c.epsilon, t as f64)))
        .unzip();
    crate::convergence::loglog_slope(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::{
        default_meter_observable, eta_phase_unitary, normalized_conditional_expectation,
        postselection_probability,
    };
    use crate::qlin::C64;
    use proptest::prelude::*;
    use std::vec;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sigma_x() -> Operator {
        Operator::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
    }

    fn eta_protocol(eta: C64, eps: f64) -> (QubitMeterProtocol, StateVector) {
        let s = StateVector::basis(2, 0);
        let f = StateVector::from_real(&[1.0, 1.0]).unwrap();
        let v = eta_phase_unitary(&s, eta).unwrap();
        let p = QubitMeterProtocol::new(s, sigma_x(), v, default_meter_observable(), eps).unwrap();
        (p, f)
    }

    /// Eigenstate with certain postselection and a meter whose state is an
    /// eigenvector of `B`.
    fn zero_variance(eps: f64) -> JointDistribution {
        let s = StateVector::basis(2, 0);
        let a = Operator::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]).unwrap();
        let u = StateVector::from_real(&[(1.0 - eps * eps).sqrt(), eps]).unwrap();
        let b = projector(&u).unwrap().scale(c(0.7, 0.0));
        let p = QubitMeterProtocol::new(s.clone(), a, Operator::identity(2), b, eps).unwrap();
        JointDistribution::from_qubit(&p, &s).unwrap()
    }

    #[test]
    fn joint_distribution_matches_protocol() {
        let (p, f) = eta_protocol(c(0.0, 1.0), 0.2);
        let d = JointDistribution::from_qubit(&p, &f).unwrap();
        let direct = postselection_probability(&p, &f).unwrap();
        assert!((d.postselection_probability() - direct).abs() < 1e-14);
        let e = normalized_conditional_expectation(&p, &f).unwrap();
        assert!((d.conditional_mean().unwrap() / 0.2 - e).abs() < 1e-12);
        for v in d.values() {
            assert!((v.abs() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_distribution() {
        let r = JointDistribution::new(vec![0.0], vec![0.5], vec![0.4], 0.1);
        assert!(matches!(r, Err(Error::InvalidDistribution { .. })));
        let r = JointDistribution::new(vec![0.0], vec![0.5], vec![0.5], 0.0);
        assert!(matches!(r, Err(Error::Domain { .. })));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let (p, f) = eta_protocol(c(-1.0, 0.0), 0.1);
        let d = JointDistribution::from_qubit(&p, &f).unwrap();
        let a = simulate_weak_experiment(&d, 200_000, 7).unwrap();
        let b = simulate_weak_experiment(&d, 200_000, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.normalized_estimate.to_bits(), b.normalized_estimate.to_bits());
        let other = simulate_weak_experiment(&d, 200_000, 8).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn chunking_does_not_change_counts() {
        let (p, f) = eta_protocol(c(0.5, 0.75f64.sqrt()), 0.1);
        let d = JointDistribution::from_qubit(&p, &f).unwrap();
        let whole = sample_chunk(&d, 11, 0, 5000);
        let mut parts = sample_chunk(&d, 11, 3000, 2000);
        parts.merge(&sample_chunk(&d, 11, 0, 1234));
        parts.merge(&sample_chunk(&d, 11, 1234, 1766));
        assert_eq!(whole, parts);
    }

    #[test]
    fn negative_eta_run() {
        let (p, f) = eta_protocol(c(-1.0, 0.0), 0.05);
        let d = JointDistribution::from_qubit(&p, &f).unwrap();
        let r = simulate_weak_experiment(&d, 1_000_000, 2024).unwrap();
        let se = r.stderr / 0.05;
        assert!((r.normalized_estimate + 1.0).abs() <= 3.0 * se, "{r:?}");
    }

    #[test]
    fn trivial_postselection() {
        let s = StateVector::basis(2, 0);
        let a = Operator::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]).unwrap();
        for eps in [0.3, 0.05] {
            let p = QubitMeterProtocol::usual(s.clone(), a.clone(), eps).unwrap();
            let d = JointDistribution::from_qubit(&p, &s).unwrap();
            assert!((d.postselection_probability() - 1.0).abs() < 1e-12);
            let r = simulate_weak_experiment(&d, 400_000, 3).unwrap();
            assert_eq!(r.n_postselected, r.n_total);
            // The exact finite value is √(1−ε²).
            let exact = (1.0 - eps * eps).sqrt();
            assert!((r.normalized_estimate - exact).abs() <= 3.0 * r.stderr / eps, "{r:?}");
            if eps < 0.1 {
                assert!((r.normalized_estimate - 1.0).abs() <= 3.0 * r.stderr / eps, "{r:?}");
            }
        }
    }

    #[test]
    fn postselection_rate_matches_born() {
        let (p, f) = eta_protocol(c(0.0, 1.0), 0.3);
        let d = JointDistribution::from_qubit(&p, &f).unwrap();
        let n = 500_000u64;
        let r = simulate_weak_experiment(&d, n, 99).unwrap();
        let q = d.postselection_probability();
        let sd = (n as f64 * q * (1.0 - q)).sqrt();
        assert!((r.n_postselected as f64 - n as f64 * q).abs() <= 4.0 * sd);
    }

    #[test]
    fn empty_conditional_is_reported() {
        let d = JointDistribution::new(vec![1.0], vec![0.0], vec![1.0], 0.1).unwrap();
        assert_eq!(simulate_weak_experiment(&d, 100, 1), Err(Error::EmptyConditional));
    }

    #[test]
    fn sample_cost_is_inverse_square() {
        let curve = sample_cost_curve(
            |e| {
                let (p, f) = eta_protocol(c(1.0, 0.0), e);
                JointDistribution::from_qubit(&p, &f)
            },
            0.05,
            &[0.2, 0.1, 0.05],
            5,
            DEFAULT_TRIAL_CAP,
        )
        .unwrap();
        let slope = sample_cost_slope(&curve).unwrap();
        assert!((-2.4..=-1.6).contains(&slope), "{curve:?} {slope}");
        // Postselection rate ½ and sd ½ give roughly 200/ε² trials.
        for pt in &curve {
            let t = pt.trials.unwrap() as f64;
            let expect = 200.0 / (pt.epsilon * pt.epsilon);
            assert!(t > expect / 2.0 && t < expect * 2.0, "{pt:?}");
        }
    }

    #[test]
    fn zero_variance_cost_is_constant() {
        let curve =
            sample_cost_curve(|e| Ok(zero_variance(e)), 0.05, &[0.2, 0.1, 0.05], 5, 1 << 20).unwrap();
        for pt in &curve {
            assert_eq!(pt.trials, Some(COST_CHECK_STRIDE));
        }
    }

    #[test]
    fn cap_exceeded_is_not_an_error() {
        let (p, f) = eta_protocol(c(1.0, 0.0), 0.01);
        let d = JointDistribution::from_qubit(&p, &f).unwrap();
        assert_eq!(trials_needed(&d, 1e-3, 1, 10_000).unwrap(), None);
    }

    #[test]
    fn estimator_is_consistent_across_seeds() {
        let eps = 0.1;
        let (p, f) = eta_protocol(c(0.5, 0.75f64.sqrt()), eps);
        let d = JointDistribution::from_qubit(&p, &f).unwrap();
        let exact = normalized_conditional_expectation(&p, &f).unwrap();
        let reports: Vec<_> = (0..32)
            .map(|seed| simulate_weak_experiment(&d, 20_000, seed).unwrap())
            .collect();
        let mean = reports.iter().map(|r| r.normalized_estimate).sum::<f64>() / 32.0;
        let pooled = (reports.iter().map(|r| (r.stderr / eps).powi(2)).sum::<f64>()).sqrt() / 32.0;
        assert!((mean - exact).abs() <= 4.0 * pooled, "{mean} {exact} {pooled}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn report_invariants(seed in any::<u64>(), n in 1u64..5000, theta in 0.0f64..6.28) {
            let (p, f) = eta_protocol(c(theta.cos(), theta.sin()), 0.3);
            let d = JointDistribution::from_qubit(&p, &f).unwrap();
            if let Ok(r) = simulate_weak_experiment(&d, n, seed) {
                prop_assert_eq!(r.n_total, n);
                prop_assert!(r.n_postselected <= r.n_total);
                prop_assert!(r.mean_meter.abs() <= 0.5 + 1e-12);
                prop_assert_eq!(r.seed, seed);
            }
        }
    }
}
