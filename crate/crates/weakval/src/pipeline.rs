//! Analytic, finite-ε, Monte Carlo and deficit evaluation of scenarios.
//!
//! Rows are evaluated in parallel and returned in declared order: sweep
//! values outermost, then ε. Row `i` simulates with seed `seed + i`.

use rayon::prelude::*;
use weakval_core::meter_grid::{aav_conditional_expectation, aav_weak_value_analytic, AAVScenario};
use weakval_core::montecarlo::{
    chunk_plan, report_from_counts, sample_chunk, trials_needed, JointDistribution, OutcomeCounts,
    TrialBatchReport, DEFAULT_TRIAL_CAP,
};
use weakval_core::protocols::{
    general_meter_weak_value, normalized_conditional_expectation, weak_value_finite,
    GeneralMeterProtocol, QubitMeterProtocol,
};
use weakval_core::weakness::{active_bin_count, binned_position, weakness_deficit};

use crate::error::AppError;
use crate::literal::Cx;
use crate::scenario::{Binding, Built, ScenarioFile, Slot};

/// One line of the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub scenario: String,
    pub param: Option<Slot>,
    pub value: Option<Cx>,
    pub eps: f64,
    pub analytic: f64,
    pub finite: f64,
    pub mc_estimate: Option<f64>,
    pub mc_stderr: Option<f64>,
    pub deficit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeficitRow {
    pub scenario: String,
    pub param: Option<Slot>,
    pub value: Option<Cx>,
    pub eps: f64,
    pub deficit: f64,
    pub active_bins: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McRow {
    pub scenario: String,
    pub param: Option<Slot>,
    pub value: Option<Cx>,
    pub eps: f64,
    pub report: TrialBatchReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostRow {
    pub scenario: String,
    pub param: Option<Slot>,
    pub value: Option<Cx>,
    pub eps: f64,
    /// `None` when the trial cap was reached first.
    pub trials_needed: Option<u64>,
}

/// Runs trials in parallel chunks; bit-identical to the serial
/// [`weakval_core::montecarlo::simulate_weak_experiment`].
pub fn simulate_parallel(
    dist: &JointDistribution,
    n_trials: u64,
    seed: u64,
) -> Result<TrialBatchReport, weakval_core::Error> {
    if n_trials == 0 {
        return Err(weakval_core::Error::Domain {
            name: "n_trials",
            value: 0.0,
            domain: "[1, inf)",
        });
    }
    let chunks: Vec<(u64, u64)> = chunk_plan(n_trials).collect();
    let counts = chunks
        .par_iter()
        .map(|&(start, len)| sample_chunk(dist, seed, start, len))
        .reduce(
            || OutcomeCounts::zeros(dist),
            |mut a, b| {
                a.merge(&b);
                a
            },
        );
    report_from_counts(dist, &counts, seed)
}

struct Point {
    label: Option<Cx>,
    built: Built,
}

fn context(sc: &ScenarioFile, label: Option<Cx>, eps: Option<f64>) -> String {
    let mut s = sc.name.clone();
    if let (Some(sw), Some(v)) = (&sc.sweep, label) {
        s.push_str(&format!(" {}={}", sw.param, v));
    }
    if let Some(e) = eps {
        s.push_str(&format!(" eps={e}"));
    }
    s
}

fn points(sc: &ScenarioFile) -> Result<Vec<Point>, AppError> {
    sc.bindings()
        .into_iter()
        .map(|(label, b): (Option<Cx>, Binding)| {
            let built = sc.build(&b).map_err(|e| AppError::core(context(sc, label, None), e))?;
            Ok(Point { label, built })
        })
        .collect()
}

fn tasks(sc: &ScenarioFile, pts: &[Point]) -> Vec<(usize, f64)> {
    (0..pts.len())
        .flat_map(|p| sc.run.eps.iter().map(move |&e| (p, e)))
        .collect()
}

fn check_cap(trials: u64) -> Result<(), AppError> {
    if trials > DEFAULT_TRIAL_CAP {
        return Err(AppError::TrialCap {
            trials,
            cap: DEFAULT_TRIAL_CAP,
        });
    }
    Ok(())
}

/// Joint outcome distribution for Monte Carlo at one ε. Grid meters are
/// read out through the binned position operator.
pub fn distribution(built: &Built, eps: f64) -> Result<JointDistribution, weakval_core::Error> {
    match built {
        Built::Qubit { s, a, v, b, f } => {
            let p = QubitMeterProtocol::new(s.clone(), a.clone(), v.clone(), b.clone(), eps)?;
            JointDistribution::from_qubit(&p, f)
        }
        Built::Grid { .. } => {
            let (sc, lambda) = grid_scenario(built, eps)?;
            let bp = binned_position(lambda, sc.grid())?;
            JointDistribution::from_binned(&sc, &bp)
        }
        Built::General { s, a, f, m, b, g } => {
            let p = GeneralMeterProtocol::new(s.clone(), a.clone(), f.clone(), m.clone(), b.clone(), g.clone(), eps)?;
            JointDistribution::from_general(&p)
        }
    }
}

fn grid_scenario(built: &Built, eps: f64) -> Result<(AAVScenario, f64), weakval_core::Error> {
    let Built::Grid { s, a, v, f, meter, grid, lambda, .. } = built else {
        unreachable!("grid scenario requested for a finite meter")
    };
    let sc = AAVScenario::new(s.clone(), a.clone(), v.clone(), f.clone(), meter.clone(), *grid, eps)?;
    Ok((sc, *lambda))
}

/// `(analytic, finite)` at one ε.
pub fn weak_values(built: &Built, eps: f64) -> Result<(f64, f64), weakval_core::Error> {
    match built {
        Built::Qubit { s, a, v, b, f } => {
            let p = QubitMeterProtocol::new(s.clone(), a.clone(), v.clone(), b.clone(), eps)?;
            Ok((weak_value_finite(s, a, v, f)?, normalized_conditional_expectation(&p, f)?))
        }
        Built::Grid { s, a, v, f, delta, .. } => {
            let (sc, _) = grid_scenario(built, eps)?;
            Ok((aav_weak_value_analytic(s, a, v, f, *delta)?, aav_conditional_expectation(&sc)?))
        }
        Built::General { s, a, f, m, b, g } => {
            let p = GeneralMeterProtocol::new(s.clone(), a.clone(), f.clone(), m.clone(), b.clone(), g.clone(), eps)?;
            let w = general_meter_weak_value(&p)?;
            Ok((w.limit, w.finite))
        }
    }
}

fn deficit_at(built: &Built, eps: f64) -> Result<(f64, usize), AppError> {
    if !matches!(built, Built::Grid { .. }) {
        return Err(AppError::field("meter", "the deficit needs a grid meter".into()));
    }
    let inner = || -> Result<(f64, usize), weakval_core::Error> {
        let (sc, lambda) = grid_scenario(built, eps)?;
        let bp = binned_position(lambda, sc.grid())?;
        Ok((weakness_deficit(&sc, &bp)?, active_bin_count(&sc, &bp)?))
    };
    inner().map_err(|e| AppError::core(format!("eps={eps}"), e))
}

/// The results table for `run` and `sweep`.
pub fn run_rows(sc: &ScenarioFile) -> Result<Vec<Row>, AppError> {
    check_cap(sc.run.trials)?;
    let pts = points(sc)?;
    let param = sc.sweep.as_ref().map(|s| s.param);
    tasks(sc, &pts)
        .into_par_iter()
        .enumerate()
        .map(|(i, (p, eps))| {
            let pt = &pts[p];
            let ctx = || context(sc, pt.label, Some(eps));
            let (analytic, finite) = weak_values(&pt.built, eps).map_err(|e| AppError::core(ctx(), e))?;
            let (mc_estimate, mc_stderr) = if sc.run.trials > 0 {
                let dist = distribution(&pt.built, eps).map_err(|e| AppError::core(ctx(), e))?;
                let r = simulate_parallel(&dist, sc.run.trials, sc.run.seed.wrapping_add(i as u64))
                    .map_err(|e| AppError::core(ctx(), e))?;
                (Some(r.normalized_estimate), Some(r.stderr / eps))
            } else {
                (None, None)
            };
            let deficit = if sc.run.deficit {
                Some(deficit_at(&pt.built, eps)?.0)
            } else {
                None
            };
            Ok(Row {
                scenario: sc.name.clone(),
                param,
                value: pt.label,
                eps,
                analytic,
                finite,
                mc_estimate,
                mc_stderr,
                deficit,
            })
        })
        .collect()
}

pub fn deficit_rows(sc: &ScenarioFile) -> Result<Vec<DeficitRow>, AppError> {
    if !sc.is_grid() {
        return Err(AppError::field("meter", "the deficit needs a grid meter".into()));
    }
    let pts = points(sc)?;
    let param = sc.sweep.as_ref().map(|s| s.param);
    tasks(sc, &pts)
        .into_par_iter()
        .map(|(p, eps)| {
            let (deficit, active_bins) = deficit_at(&pts[p].built, eps)?;
            Ok(DeficitRow {
                scenario: sc.name.clone(),
                param,
                value: pts[p].label,
                eps,
                deficit,
                active_bins,
            })
        })
        .collect()
}

pub fn mc_rows(sc: &ScenarioFile) -> Result<Vec<McRow>, AppError> {
    check_cap(sc.run.trials)?;
    if sc.run.trials == 0 {
        return Err(AppError::field("run.trials", "must be positive for Monte Carlo".into()));
    }
    let pts = points(sc)?;
    let param = sc.sweep.as_ref().map(|s| s.param);
    // Rows run one after another; each simulation is parallel inside.
    tasks(sc, &pts)
        .into_iter()
        .enumerate()
        .map(|(i, (p, eps))| {
            let pt = &pts[p];
            let ctx = || context(sc, pt.label, Some(eps));
            let dist = distribution(&pt.built, eps).map_err(|e| AppError::core(ctx(), e))?;
            let report = simulate_parallel(&dist, sc.run.trials, sc.run.seed.wrapping_add(i as u64))
                .map_err(|e| AppError::core(ctx(), e))?;
            Ok(McRow {
                scenario: sc.name.clone(),
                param,
                value: pt.label,
                eps,
                report,
            })
        })
        .collect()
}

/// Trials needed for `stderr/ε ≤ precision` at each ε.
pub fn cost_rows(sc: &ScenarioFile, precision: f64, cap: u64) -> Result<Vec<CostRow>, AppError> {
    let pts = points(sc)?;
    let param = sc.sweep.as_ref().map(|s| s.param);
    tasks(sc, &pts)
        .into_par_iter()
        .map(|(p, eps)| {
            let pt = &pts[p];
            let ctx = || context(sc, pt.label, Some(eps));
            let dist = distribution(&pt.built, eps).map_err(|e| AppError::core(ctx(), e))?;
            let n = trials_needed(&dist, precision, sc.run.seed, cap).map_err(|e| AppError::core(ctx(), e))?;
            Ok(CostRow {
                scenario: sc.name.clone(),
                param,
                value: pt.label,
                eps,
                trials_needed: n,
            })
        })
        .collect()
}
