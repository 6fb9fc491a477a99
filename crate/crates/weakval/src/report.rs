//! CSV tables and run manifests.
//!
//! Numbers are written with the shortest representation that parses back
//! to the same `f64`; missing values are empty cells.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::AppError;
use crate::literal::Cx;
use crate::pipeline::{CostRow, DeficitRow, McRow, Row};
use crate::scenario::{GridSpec, ScenarioFile, Slot};

pub const RESULTS_HEADER: [&str; 9] = [
    "scenario",
    "param",
    "value",
    "eps",
    "analytic",
    "finite",
    "mc_estimate",
    "mc_stderr",
    "deficit",
];

pub const DEFICIT_HEADER: [&str; 6] = ["scenario", "param", "value", "eps", "deficit", "active_bins"];

pub const MC_HEADER: [&str; 10] = [
    "scenario",
    "param",
    "value",
    "eps",
    "n_total",
    "n_postselected",
    "mean_meter",
    "stderr",
    "normalized_estimate",
    "seed",
];

pub const COST_HEADER: [&str; 5] = ["scenario", "param", "value", "eps", "trials_needed"];

/// Marker written in `trials_needed` when the cap was reached.
pub const CAP_EXCEEDED: &str = "cap-exceeded";

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn key(scenario: &str, param: Option<Slot>, value: Option<Cx>, eps: f64) -> [String; 4] {
    [scenario.to_string(), opt(param), opt(value), eps.to_string()]
}

fn write_table<const N: usize>(
    path: &Path,
    header: [&str; N],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<(), AppError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(|e| AppError::io(path, e))?;
    Ok(())
}

pub fn write_results(path: &Path, rows: &[Row]) -> Result<(), AppError> {
    write_table(
        path,
        RESULTS_HEADER,
        rows.iter().map(|r| {
            let mut v = key(&r.scenario, r.param, r.value, r.eps).to_vec();
            v.extend([
                r.analytic.to_string(),
                r.finite.to_string(),
                opt(r.mc_estimate),
                opt(r.mc_stderr),
                opt(r.deficit),
            ]);
            v
        }),
    )
}

pub fn write_deficits(path: &Path, rows: &[DeficitRow]) -> Result<(), AppError> {
    write_table(
        path,
        DEFICIT_HEADER,
        rows.iter().map(|r| {
            let mut v = key(&r.scenario, r.param, r.value, r.eps).to_vec();
            v.extend([r.deficit.to_string(), r.active_bins.to_string()]);
            v
        }),
    )
}

pub fn write_mc(path: &Path, rows: &[McRow]) -> Result<(), AppError> {
    write_table(
        path,
        MC_HEADER,
        rows.iter().map(|r| {
            let mut v = key(&r.scenario, r.param, r.value, r.eps).to_vec();
            let t = &r.report;
            v.extend([
                t.n_total.to_string(),
                t.n_postselected.to_string(),
                t.mean_meter.to_string(),
                t.stderr.to_string(),
                t.normalized_estimate.to_string(),
                t.seed.to_string(),
            ]);
            v
        }),
    )
}

pub fn write_costs(path: &Path, rows: &[CostRow]) -> Result<(), AppError> {
    write_table(
        path,
        COST_HEADER,
        rows.iter().map(|r| {
            let mut v = key(&r.scenario, r.param, r.value, r.eps).to_vec();
            v.push(r.trials_needed.map(|n| n.to_string()).unwrap_or_else(|| CAP_EXCEEDED.into()));
            v
        }),
    )
}

/// Everything needed to reproduce a run: the fully resolved scenario plus
/// provenance. A manifest is itself a valid scenario input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub provenance: Provenance,
    pub scenario: ScenarioFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub core_version: String,
    pub command: String,
    pub seed: u64,
    pub trials: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, scenario: &ScenarioFile, outputs: &[&str]) -> Self {
        Manifest {
            provenance: Provenance {
                tool: env!("CARGO_PKG_NAME").into(),
                version: env!("CARGO_PKG_VERSION").into(),
                core_version: weakval_core::VERSION.into(),
                command: command.into(),
                seed: scenario.run.seed,
                trials: scenario.run.trials,
                grid: scenario.grid_spec().cloned(),
                outputs: outputs.iter().map(|s| s.to_string()).collect(),
            },
            scenario: scenario.clone(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), AppError> {
        let text = toml::to_string(self).map_err(|e| AppError::parse(&path.display().to_string(), e.to_string()))?;
        fs::write(path, text).map_err(|e| AppError::io(path, e))
    }
}

/// A CSV file as header plus string cells.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table, AppError> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<Result<_, _>>()?;
        Ok(Table { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}
