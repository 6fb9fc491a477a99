//! Scenario files.
//!
//! A scenario is a TOML document describing the system state `s`, the
//! observable `A`, the postselected state `f`, the unitary `V`, a meter and
//! the run settings. The meter kind selects the protocol: `qubit` for the
//! two-level meter, `gaussian` or `compact` for the grid meter, and
//! `general` for a finite meter with explicit `B` and `G`.
//!
//! ```toml
//! name = "example"
//! dim = 2
//! s = ["1", "0"]
//! f = ["1", "1"]
//! A = [["0", "1"], ["1", "0"]]
//!
//! [V]
//! kind = "eta_phase"
//!
//! [params]
//! eta = "0.5+0.8660254037844386i"
//!
//! [meter]
//! kind = "qubit"
//!
//! [run]
//! eps = [0.1, 0.01, 0.001]
//! trials = 100000
//! seed = 7
//! ```

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use weakval_core::meter_grid::{compact_bump, gaussian_meter, phase_twist, Grid, MeterFunction};
use weakval_core::protocols::{default_meter_observable, eta_phase_unitary, two_level_meter, DEFAULT_EPSILONS};
use weakval_core::{Operator, StateVector, C64};

use crate::error::AppError;
use crate::literal::Cx;

pub type CMatrix = Vec<Vec<Cx>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub dim: usize,
    pub s: Vec<Cx>,
    pub f: Vec<Cx>,
    #[serde(rename = "A")]
    pub a: CMatrix,
    #[serde(rename = "V", default)]
    pub v: UnitarySpec,
    #[serde(default)]
    pub params: Params,
    pub meter: MeterSpec,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UnitarySpec {
    #[default]
    Identity,
    /// `P_s + η(I − P_s)`.
    EtaPhase,
    Matrix { matrix: CMatrix },
}

/// Parameter slots.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Cx>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub q_min: f64,
    pub q_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeterSpec {
    /// Two-level meter; `B` defaults to `[[0, ½], [½, 0]]`.
    Qubit {
        #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
        b: Option<CMatrix>,
    },
    Gaussian {
        sigma: f64,
        /// Multiply by `e^{−iq²δ/2}` using the `delta` slot.
        #[serde(default)]
        twist: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid: Option<GridSpec>,
        /// Bin width of the binned position readout.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<f64>,
    },
    Compact {
        width: f64,
        #[serde(default)]
        center: f64,
        #[serde(default)]
        twist: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid: Option<GridSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<f64>,
    },
    /// Finite meter; without explicit `m`, `B`, `G` the two-level meter
    /// built from the `rho` slot is used.
    General {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m: Option<Vec<Cx>>,
        #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
        b: Option<CMatrix>,
        #[serde(rename = "G", default, skip_serializing_if = "Option::is_none")]
        g: Option<CMatrix>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    /// Monte Carlo trials per row; 0 disables simulation.
    #[serde(default)]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    /// Fill the deficit column (grid meters only).
    #[serde(default)]
    pub deficit: bool,
}

fn default_eps() -> Vec<f64> {
    DEFAULT_EPSILONS.to_vec()
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            eps: default_eps(),
            trials: 0,
            seed: 0,
            deficit: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Eta,
    Delta,
    Rho,
}

impl Slot {
    pub fn name(self) -> &'static str {
        match self {
            Slot::Eta => "eta",
            Slot::Delta => "delta",
            Slot::Rho => "rho",
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Slot {
    type Err = AppError;
    fn from_str(s: &str) -> Result<Self, AppError> {
        match s {
            "eta" => Ok(Slot::Eta),
            "delta" => Ok(Slot::Delta),
            "rho" => Ok(Slot::Rho),
            _ => Err(AppError::field("sweep.param", format!("unknown parameter slot `{s}` (expected eta, delta or rho)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: Slot,
    pub values: Vec<Cx>,
}

/// Bound values of the parameter slots for one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Binding {
    pub eta: Option<C64>,
    pub delta: Option<f64>,
    pub rho: Option<f64>,
}

/// Core objects for one sweep point; ε is supplied per row.
#[derive(Debug, Clone)]
pub enum Built {
    Qubit {
        s: StateVector,
        a: Operator,
        v: Operator,
        b: Operator,
        f: StateVector,
    },
    Grid {
        s: StateVector,
        a: Operator,
        v: Operator,
        f: StateVector,
        meter: MeterFunction,
        grid: Grid,
        lambda: f64,
        delta: f64,
    },
    General {
        s: StateVector,
        a: Operator,
        f: StateVector,
        m: StateVector,
        b: Operator,
        g: Operator,
    },
}

/// Default bin width of the binned readout.
pub const DEFAULT_LAMBDA: f64 = 1.0;

/// Reads a scenario file, or the scenario embedded in a run manifest.
pub fn load(path: &Path) -> Result<ScenarioFile, AppError> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    parse(&text).map_err(|e| match e {
        AppError::Parse { message, .. } => AppError::Parse {
            path: path.display().to_string(),
            message,
        },
        other => other,
    })
}

/// Parses and validates scenario text.
pub fn parse(text: &str) -> Result<ScenarioFile, AppError> {
    let is_manifest = text
        .parse::<toml::Table>()
        .map(|t| t.contains_key("provenance") && t.contains_key("scenario"))
        .unwrap_or(false);
    let sc: ScenarioFile = if is_manifest {
        toml::from_str::<crate::report::Manifest>(text)
            .map_err(|e| AppError::parse("<input>", e.to_string()))?
            .scenario
    } else {
        toml::from_str(text).map_err(|e| AppError::parse("<input>", e.to_string()))?
    };
    sc.validate()?;
    Ok(sc)
}

fn check_vector(field: &str, v: &[Cx], dim: usize) -> Result<(), AppError> {
    if v.len() != dim {
        return Err(AppError::field(
            field,
            format!("expected {dim} entries, found {}", v.len()),
        ));
    }
    Ok(())
}

fn check_matrix(field: &str, m: &CMatrix, dim: usize) -> Result<(), AppError> {
    if m.len() != dim {
        return Err(AppError::field(
            field,
            format!("expected {dim} rows, found {}", m.len()),
        ));
    }
    for (i, row) in m.iter().enumerate() {
        if row.len() != dim {
            return Err(AppError::field(
                &format!("{field}[{i}]"),
                format!("expected {dim} entries, found {}", row.len()),
            ));
        }
    }
    Ok(())
}

fn vector(v: &[Cx]) -> Result<StateVector, weakval_core::Error> {
    StateVector::new(v.iter().map(|z| z.0).collect())
}

fn matrix(m: &CMatrix) -> Result<Operator, weakval_core::Error> {
    let dim = m.len();
    Operator::new(dim, m.iter().flatten().map(|z| z.0).collect())
}

impl ScenarioFile {
    /// Structural checks: dimensions, slots, sweep and run settings.
    pub fn validate(&self) -> Result<(), AppError> {
        if self.dim == 0 {
            return Err(AppError::field("dim", "must be positive".into()));
        }
        check_vector("s", &self.s, self.dim)?;
        check_vector("f", &self.f, self.dim)?;
        check_matrix("A", &self.a, self.dim)?;
        if let UnitarySpec::Matrix { matrix } = &self.v {
            check_matrix("V.matrix", matrix, self.dim)?;
        }
        match &self.meter {
            MeterSpec::Qubit { b: Some(b) } => check_matrix("meter.B", b, 2)?,
            MeterSpec::Qubit { b: None } => {}
            MeterSpec::Gaussian { grid, lambda, .. } | MeterSpec::Compact { grid, lambda, .. } => {
                if let Some(g) = grid {
                    if g.points < 2 {
                        return Err(AppError::field("meter.grid.points", "must be at least 2".into()));
                    }
                }
                if let Some(l) = lambda {
                    if !(*l > 0.0) {
                        return Err(AppError::field("meter.lambda", "must be positive".into()));
                    }
                }
            }
            MeterSpec::General { m, b, g } => match (m, b, g) {
                (None, None, None) => {}
                (Some(m), Some(b), Some(g)) => {
                    check_matrix("meter.B", b, m.len())?;
                    check_matrix("meter.G", g, m.len())?;
                }
                _ => {
                    return Err(AppError::field(
                        "meter",
                        "general meter needs all of m, B, G or none of them".into(),
                    ))
                }
            },
        }
        if self.run.eps.is_empty() {
            return Err(AppError::field("run.eps", "must not be empty".into()));
        }
        if let Some(e) = self.run.eps.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(AppError::field("run.eps", format!("{e} is not a positive number")));
        }
        let used = self.used_slots();
        if let Some(sw) = &self.sweep {
            if !used.contains(&sw.param) {
                return Err(AppError::field(
                    "sweep.param",
                    format!("slot `{}` is not used by this scenario", sw.param),
                ));
            }
            if sw.values.is_empty() {
                return Err(AppError::field("sweep.values", "must not be empty".into()));
            }
            if sw.param != Slot::Eta {
                if let Some((i, _)) = sw.values.iter().enumerate().find(|(_, z)| z.0.im != 0.0) {
                    return Err(AppError::field(
                        &format!("sweep.values[{i}]"),
                        format!("{} must be real", sw.param),
                    ));
                }
            }
        }
        for slot in used {
            let swept = self.sweep.as_ref().is_some_and(|s| s.param == slot);
            let bound = match slot {
                Slot::Eta => self.params.eta.is_some(),
                Slot::Delta => self.params.delta.is_some(),
                Slot::Rho => self.params.rho.is_some(),
            };
            if !bound && !swept {
                return Err(AppError::field(
                    &format!("params.{slot}"),
                    "slot is used but has no value".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn used_slots(&self) -> Vec<Slot> {
        let mut out = Vec::new();
        if self.v == UnitarySpec::EtaPhase {
            out.push(Slot::Eta);
        }
        match &self.meter {
            MeterSpec::Gaussian { twist: true, .. } | MeterSpec::Compact { twist: true, .. } => {
                out.push(Slot::Delta)
            }
            MeterSpec::General { b: None, .. } => out.push(Slot::Rho),
            _ => {}
        }
        out
    }

    pub fn is_grid(&self) -> bool {
        matches!(self.meter, MeterSpec::Gaussian { .. } | MeterSpec::Compact { .. })
    }

    /// Replaces defaults with explicit values (grid, bin width) so that the
    /// file fully determines a run.
    pub fn resolve_defaults(&mut self) -> Result<(), AppError> {
        let meter = self.base_meter().map_err(|e| AppError::core("meter", e))?;
        if let MeterSpec::Gaussian { grid, lambda, .. } | MeterSpec::Compact { grid, lambda, .. } =
            &mut self.meter
        {
            if grid.is_none() {
                let g = Grid::default_for_width(meter.map(|m| m.scale()).unwrap_or(1.0))
                    .map_err(|e| AppError::core("meter.grid", e))?;
                *grid = Some(GridSpec {
                    q_min: g.q_min(),
                    q_max: g.q_max(),
                    points: g.n_points(),
                });
            }
            lambda.get_or_insert(DEFAULT_LAMBDA);
        }
        Ok(())
    }

    /// Sets the number of grid points (after resolving the default grid).
    pub fn set_grid_points(&mut self, points: usize) -> Result<(), AppError> {
        self.resolve_defaults()?;
        match &mut self.meter {
            MeterSpec::Gaussian { grid: Some(g), .. } | MeterSpec::Compact { grid: Some(g), .. } => {
                g.points = points;
                Ok(())
            }
            _ => Err(AppError::field("--grid-points", "scenario has no grid meter".into())),
        }
    }

    pub fn grid_spec(&self) -> Option<&GridSpec> {
        match &self.meter {
            MeterSpec::Gaussian { grid, .. } | MeterSpec::Compact { grid, .. } => grid.as_ref(),
            _ => None,
        }
    }

    fn base_meter(&self) -> Result<Option<MeterFunction>, weakval_core::Error> {
        Ok(match &self.meter {
            MeterSpec::Gaussian { sigma, .. } => Some(gaussian_meter(*sigma)?),
            MeterSpec::Compact { width, center, .. } => Some(compact_bump(*center, *width)?),
            _ => None,
        })
    }

    /// Sweep points as (label, binding); a single unlabelled point without
    /// a sweep.
    pub fn bindings(&self) -> Vec<(Option<Cx>, Binding)> {
        let base = Binding {
            eta: self.params.eta.map(|z| z.0),
            delta: self.params.delta,
            rho: self.params.rho,
        };
        match &self.sweep {
            None => vec![(None, base)],
            Some(sw) => sw
                .values
                .iter()
                .map(|z| {
                    let mut b = base;
                    match sw.param {
                        Slot::Eta => b.eta = Some(z.0),
                        Slot::Delta => b.delta = Some(z.0.re),
                        Slot::Rho => b.rho = Some(z.0.re),
                    }
                    (Some(*z), b)
                })
                .collect(),
        }
    }

    /// Builds the core objects for one binding. `s` is normalized here.
    pub fn build(&self, binding: &Binding) -> Result<Built, weakval_core::Error> {
        let s = vector(&self.s)?.normalized()?;
        let f = vector(&self.f)?;
        let a = matrix(&self.a)?.hermitian()?;
        let v = match &self.v {
            UnitarySpec::Identity => Operator::identity(self.dim),
            UnitarySpec::EtaPhase => eta_phase_unitary(&s, binding.eta.unwrap_or(C64::new(1.0, 0.0)))?,
            UnitarySpec::Matrix { matrix: m } => matrix(m)?,
        };
        Ok(match &self.meter {
            MeterSpec::Qubit { b } => Built::Qubit {
                s,
                a,
                v,
                b: match b {
                    Some(b) => matrix(b)?,
                    None => default_meter_observable(),
                },
                f,
            },
            MeterSpec::Gaussian { twist, grid, lambda, .. } | MeterSpec::Compact { twist, grid, lambda, .. } => {
                let base = self.base_meter()?.expect("grid meter");
                let delta = if *twist { binding.delta.unwrap_or(0.0) } else { 0.0 };
                let meter = if *twist { phase_twist(&base, delta)? } else { base.clone() };
                let grid = match grid {
                    Some(g) => Grid::new(g.q_min, g.q_max, g.points)?,
                    None => Grid::default_for_width(base.scale())?,
                };
                Built::Grid {
                    s,
                    a,
                    v,
                    f,
                    meter,
                    grid,
                    lambda: lambda.unwrap_or(DEFAULT_LAMBDA),
                    delta,
                }
            }
            MeterSpec::General { m, b, g } => {
                let (m, b, g) = match (m, b, g) {
                    (Some(m), Some(b), Some(g)) => (vector(m)?, matrix(b)?, matrix(g)?),
                    _ => two_level_meter(binding.rho.unwrap_or(0.0)),
                };
                Built::General { s, a, f, m, b, g }
            }
        })
    }
}
