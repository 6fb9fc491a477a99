use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use weakval_core::montecarlo::{SampleCost, DEFAULT_TRIAL_CAP};

use crate::error::{exit, AppError};
use crate::literal::Cx;
use crate::pipeline::{cost_rows, deficit_rows, mc_rows, run_rows};
use crate::plot::{render, PlotSpec};
use crate::report::{write_costs, write_deficits, write_mc, write_results, Manifest, Table};
use crate::scenario::{self, ScenarioFile, Slot, SweepSpec};

#[derive(Debug, Parser)]
#[command(name = "weakval", version, about = "Weak-value protocols: analytic limits, finite-coupling quotients and Monte Carlo")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a scenario and write results.csv and manifest.toml.
    Run(Common),
    /// Evaluate a scenario over values of one parameter slot.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Parameter slot: eta, delta or rho.
        #[arg(long)]
        param: String,
        /// Comma-separated values, e.g. "1,0.5+0.866i,i,-1".
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
    },
    /// Weakness deficit of the binned readout (grid meters only).
    Deficit(Common),
    /// Monte Carlo trials, optionally with the sample-cost curve.
    Mc {
        #[command(flatten)]
        common: Common,
        /// Also find the trials needed for stderr/eps below this value.
        #[arg(long)]
        cost_precision: Option<f64>,
        /// Trial cap per point of the sample-cost curve.
        #[arg(long, default_value_t = DEFAULT_TRIAL_CAP)]
        cap: u64,
    },
    /// Render columns of a CSV table as an SVG chart.
    Plot {
        csv: PathBuf,
        /// Output file (default: the CSV path with an .svg extension).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "eps")]
        x: String,
        /// Comma-separated columns (default: analytic, finite and
        /// mc_estimate, whichever are present).
        #[arg(long, value_delimiter = ',')]
        y: Vec<String>,
        /// Use a linear x axis.
        #[arg(long)]
        linear_x: bool,
        #[arg(long)]
        log_y: bool,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario file or a manifest from an earlier run.
    pub scenario: PathBuf,
    /// Output directory (default: out/<scenario name>).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Comma-separated coupling strengths.
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
}

impl Common {
    /// Loads the scenario, applies flag overrides and makes defaults
    /// explicit.
    fn resolve(&self) -> Result<ScenarioFile, AppError> {
        let mut sc = scenario::load(&self.scenario)?;
        if let Some(seed) = self.seed {
            sc.run.seed = seed;
        }
        if let Some(trials) = self.trials {
            sc.run.trials = trials;
        }
        if let Some(eps) = &self.eps {
            sc.run.eps = eps.clone();
        }
        sc.resolve_defaults()?;
        if let Some(n) = self.grid_points {
            sc.set_grid_points(n)?;
        }
        sc.validate()?;
        Ok(sc)
    }

    fn out_dir(&self, sc: &ScenarioFile) -> Result<PathBuf, AppError> {
        let dir = self
            .out
            .clone()
            .unwrap_or_else(|| Path::new("out").join(&sc.name));
        fs::create_dir_all(&dir).map_err(|e| AppError::io(&dir, e))?;
        Ok(dir)
    }
}

fn finish(command: &str, sc: &ScenarioFile, dir: &Path, outputs: &[&str]) -> Result<(), AppError> {
    Manifest::new(command, sc, outputs).write(&dir.join("manifest.toml"))?;
    for o in outputs {
        println!("wrote {}", dir.join(o).display());
    }
    Ok(())
}

fn cmd_run(common: &Common, sc: ScenarioFile, command: &str) -> Result<(), AppError> {
    let rows = run_rows(&sc)?;
    let dir = common.out_dir(&sc)?;
    write_results(&dir.join("results.csv"), &rows)?;
    finish(command, &sc, &dir, &["results.csv"])
}

fn cmd_deficit(common: &Common) -> Result<(), AppError> {
    let sc = common.resolve()?;
    let rows = deficit_rows(&sc)?;
    let dir = common.out_dir(&sc)?;
    write_deficits(&dir.join("deficit.csv"), &rows)?;
    finish("deficit", &sc, &dir, &["deficit.csv"])
}

fn cmd_mc(common: &Common, cost_precision: Option<f64>, cap: u64) -> Result<(), AppError> {
    let sc = common.resolve()?;
    let dir = common.out_dir(&sc)?;
    let mut outputs = Vec::new();
    if sc.run.trials > 0 {
        write_mc(&dir.join("mc.csv"), &mc_rows(&sc)?)?;
        outputs.push("mc.csv");
    }
    if let Some(p) = cost_precision {
        let rows = cost_rows(&sc, p, cap)?;
        write_costs(&dir.join("sample_cost.csv"), &rows)?;
        outputs.push("sample_cost.csv");
        for chunk in rows.chunks(sc.run.eps.len()) {
            let curve: Vec<SampleCost> = chunk
                .iter()
                .map(|r| SampleCost {
                    epsilon: r.eps,
                    trials: r.trials_needed,
                })
                .collect();
            let label = match (chunk[0].param, chunk[0].value) {
                (Some(p), Some(v)) => format!(" {p}={v}"),
                _ => String::new(),
            };
            if let Ok(slope) = weakval_core::montecarlo::sample_cost_slope(&curve) {
                println!("sample-cost slope{label} (log trials vs log eps): {slope:.3}");
            }
        }
        for r in rows.iter().filter(|r| r.trials_needed.is_none()) {
            println!("cap of {cap} trials exceeded at eps={}", r.eps);
        }
    }
    if outputs.is_empty() {
        return Err(AppError::field("run.trials", "set --trials or --cost-precision".into()));
    }
    finish("mc", &sc, &dir, &outputs)
}

fn cmd_plot(csv: &Path, out: Option<&Path>, spec: PlotSpec) -> Result<(), AppError> {
    let table = Table::read(csv)?;
    let mut spec = spec;
    if spec.y.is_empty() {
        spec.y = ["analytic", "finite", "mc_estimate"]
            .iter()
            .filter(|c| table.column(c).is_some())
            .map(|c| c.to_string())
            .collect();
    }
    if spec.title.is_empty() {
        spec.title = csv
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    let svg = render(&table, &spec)?;
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| csv.with_extension("svg"));
    fs::write(&path, svg).map_err(|e| AppError::io(&path, e))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Run(common) => {
            let sc = common.resolve()?;
            cmd_run(&common, sc, "run")
        }
        Command::Sweep { common, param, values } => {
            let mut sc = common.resolve()?;
            let param: Slot = param.parse()?;
            let values = values
                .iter()
                .map(|v| v.parse::<Cx>().map_err(|e| AppError::field("--values", e.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            sc.sweep = Some(SweepSpec { param, values });
            sc.validate()?;
            cmd_run(&common, sc, "sweep")
        }
        Command::Deficit(common) => cmd_deficit(&common),
        Command::Mc { common, cost_precision, cap } => cmd_mc(&common, cost_precision, cap),
        Command::Plot { csv, out, x, y, linear_x, log_y } => cmd_plot(
            &csv,
            out.as_deref(),
            PlotSpec {
                x,
                y,
                log_x: !linear_x,
                log_y,
                title: String::new(),
            },
        ),
    }
}

/// Parses arguments, runs the command and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::PARSE } else { exit::OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
