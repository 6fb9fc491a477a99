//! Scenario files, result tables and the `weakval` command line.
//!
//! Numerics live in `weakval-core`; this crate adds TOML scenarios with
//! complex literals, parallel sweeps and Monte Carlo, CSV output, run
//! manifests that reproduce a run bit for bit, and SVG charts.

pub mod cli;
pub mod error;
pub mod literal;
pub mod pipeline;
pub mod plot;
pub mod report;
pub mod scenario;

pub use error::AppError;
pub use literal::Cx;
pub use scenario::ScenarioFile;
