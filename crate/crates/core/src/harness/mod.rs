//! Experiment execution, aggregation and artifact output.

mod aggregate;
mod config;
mod experiment;
mod output;

pub use aggregate::{aggregate, smooth, Aggregate, CensusRow, CensusSummary, Curve};
pub use config::{ConfigFile, RunConfig};
pub use experiment::{
    load_environment, run_episode, run_experiment, AgentSpec, EnvSource, EpisodeResult, EpsilonDecay, ExperimentOutput,
    ExperimentSpec, FinalTable, Metric, RunRecord, StartMode, Workbench, DEFAULT_STEP_CAP,
};
pub use output::{
    curves_header, read_curves_csv, render_svg, write_census_csv, write_curves_csv, write_oracle_csv, write_records_csv,
    write_svg, RECORD_HEADER,
};

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::oracle::default_horizon;

/// Runs `spec` and aggregates it with the default census horizon.
pub fn run_and_aggregate(
    spec: &ExperimentSpec,
    bench: &Workbench,
    threads: Option<usize>,
) -> Result<(ExperimentOutput, Aggregate)> {
    let output = run_experiment(spec, bench, threads)?;
    let agg = aggregate(
        &output,
        spec,
        &bench.mdp,
        &bench.oracle,
        |s| bench.env.state_label(s),
        default_horizon(&bench.mdp),
    )?;
    Ok((output, agg))
}

/// Writes `records.csv`, `curves.csv`, `census.csv` and, with `plot`,
/// `curves.svg` into `dir`. Returns the paths written.
pub fn write_outputs(dir: &Path, output: &ExperimentOutput, agg: &Aggregate, plot: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let records = dir.join("records.csv");
    let curves = dir.join("curves.csv");
    let census = dir.join("census.csv");
    write_records_csv(&output.records, &records)?;
    write_curves_csv(&agg.curves, agg.metric, &curves)?;
    write_census_csv(agg, &census)?;
    let mut written = vec![records, curves, census];
    if plot {
        let svg = dir.join("curves.svg");
        write_svg(&agg.curves, &format!("smoothed {}", agg.metric.name()), &svg)?;
        written.push(svg);
    }
    Ok(written)
}
