use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use td_traces::harness::{
    load_environment, read_curves_csv, run_and_aggregate, write_oracle_csv, write_outputs, write_svg, ConfigFile,
    EnvSource, Workbench,
};
use td_traces::oracle::{bellman_residual, value_iteration, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE};
use td_traces::worked::run_worked_examples;
use td_traces::{Error, GridMap};

#[derive(Parser)]
#[command(name = "td-traces", version, about = "Tabular eligibility-trace experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a map file and print its summary.
    MapCheck { map: PathBuf },
    /// Solve an environment by value iteration.
    Oracle {
        /// `fig1` or a map file.
        env: String,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        /// Write `state,action,q_star` rows here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay the three-state worked examples and compare against pinned values.
    PaperCheck,
    /// Run an experiment file.
    Run {
        config: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        base_seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        plot: bool,
        /// Extra `key=value` overrides, applied last.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Render a curves CSV as SVG.
    Plot { curves: PathBuf, out: PathBuf },
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Parse { .. } | Error::Io { .. } | Error::Csv { .. } => 2,
            Error::NonConvergence { .. } => 3,
            Error::Key { .. } | Error::Contract(_) => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn env_source(arg: &str) -> EnvSource {
    if arg == "fig1" {
        EnvSource::Fig1
    } else {
        EnvSource::Map(PathBuf::from(arg))
    }
}

fn threads() -> Result<Option<usize>, Failure> {
    match std::env::var("TD_TRACES_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Failure {
                code: 2,
                message: format!("TD_TRACES_THREADS must be a positive integer, got {v:?}"),
            }),
        },
    }
}

fn map_check(path: &Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let grid = GridMap::parse(&text)?;
    let noise = grid.noise();
    let rewards = grid.rewards();
    println!("{}: {}x{}", path.display(), grid.width(), grid.height());
    println!("{}", grid.counts());
    println!(
        "noise forward {} clockwise {} counter_clockwise {}",
        noise.forward, noise.clockwise, noise.counter_clockwise
    );
    println!("rewards goal {} cliff {} step {}", rewards.goal, rewards.cliff, rewards.step);
    Ok(())
}

fn oracle(env: &str, gamma: f64, out: Option<&Path>) -> Result<(), Failure> {
    let env = load_environment(&env_source(env))?;
    let mdp = env.to_tabular();
    let result = value_iteration(&mdp, gamma, DEFAULT_TOLERANCE, DEFAULT_MAX_ITERATIONS)?;
    println!(
        "converged in {} sweeps, bellman residual {:e}",
        result.iterations,
        bellman_residual(&mdp, gamma, &result)
    );
    if let Some(path) = out {
        write_oracle_csv(env.as_ref(), &result, path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn paper_check() -> Result<(), Failure> {
    let results = run_worked_examples()?;
    for r in &results {
        println!("{r}");
    }
    println!("(fixtures keep sibling trace entries; experiments replace them per state)");
    let passed = results.iter().filter(|r| r.passed()).count();
    println!("{passed}/{} checks passed", results.len());
    if passed == results.len() {
        Ok(())
    } else {
        Err(Failure {
            code: 1,
            message: "worked-example mismatch".into(),
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn run(
    config: &Path,
    episodes: Option<usize>,
    seeds: Option<usize>,
    base_seed: Option<u64>,
    out: Option<PathBuf>,
    plot: bool,
    set: &[String],
) -> Result<(), Failure> {
    let mut file = ConfigFile::load(config)?;
    if let Some(n) = episodes {
        file.set("episodes", n.to_string());
    }
    if let Some(n) = seeds {
        file.set("seeds", n.to_string());
    }
    if let Some(n) = base_seed {
        file.set("base_seed", n.to_string());
    }
    if plot {
        file.set("plot", "true");
    }
    for pair in set {
        file.set_pair(pair)?;
    }
    let mut cfg = file.build()?;
    if let Some(dir) = out {
        cfg.out_dir = dir;
    }
    let bench = Workbench::load(&cfg.spec)?;
    let (output, agg) = run_and_aggregate(&cfg.spec, &bench, threads()?)?;
    for path in write_outputs(&cfg.out_dir, &output, &agg, cfg.plot)? {
        println!("wrote {}", path.display());
    }
    for s in &agg.summary {
        let last = agg.curve(&s.label).and_then(|c| c.smoothed.last()).copied().unwrap_or(f64::NAN);
        println!(
            "{:<11} instance-optimal {}/{} ({:.1}%), final smoothed {} {:.3}",
            s.label,
            s.optimal,
            s.total,
            100.0 * s.fraction(),
            agg.metric.name(),
            last
        );
    }
    Ok(())
}

fn plot(curves: &Path, out: &Path) -> Result<(), Failure> {
    let (metric, curves) = read_curves_csv(curves)?;
    write_svg(&curves, &metric, out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::MapCheck { map } => map_check(&map),
        Command::Oracle { env, gamma, out } => oracle(&env, gamma, out.as_deref()),
        Command::PaperCheck => paper_check(),
        Command::Run {
            config,
            episodes,
            seeds,
            base_seed,
            out,
            plot,
            set,
        } => run(&config, episodes, seeds, base_seed, out, plot, &set),
        Command::Plot { curves, out } => plot(&curves, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
