//! `exgsp`: run scenario sweeps of the exploratory auctions.
//!
//! Exit codes: 0 success, 1 I/O failure writing outputs, 2 invalid scenario,
//! 3 numeric failure while evaluating a valid scenario.

mod report;
mod scenario;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use report::{evaluate, summary_json, write_plot_csv, write_results_csv, PointResult, PLOT_METRICS};
use scenario::Scenario;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    fn exit_code(&self) -> u8 {
        match self {
            RunError::Io(_) => 1,
            RunError::Validation(_) => 2,
            RunError::Numeric(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "exgsp", version, about = "Exploratory GSP / laddered auction scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every sweep point and write results.csv, plot.csv and summary.json.
    Run {
        scenario: PathBuf,
        /// Output directory (default: `output.dir` from the scenario, else `exgsp-out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Write an example scenario.
    Init {
        #[arg(long = "example", value_name = "PATH")]
        example: PathBuf,
    },
    /// Check a scenario without evaluating it.
    Verify { scenario: PathBuf },
}

fn run(path: &Path, out: Option<PathBuf>, seed: Option<u64>, threads: Option<usize>) -> Result<PathBuf, RunError> {
    let scenario = Scenario::load(path)?;
    let mechanism = scenario.mechanism()?;
    let points = scenario.points()?;
    let seed = seed.unwrap_or(scenario.seed);
    let out = out
        .or_else(|| scenario.output.as_ref().map(|o| PathBuf::from(&o.dir)))
        .unwrap_or_else(|| PathBuf::from("exgsp-out"));

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| RunError::Validation(format!("--threads: {e}")))?;
    let results: Vec<PointResult> = pool.install(|| {
        points
            .par_iter()
            .map(|p| evaluate(p, mechanism, scenario.estimation.as_ref(), seed))
            .collect::<Result<_, _>>()
    })?;

    fs::create_dir_all(&out)?;
    write_results_csv(&results, BufWriter::new(File::create(out.join("results.csv"))?))?;
    write_plot_csv(&results, &PLOT_METRICS, BufWriter::new(File::create(out.join("plot.csv"))?))?;
    let summary = summary_json(&scenario, seed, &results);
    fs::write(
        out.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
    )?;
    for r in &results {
        if let Some(log) = &r.log {
            log.write_csv(BufWriter::new(File::create(out.join(format!("clicks_n{}_L{}.csv", r.n, r.l)))?))?;
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            threads,
        } => run(&scenario, out, seed, threads).map(|dir| println!("wrote {}", dir.display())),
        Command::Init { example } => fs::write(&example, Scenario::example().to_toml())
            .map_err(RunError::from)
            .map(|()| println!("wrote {}", example.display())),
        Command::Verify { scenario } => Scenario::load(&scenario)
            .and_then(|s| s.points())
            .map(|pts| println!("ok: {} sweep point(s)", pts.len())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("exgsp: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
