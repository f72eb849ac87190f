use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use autodissect::harness::{self, HarnessError, ScenarioConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "autodissect", version, about = "Seeded gallbladder-dissection trials on a synthetic phantom")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write per-trial JSONL logs plus summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: Option<u32>,
        /// Base seed; trial i uses seed + i.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plot boundary points of the matching logs as SVG.
    Plot {
        #[arg(long)]
        logs: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-derive the metrics of a logged trial.
    Replay {
        #[arg(long)]
        log: PathBuf,
    },
}

const EXIT_ABORTED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

fn run(config: PathBuf, trials: Option<u32>, seed: Option<u64>, out: Option<PathBuf>) -> Result<ExitCode> {
    let mut cfg = match ScenarioConfig::load(&config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(EXIT_CONFIG));
        }
    };
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    if let Some(o) = out {
        cfg.output_dir = o;
    }
    let summary = match harness::run_scenario(&cfg) {
        Ok(s) => s,
        Err(e @ (HarnessError::ConfigParse(_) | HarnessError::InvalidConfig(_))) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(EXIT_CONFIG));
        }
        Err(e) => return Err(e.into()),
    };
    print!("{}", summary.render_table());
    println!("wrote {} logs to {}", summary.trials.len(), cfg.output_dir.display());
    Ok(if summary.aborted > 0 {
        ExitCode::from(EXIT_ABORTED)
    } else {
        ExitCode::SUCCESS
    })
}

fn plot(pattern: &str, out: PathBuf) -> Result<ExitCode> {
    let mut paths: Vec<PathBuf> = glob::glob(pattern)
        .with_context(|| format!("bad glob {pattern:?}"))?
        .collect::<Result<_, _>>()?;
    paths.sort();
    if paths.is_empty() {
        bail!("no logs match {pattern:?}");
    }
    let logs = paths
        .iter()
        .map(|p| harness::read_log(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    harness::plot_boundary_distribution(&logs, &out)?;
    println!("plotted {} logs to {}", logs.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn replay(path: PathBuf) -> Result<ExitCode> {
    let log = harness::read_log(&path).with_context(|| format!("reading {}", path.display()))?;
    let report = harness::replay(&log);
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            trials,
            seed,
            out,
        } => run(config, trials, seed, out),
        Command::Plot { logs, out } => plot(&logs, out),
        Command::Replay { log } => replay(log),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(EXIT_IO)
    })
}
