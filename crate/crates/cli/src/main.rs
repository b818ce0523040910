//! `hjmm`: batch front-end for minimax solutions of 1-D Hamilton–Jacobi
//! Cauchy problems.
//!
//! Exit codes: 0 success, 1 forbidden singularity or failed comparison,
//! 2 configuration or I/O error, 3 numerical failure.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{parse_grid, Overrides, RunConfig};
use failure::{Failure, Outcome};

#[derive(Debug, Parser)]
#[command(name = "hjmm", version, about = "Minimax solutions of 1-D Hamilton-Jacobi Cauchy problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `[output] dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Grid size as NTxNQ, overriding `[grid]`.
    #[arg(long, global = true, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0: one per core).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimax solution on the grid, with optional fronts and snapshots.
    Solve,
    /// Minimax against Lax–Oleinik (convex or concave H) and Lax–Friedrichs.
    Compare,
    /// Singular events of the minimax solution or of a grid file.
    Classify,
    /// Front, its analysis and the strands behind it at one time.
    DumpFront {
        #[arg(long)]
        time: f64,
    },
    /// SVG snapshot of the front at one time.
    Render {
        #[arg(long)]
        time: f64,
    },
}

fn run(cli: &Cli) -> Outcome<String> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Config("--config is required".into()))?;
    let ov = Overrides {
        out: cli.out.clone(),
        grid: cli.grid,
        seed: cli.seed,
        workers: cli.workers,
    };
    let c = RunConfig::load(path, &ov)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(c.run.workers)
        .build()
        .map_err(|e| Failure::Config(format!("worker pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Solve => commands::solve(&c),
        Command::Compare => commands::compare(&c),
        Command::Classify => commands::classify_cmd(&c),
        Command::DumpFront { time } => commands::dump_front(&c, time),
        Command::Render { time } => commands::render(&c, time),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("hjmm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
