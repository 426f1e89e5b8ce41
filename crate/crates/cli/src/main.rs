//! `milpexplain` command-line front end.
//!
//! Exit codes: 0 success, 1 verification failure, 2 input/schema error,
//! 3 I/O error, 4 solver inconclusive.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use milpexplain::encoding::EncodingKind;
use milpexplain::solver::SolverConfig;

#[derive(Parser)]
#[command(
    name = "milpexplain",
    version,
    about = "Minimal explanations of ReLU network predictions via MILP"
)]
struct Cli {
    /// Branch-and-bound node limit per solve; exceeding it exits with 4.
    #[arg(long, global = true, default_value_t = 1_000_000)]
    node_limit: u64,
    /// Wall-clock limit per solve, in seconds.
    #[arg(long, global = true)]
    time_limit: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate a model file; print its architecture.
    Validate { model: PathBuf },
    /// Tighten per-neuron bounds and write a bounds cache.
    Bounds {
        model: PathBuf,
        #[arg(long, default_value = "bigm")]
        encoding: EncodingKind,
        #[arg(long)]
        out: PathBuf,
        /// Recompute even if `--out` already holds bounds for this model.
        #[arg(long)]
        force: bool,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Write the LP file of F, with one instance fixed and optionally ¬E.
    Encode {
        model: PathBuf,
        #[arg(long, default_value = "bigm")]
        encoding: EncodingKind,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long = "instance-index", default_value_t = 0)]
        instance_index: usize,
        /// Attach the negated prediction for the instance's predicted class.
        #[arg(long)]
        negate: bool,
        #[arg(long)]
        out: PathBuf,
        /// Reuse bounds from a cache written by `bounds`.
        #[arg(long)]
        bounds: Option<PathBuf>,
    },
    /// Compute a minimal explanation for every dataset instance.
    Explain {
        model: PathBuf,
        dataset: PathBuf,
        #[arg(long, default_value = "bigm")]
        encoding: EncodingKind,
        /// natural, reverse, seed:N, or seed (uses MILPEXPLAIN_SEED).
        #[arg(long)]
        order: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated instance indices (default: all).
        #[arg(long, value_delimiter = ',')]
        index: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        bounds: Option<PathBuf>,
    },
    /// Re-check every explanation of a report on freshly built encodings.
    Verify {
        model: PathBuf,
        dataset: PathBuf,
        report: PathBuf,
        /// Defaults to the encoding recorded in the report.
        #[arg(long)]
        encoding: Option<EncodingKind>,
    },
    /// Compare both encodings: build time over R rebuilds, explanation time
    /// over all instances. Standard deviations are population (divide by n).
    Bench {
        model: PathBuf,
        dataset: PathBuf,
        #[arg(long, default_value_t = 10)]
        rebuilds: usize,
        #[arg(long)]
        order: Option<String>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Structured report path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    commands::configure_solver(SolverConfig {
        node_limit: cli.node_limit,
        time_limit: cli.time_limit.map(Duration::from_secs_f64),
        ..SolverConfig::default()
    });
    let result = match cli.command {
        Command::Validate { model } => commands::validate(&model),
        Command::Bounds {
            model,
            encoding,
            out,
            force,
            jobs,
        } => commands::bounds(&model, encoding, &out, force, jobs),
        Command::Encode {
            model,
            encoding,
            dataset,
            instance_index,
            negate,
            out,
            bounds,
        } => commands::encode(
            &model,
            encoding,
            &dataset,
            instance_index,
            negate,
            &out,
            bounds.as_deref(),
        ),
        Command::Explain {
            model,
            dataset,
            encoding,
            order,
            out,
            index,
            jobs,
            bounds,
        } => commands::explain(&commands::ExplainArgs {
            model,
            dataset,
            encoding,
            order,
            out,
            index,
            jobs,
            bounds,
        }),
        Command::Verify {
            model,
            dataset,
            report,
            encoding,
        } => commands::verify(&model, &dataset, &report, encoding),
        Command::Bench {
            model,
            dataset,
            rebuilds,
            order,
            jobs,
            out,
        } => commands::bench(
            &model,
            &dataset,
            rebuilds,
            order.as_deref(),
            jobs,
            out.as_deref(),
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
