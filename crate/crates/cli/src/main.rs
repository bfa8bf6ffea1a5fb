//! `strata`: run, query and analyse strategy programs from the command line.
//!
//! Exit status: 0 success, 1 analysis findings, 2 usage or input errors,
//! 3 the strategy failed, 4 the fuel ran out.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use strata::interp::DEFAULT_FUEL;

#[derive(Parser)]
#[command(name = "strata", version, about = "Traversal strategies: interpreter, queries and static analyses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Inputs {
    /// Signature file.
    sig: PathBuf,
    /// Program file.
    program: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Apply `main` (or another entry) to a term.
    Run {
        #[command(flatten)]
        inputs: Inputs,
        /// Term file.
        term: PathBuf,
        /// Evaluation steps before giving up.
        #[arg(long, default_value_t = DEFAULT_FUEL, value_parser = clap::value_parser!(u64).range(1..))]
        fuel: u64,
        /// Closed definition to run instead of `main`.
        #[arg(long, conflicts_with = "expr")]
        entry: Option<String>,
        /// Strategy expression to run instead of `main`.
        #[arg(long)]
        expr: Option<String>,
    },
    /// Run the program's `query` (or `--expr`) over a term.
    Query {
        #[command(flatten)]
        inputs: Inputs,
        term: PathBuf,
        /// One of int-sum, float-sum, count, list, max.
        #[arg(long, default_value = "list")]
        monoid: String,
        /// Query expression to run instead of `query`.
        #[arg(long)]
        expr: Option<String>,
    },
    /// Static analyses.
    Analyze {
        #[command(subcommand)]
        analysis: Analysis,
    },
    /// Check the algebraic laws on random samples.
    Laws {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
        cases: u64,
    },
    /// All checks in one pass: load warnings, dead choices, dead cases, termination.
    Lint {
        #[command(flatten)]
        inputs: Inputs,
        /// Root sort for dead-case detection.
        #[arg(long)]
        root: Option<String>,
        #[arg(long, default_value = "depth")]
        measure: String,
    },
}

#[derive(Subcommand)]
enum Analysis {
    /// Success and failure behaviour of every definition.
    Fallibility {
        #[command(flatten)]
        inputs: Inputs,
        /// Reject choices whose left operand never fails.
        #[arg(long)]
        strict: bool,
    },
    /// Type-specific cases reachable from a root sort.
    Reach {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        root: String,
    },
    /// Termination with respect to a measure.
    Termination {
        #[command(flatten)]
        inputs: Inputs,
        /// `depth`, or `count:C,...,depth`.
        #[arg(long, default_value = "depth")]
        measure: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { inputs, term, fuel, entry, expr } => {
            commands::run(&inputs.sig, &inputs.program, &term, fuel, entry.as_deref(), expr.as_deref())
        }
        Command::Query { inputs, term, monoid, expr } => {
            commands::query(&inputs.sig, &inputs.program, &term, &monoid, expr.as_deref())
        }
        Command::Analyze { analysis } => match analysis {
            Analysis::Fallibility { inputs, strict } => commands::fallibility(&inputs.sig, &inputs.program, strict),
            Analysis::Reach { inputs, root } => commands::reach(&inputs.sig, &inputs.program, &root),
            Analysis::Termination { inputs, measure } => {
                commands::termination(&inputs.sig, &inputs.program, &measure)
            }
        },
        Command::Laws { seed, cases } => commands::laws(seed, cases as usize),
        Command::Lint { inputs, root, measure } => {
            commands::lint(&inputs.sig, &inputs.program, root.as_deref(), &measure)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(commands::USAGE)
        }
    }
}
