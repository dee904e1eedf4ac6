use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gaussflow::cli;

#[derive(Parser)]
#[command(name = "gaussflow", version, about = "Graphical mean curvature flow with a prescribed gradient image")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a flow to its translating soliton and write monitors, snapshot, fields and report.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Reference solutions: `closed1d a b c d <sig>` or `radial R rho n <sig>`.
    #[command(allow_negative_numbers = true)]
    Oracle {
        kind: String,
        params: Vec<String>,
        /// Profile CSV path for the radial oracle.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant suite and print a pass/fail table.
    Check {
        /// Use the printed (uncorrected) metric square root and operator gradient.
        #[arg(long)]
        debug_paper_signs: bool,
    },
    /// Summarize a monitors.csv and emit per-column plot data.
    Report { csv: PathBuf },
}

fn main() -> ExitCode {
    let code = match Args::parse().command {
        Command::Run { config } => cli::run_command(&config),
        Command::Oracle { kind, params, out } => cli::oracle_command(&kind, &params, out.as_deref()),
        Command::Check { debug_paper_signs } => cli::check_command(debug_paper_signs),
        Command::Report { csv } => cli::report_command(&csv),
    };
    ExitCode::from(code as u8)
}
