use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use buckcpn_cli::{compare, plot_trace, simulate_to_csv, CliError, Engine};

#[derive(Parser)]
#[command(name = "buckcpn", version, about = "Buck converter CPN simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario on the engine it names and write the trace CSV.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scenario on the Euler oracle and write the trace CSV.
    Oracle {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare two trace files; prints a JSON summary.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        tol: f64,
    },
    /// Render a trace CSV as SVG.
    Plot {
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { scenario, out } => simulate_to_csv(&scenario, &out, None).map(drop),
        Command::Oracle { scenario, out } => {
            simulate_to_csv(&scenario, &out, Some(Engine::Oracle)).map(drop)
        }
        Command::Compare { a, b, tol } => compare(&a, &b, tol, io::stdout().lock()),
        Command::Plot { csv, out } => plot_trace(&csv, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("buckcpn: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
