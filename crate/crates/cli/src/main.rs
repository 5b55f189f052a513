use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sabap_cli::commands::OUT_DIR_ENV;
use sabap_cli::{cmd_check, cmd_compare, cmd_oracle, cmd_run, CheckArgs, OracleArg, RunArgs};

#[derive(Parser)]
#[command(
    name = "sabap",
    version,
    about = "String-averaging solvers for the best approximation problem"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a solver and write CSV and JSON traces.
    Run {
        config: PathBuf,
        /// Trace path; `.csv` and `.json` files are written side by side.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for traces when neither --out nor `output` is set.
        #[arg(long, env = OUT_DIR_ENV)]
        out_dir: Option<PathBuf>,
        /// `auto`, `none`, or a comma-separated reference point.
        #[arg(long, default_value = "auto")]
        oracle: OracleArg,
        #[arg(long)]
        max_iter: Option<u64>,
        #[arg(long)]
        record_every: Option<u64>,
        /// Truncation tolerance of a countable family.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Validate a config and print a pass/fail report.
    Check {
        config: PathBuf,
        /// Print the config with defaults filled in; the report goes to stderr.
        #[arg(long)]
        emit_normalized: bool,
    },
    /// Print P_F(u) as JSON.
    Oracle { config: PathBuf },
    /// Compare the iterates of two traces on a shared k-grid.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        tol: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = io::stdout().lock();
    let result = match cli.command {
        Command::Run {
            config,
            out: out_path,
            out_dir,
            oracle,
            max_iter,
            record_every,
            epsilon,
        } => cmd_run(
            &RunArgs {
                config,
                out: out_path,
                out_dir,
                oracle,
                max_iter,
                record_every,
                epsilon,
            },
            &mut out,
        ),
        Command::Check {
            config,
            emit_normalized,
        } => cmd_check(
            &CheckArgs {
                config,
                emit_normalized,
            },
            &mut out,
            &mut io::stderr(),
        ),
        Command::Oracle { config } => cmd_oracle(&config, &mut out),
        Command::Compare { a, b, tol } => cmd_compare(&a, &b, tol, &mut out),
    };
    out.flush().ok();
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("sabap: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
