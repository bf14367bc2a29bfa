use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use translab_cli::{commands, CliError};

/// Solvers and a dyadic regularity-analysis harness for linear
/// transmission problems with a discontinuous-coefficient interface.
#[derive(Parser)]
#[command(name = "translab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the elliptic transmission problem from a config file.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for field.fld, run.log, gradients.csv.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Time-step the parabolic transmission problem.
    Parabolic {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Dyadic analysis of a solved field: affine fits, BMO constants,
    /// densities, decay slack, dichotomy tags.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        /// Field file produced by solve/parabolic.
        #[arg(long)]
        field: PathBuf,
        /// Centers spec: gridN or "x,y;x,y" (overrides the analysis section).
        #[arg(long)]
        centers: Option<String>,
        /// Scales spec r0:k (overrides the analysis section).
        #[arg(long)]
        scales: Option<String>,
        #[arg(long, default_value = "report.csv")]
        out: PathBuf,
    },
    /// Run the strong-form residual suite on the closed-form oracles.
    OracleCheck {
        #[arg(long, default_value_t = 1_000_000)]
        points: usize,
    },
    /// Run the Dini-calculus suite on the configured modulus.
    ModulusCheck {
        #[arg(long)]
        config: PathBuf,
        /// Lower cutoff for the tail integrals.
        #[arg(long, default_value_t = 1e-10)]
        r_min: f64,
        /// Exponent for the weighted nested integral check.
        #[arg(long, default_value_t = 3.0)]
        alpha: f64,
    },
    /// Mesh-refinement study.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated power-of-two resolutions, e.g. 32,64,128.
        #[arg(long, value_delimiter = ',')]
        resolutions: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate analysis CSVs into summary statistics.
    Report {
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        inputs: Vec<PathBuf>,
    },
}

fn run() -> Result<(), CliError> {
    // TRANSLAB_THREADS caps analysis/assembly parallelism.
    if let Ok(threads) = std::env::var("TRANSLAB_THREADS") {
        let threads: usize = threads
            .parse()
            .map_err(|_| CliError::validation("TRANSLAB_THREADS must be a positive integer"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::validation(format!("thread pool: {e}")))?;
    }

    match Cli::parse().command {
        Command::Solve { config, out_dir } => commands::solve(&config, &out_dir),
        Command::Parabolic { config, out_dir } => commands::parabolic_cmd(&config, &out_dir),
        Command::Analyze { config, field, centers, scales, out } => {
            commands::analyze(&config, &field, centers.as_deref(), scales.as_deref(), &out)
        }
        Command::OracleCheck { points } => commands::oracle_check(points),
        Command::ModulusCheck { config, r_min, alpha } => {
            commands::modulus_check(&config, r_min, alpha)
        }
        Command::Sweep { config, resolutions, out } => {
            commands::sweep(&config, &resolutions, out.as_deref())
        }
        Command::Report { inputs } => commands::report_cmd(&inputs),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
