mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fpca_core::dataio::CenterMode;
use fpca_core::report::Format;
use fpca_core::{EigMode, FpcaError};

#[derive(Parser, Debug)]
#[command(name = "fpca", version, about = "Standard and fair PCA for two-group tabular data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Standard PCA baseline with per-group losses.
    Pca {
        #[command(flatten)]
        common: Common,
        /// Write the n x r basis here (CSV, no header).
        #[arg(long)]
        basis: Option<PathBuf>,
    },
    /// Fair PCA by eigenvalue optimization.
    Fpca {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        basis: Option<PathBuf>,
        /// Points of the phi profile stored in the report.
        #[arg(long, default_value_t = 101)]
        grid: usize,
    },
    /// phi(t) on a uniform grid of [0, 1] plus the optimum.
    Phi {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 101)]
        grid: usize,
    },
    /// Boundary samples of the joint numerical range of the two loss matrices.
    Numrange {
        #[command(flatten)]
        common: Common,
        /// Number of search directions.
        #[arg(long, default_value_t = 720)]
        samples: usize,
        /// Hull, diagonal intersection and overlay summary (JSON). Defaults
        /// to `<output stem>.diagnostics.json`.
        #[arg(long)]
        diagnostics: Option<PathBuf>,
        /// Also solve fair PCA and report where y* sits in the range.
        #[arg(long)]
        overlay_fpca: bool,
    },
    /// PCA and fair PCA side by side.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 101)]
        grid: usize,
    },
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub group_column: String,
    #[arg(long)]
    pub group_a: String,
    #[arg(long)]
    pub group_b: String,
    /// Comma-separated feature columns; default is every other column.
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    #[arg(long)]
    pub rank: usize,
    /// Absolute tolerance on t for the optimizer.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value = "auto", value_parser = parse_mode)]
    pub eig_mode: EigMode,
    #[arg(long)]
    pub standardize: bool,
    #[arg(long, default_value = "global", value_parser = parse_center)]
    pub center: CenterMode,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value = "json", value_parser = parse_format)]
    pub format: Format,
    /// Seed of the iterative eigensolver's start vectors.
    #[arg(long, default_value_t = 0x5eed)]
    pub seed: u64,
    /// Write per-stage wall-clock seconds here (JSON).
    #[arg(long)]
    pub timings: Option<PathBuf>,
    #[arg(long)]
    pub quiet: bool,
    /// Worker threads for parallel sampling; 0 uses all cores.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

fn parse_mode(s: &str) -> Result<EigMode, String> {
    s.parse().map_err(|e: FpcaError| e.to_string())
}

fn parse_center(s: &str) -> Result<CenterMode, String> {
    s.parse().map_err(|e: FpcaError| e.to_string())
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse().map_err(|e: FpcaError| e.to_string())
}

fn exit_code(err: &FpcaError) -> u8 {
    if err.is_solver_failure() {
        4
    } else if err.is_data_error() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Pca { common, .. }
        | Command::Fpca { common, .. }
        | Command::Phi { common, .. }
        | Command::Numrange { common, .. }
        | Command::Compare { common, .. } => common,
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(common.threads).build_global() {
        eprintln!("error: cannot configure thread pool: {e}");
        return ExitCode::from(2);
    }
    let result = match &cli.command {
        Command::Pca { common, basis } => commands::pca(common, basis.as_deref()),
        Command::Fpca { common, basis, grid } => commands::fpca(common, basis.as_deref(), *grid),
        Command::Phi { common, grid } => commands::phi(common, *grid),
        Command::Numrange {
            common,
            samples,
            diagnostics,
            overlay_fpca,
        } => commands::numrange(common, *samples, diagnostics.as_deref(), *overlay_fpca),
        Command::Compare { common, grid } => commands::compare(common, *grid),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
