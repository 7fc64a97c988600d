//! Batch frontend for quantum optimal transport computations: distances,
//! costs, duals, geodesics and tensor analyses over JSON inputs, with
//! deterministic JSON reports.

mod check;
mod commands;
mod inputs;
mod report;

use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

use commands::Settings;
use qot::grassmann::DistanceScale;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScaleArg {
    Canonical,
    Embedded,
}

impl From<ScaleArg> for DistanceScale {
    fn from(value: ScaleArg) -> Self {
        match value {
            ScaleArg::Canonical => DistanceScale::Canonical,
            ScaleArg::Embedded => DistanceScale::Embedded,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "qot",
    version,
    about = "Optimal transport between quantum states over the Grassmannian"
)]
struct Cli {
    /// Cost exponent p >= 1
    #[arg(long, global = true, default_value_t = 2.0)]
    p: f64,
    /// Distance normalization
    #[arg(long, global = true, value_enum, default_value_t = ScaleArg::Canonical)]
    scale: ScaleArg,
    /// RNG seed (echoed in every report)
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Optimizer restarts for representation searches
    #[arg(long, global = true, default_value_t = 8)]
    restarts: usize,
    /// Time points for geodesic interpolation
    #[arg(long, global = true, default_value_t = 9)]
    grid: usize,
    /// Override the default tolerance of the primary report check
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Write the report here instead of stdout (atomic)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Geodesic distance and principal angles between two projections
    Dist { a: PathBuf, b: PathBuf },
    /// Wasserstein distance between two density matrices
    Wp { a: PathBuf, b: PathBuf },
    /// Transport cost minimized over spectral representations
    Cost { a: PathBuf, b: PathBuf },
    /// Kantorovich potentials and duality diagnostics
    Dual { a: PathBuf, b: PathBuf },
    /// Displacement interpolation between two states
    Geodesic { a: PathBuf, b: PathBuf },
    /// Cost and correlation analysis of a pure state of the doubled system
    #[command(name = "tensor-cost")]
    TensorCost { state: PathBuf },
    /// Run a bundled verification suite
    Check {
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var("QOT_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            qot::configure_threads(n.max(1));
        }
    }
    if cli.p < 1.0 || cli.p > 16.0 {
        eprintln!("validation failed for --p: {} outside [1, 16]", cli.p);
        std::process::exit(2);
    }
    let settings = Settings {
        p: cli.p,
        scale: cli.scale.into(),
        seed: cli.seed,
        restarts: cli.restarts,
        grid: cli.grid,
        tol: cli.tol,
        out: cli.out.clone(),
    };
    let outcome = match &cli.command {
        Command::Dist { a, b } => commands::run_dist(a, b, &settings),
        Command::Wp { a, b } => commands::run_wp(a, b, &settings),
        Command::Cost { a, b } => commands::run_cost(a, b, &settings),
        Command::Dual { a, b } => commands::run_dual(a, b, &settings),
        Command::Geodesic { a, b } => commands::run_geodesic(a, b, &settings),
        Command::TensorCost { state } => commands::run_tensor_cost(state, &settings),
        Command::Check { suite } => commands::run_check(suite, &settings),
    };
    match outcome {
        Err(err) => {
            eprintln!("{}", err.describe());
            std::process::exit(err.exit_code());
        }
        Ok(report) => {
            if let Err(io) = report.write(settings.out.as_deref()) {
                eprintln!("failed to write report: {io}");
                std::process::exit(2);
            }
            if report.all_passed() {
                std::process::exit(0);
            }
            std::process::exit(3);
        }
    }
}
