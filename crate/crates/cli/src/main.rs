//! `certibif`: simulation, validated continuation, bifurcation certificates
//! and rotation-number analysis for the red coral model.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage or output error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "certibif", version, about = "Validated continuation and bifurcation certificates for the red coral model")]
pub struct Cli {
    /// Model parameters as TOML; defaults to the built-in coral data.
    #[arg(long, global = true, value_name = "FILE")]
    pub params: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Iterate the map and write the time series as CSV.
    Simulate(SimulateArgs),
    /// Validated continuation of the nontrivial branch.
    Branch(BranchArgs),
    /// Certify the Neimark-Sacker point.
    ValidateNs(ValidateArgs),
    /// Certify the saddle-node point.
    ValidateSn(ValidateArgs),
    /// Closed-form transcritical point on the trivial branch.
    Transcritical(TranscriticalArgs),
    /// Rotation numbers on invariant circles over a range of R.
    Rotation(RotationArgs),
    /// Smallest-denominator fraction in an interval.
    Farey(FareyArgs),
    /// Bifurcation diagram rows for both branches.
    Diagram(DiagramArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Reproduction number.
    #[arg(long = "R", value_name = "R")]
    pub r: f64,
    /// Initial state: `y` (density 1500 along the stable age profile) or a
    /// file of whitespace or comma separated numbers.
    #[arg(long, default_value = "y")]
    pub x0: String,
    /// Factor applied to the initial state.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Number of iterates to record.
    #[arg(long, default_value_t = 1000)]
    pub years: usize,
    /// Iterates discarded first.
    #[arg(long, default_value_t = 0)]
    pub skip: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Precondition {
    Auto,
    None,
}

#[derive(Args, Debug, Clone)]
pub struct BranchArgs {
    #[arg(long = "from-R", default_value_t = 300.0)]
    pub from_r: f64,
    /// Stop when R crosses this value after `--folds-before-target` folds.
    #[arg(long = "to-R")]
    pub to_r: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub folds_before_target: usize,
    #[arg(long, default_value_t = 5000)]
    pub max_steps: usize,
    #[arg(long, default_value_t = 0.8)]
    pub alpha_frac: f64,
    #[arg(long, value_enum, default_value_t = Precondition::Auto)]
    pub precondition: Precondition,
    /// Start by decreasing R (default) or increasing it.
    #[arg(long)]
    pub increasing: bool,
    /// One row per box.
    #[arg(long, default_value = "branch.csv")]
    pub csv: PathBuf,
    /// Full certificate chain.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    /// Anchor: a certificate JSON or a JSON array with the unknown vector.
    #[arg(long)]
    pub anchor: Option<PathBuf>,
    /// Radius of the Lipschitz box around the anchor.
    #[arg(long, default_value_t = 1e-6)]
    pub ell: f64,
    /// Search range in R for the Neimark-Sacker approximation.
    #[arg(long = "R-lo", default_value_t = 100.0)]
    pub r_lo: f64,
    #[arg(long = "R-hi", default_value_t = 200.0)]
    pub r_hi: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TranscriticalArgs {
    /// Certificate JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RotationArgs {
    /// `a:b:n`, n values of R from a to b.
    #[arg(long = "R-range", default_value = "180:280:11")]
    pub r_range: String,
    #[arg(long, default_value = "2500,2500")]
    pub center: String,
    #[arg(long, default_value_t = 100_000)]
    pub iterates: usize,
    #[arg(long, default_value_t = 10_000)]
    pub skip: usize,
    /// Initial state factor times `y`.
    #[arg(long, default_value_t = 1.5)]
    pub scale: f64,
    #[arg(long, default_value_t = 200)]
    pub bins: usize,
    /// ρ against R.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Angle profiles, one block per R.
    #[arg(long)]
    pub profile_out: Option<PathBuf>,
    /// Point clouds `(R, x1, x2)`, every `--stride`-th iterate.
    #[arg(long)]
    pub points_out: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub stride: usize,
}

#[derive(Args, Debug)]
pub struct FareyArgs {
    /// Lower end, a decimal like 0.126 or a fraction p/q.
    pub lo_pos: Option<String>,
    pub hi_pos: Option<String>,
    #[arg(long, conflicts_with = "lo_pos")]
    pub lo: Option<String>,
    #[arg(long, conflicts_with = "hi_pos")]
    pub hi: Option<String>,
}

#[derive(Args, Debug)]
pub struct DiagramArgs {
    #[command(flatten)]
    pub branch: BranchArgs,
    /// Upper end of the trivial-branch grid.
    #[arg(long = "R-max", default_value_t = 300.0)]
    pub r_max: f64,
    #[arg(long, default_value = "diagram.csv")]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(n) = std::env::var("CERTIBIF_THREADS") {
        match n.parse::<usize>() {
            Ok(n) => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            Err(_) => {
                eprintln!("error: CERTIBIF_THREADS must be a positive integer");
                return ExitCode::from(2);
            }
        }
    }
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
