//! `densemeas` — reproducible dense-measurement runs from the command line.
//!
//! Subcommands: `rounds` (round-count calculators), `run` (one end-to-end
//! procedure execution), `curve` (Monte Carlo success sweep), `rip`
//! (restricted-isometry constant), `subgauss` (empirical tail fit).
//!
//! Exit status contract: 0 success/exact recovery, 2 inexact recovery,
//! 1 any error (including usage errors). `DENSEMEAS_THREADS` caps worker
//! parallelism.

mod commands;
mod output;

use clap::{Args, Parser, Subcommand};
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "densemeas", version, about = "Dense randomized measurement toolkit")]
struct Cli {
    /// Emit machine-readable JSON records instead of key=value text.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate a round-count calculator and its success probability.
    Rounds(RoundsArgs),
    /// Execute one measurement-and-recovery procedure run.
    Run(RunArgs),
    /// Sweep empirical success probability over measurement rounds.
    Curve(CurveArgs),
    /// Compute the exact restricted-isometry constant of an ensemble.
    Rip(RipArgs),
    /// Fit an empirical sub-Gaussian tail envelope.
    Subgauss(SubgaussArgs),
}

#[derive(Debug, Args)]
struct RoundsArgs {
    /// Which calculator: 1 (isometry regime), 2 (bounded-orthonormal),
    /// 3 (computational basis).
    #[arg(long)]
    theorem: u8,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    /// Isometry tolerance χ in (0,1) (theorem 1).
    #[arg(long)]
    chi: Option<f64>,
    /// Failure probability ε in (0,1) (theorem 1).
    #[arg(long)]
    eps: Option<f64>,
    /// Concentration constant c > 0 (theorem 1).
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Round-count constant α > 0 (theorem 2).
    #[arg(long)]
    alpha: Option<f64>,
    /// Boundedness constant Z ≥ 1, or `auto` for √n (theorem 2).
    #[arg(long)]
    z: Option<String>,
    /// Leading constant γ > 0 (theorem 3).
    #[arg(long)]
    gamma: Option<f64>,
    /// Error probability ξ in (0,1) (theorem 3).
    #[arg(long)]
    xi: Option<f64>,
    /// Sparsity-term constant (theorem 3 ξ form).
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    /// Error-term constant (theorem 3 ξ form).
    #[arg(long, default_value_t = 1.0)]
    c2: f64,
    /// Logarithm base: 10 or e.
    #[arg(long, default_value = "10")]
    log_base: String,
}

#[derive(Debug, Args, Clone)]
struct RunArgs {
    /// 1 (arbitrary transform) or 2 (computational basis).
    #[arg(long)]
    procedure: Option<u8>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Measurement rounds.
    #[arg(long)]
    r: Option<usize>,
    /// Computational basis U_B: identity | walsh | dct | random[:seed].
    #[arg(long)]
    basis: Option<String>,
    /// Round transform U(θ'): identity | walsh | dct | random[:seed]
    /// (procedure 1 only).
    #[arg(long)]
    theta_basis: Option<String>,
    /// Mask mode: raw01 | centered.
    #[arg(long)]
    mode: Option<String>,
    /// Nonzero-value distribution: unit | gaussian | uniform.
    #[arg(long)]
    value_dist: Option<String>,
    /// Ensemble source: masks | identity (full-rank test hook).
    #[arg(long)]
    ensemble: Option<String>,
    /// Master seed of the run.
    #[arg(long)]
    seed: Option<u64>,
    /// TOML file whose keys mirror these flags; flags win.
    #[arg(long)]
    config: Option<std::path::PathBuf>,
    /// Also write the measurement ensemble to this path.
    #[arg(long)]
    export_ensemble: Option<std::path::PathBuf>,
}

#[derive(Debug, Args)]
struct CurveArgs {
    #[arg(long)]
    procedure: u8,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    /// Rounds to sweep: `start:end:step` (inclusive) or comma-separated.
    #[arg(long)]
    r_list: String,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    basis: Option<String>,
    #[arg(long)]
    theta_basis: Option<String>,
    #[arg(long, default_value = "centered")]
    mode: String,
    #[arg(long, default_value = "gaussian")]
    value_dist: String,
    #[arg(long, default_value = "10")]
    log_base: String,
    /// Output path of the curve export.
    #[arg(long)]
    out: std::path::PathBuf,
}

#[derive(Debug, Args)]
struct RipArgs {
    /// Use the n×n identity sensing matrix.
    #[arg(long)]
    identity: bool,
    /// Read the ensemble from a textual export.
    #[arg(long)]
    ensemble_file: Option<std::path::PathBuf>,
    /// Dimension for generated ensembles.
    #[arg(long)]
    n: Option<usize>,
    /// Rounds for generated mask ensembles.
    #[arg(long)]
    r: Option<usize>,
    #[arg(long, default_value = "centered")]
    mode: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scale mask rows by 1/√R.
    #[arg(long)]
    scaled: bool,
    /// Subset size K of the isometry constant.
    #[arg(long)]
    k: usize,
}

#[derive(Debug, Args)]
struct SubgaussArgs {
    /// Sample source: rademacher | gaussian | uniform | maskbits.
    #[arg(long)]
    source: String,
    /// Comma-separated increasing positive κ grid.
    #[arg(long)]
    grid: String,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn init_thread_pool() {
    if let Ok(v) = std::env::var("DENSEMEAS_THREADS") {
        if let Ok(threads) = v.parse::<usize>() {
            if threads > 0 {
                // Ignore failure: the pool may already be live in-process.
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems share the generic error status.
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    init_thread_pool();
    let outcome = match &cli.command {
        Command::Rounds(args) => commands::rounds(args, cli.json),
        Command::Run(args) => commands::run(args, cli.json),
        Command::Curve(args) => commands::curve(args, cli.json),
        Command::Rip(args) => commands::rip(args, cli.json),
        Command::Subgauss(args) => commands::subgauss(args, cli.json),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
