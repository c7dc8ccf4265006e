//! compriv: compress data matrices by seeded Gaussian projection and certify
//! the release with privacy bounds, PCA stability certificates, and Monte
//! Carlo audits.
//!
//! Exit codes: 0 success, 2 validation error, 3 numerical error, 4 audit
//! violation (an empirical bound was exceeded). Every exit-0 or exit-4 run
//! writes exactly one JSON report; reports are byte-identical across reruns
//! with the same seed and configuration except for the wall-time field.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "compriv", version, about, disable_help_subcommand = true)]
struct Cli {
    /// Worker threads for Monte Carlo loops; results are identical for any
    /// value.
    #[arg(long, global = true, env = "COMPRIV_THREADS", default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compress a normalized matrix, rejecting out-of-band draws.
    Sanitize(SanitizeArgs),
    /// Compute the privacy bound report for a database family.
    Bound(BoundArgs),
    /// Monte Carlo audit of every reported bound over a family.
    Audit(AuditArgs),
    /// PCA stability certificate for a compressed matrix.
    Pca(PcaArgs),
    /// Self-contained sign-matrix demo: neighbor, compression, certificates.
    BinaryDemo(BinaryDemoArgs),
}

#[derive(Args, Serialize)]
struct SanitizeArgs {
    /// Input matrix CSV (rows are records); columns must be normalized.
    #[arg(long)]
    input: PathBuf,
    /// Reference covariance CSV (p x p).
    #[arg(long)]
    reference: PathBuf,
    /// Compressed row count.
    #[arg(long)]
    m: usize,
    /// Master seed.
    #[arg(long)]
    seed: u64,
    /// Family-wide covariance slack added to the acceptance radius.
    #[arg(long, default_value_t = 0.0)]
    delta_max: f64,
    /// Acceptance constant override; defaults to sqrt(2 (C1 + C2)).
    #[arg(long)]
    c: Option<f64>,
    /// Rejection-loop cap.
    #[arg(long, default_value_t = 1000)]
    max_retries: usize,
    /// Skip one header line in input CSVs.
    #[arg(long, default_value_t = false)]
    header: bool,
    /// Compressed matrix CSV destination.
    #[arg(long)]
    output: PathBuf,
    /// JSON report destination.
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args, Serialize)]
struct BoundArgs {
    /// Family manifest JSON.
    #[arg(long)]
    family: PathBuf,
    /// Compressed row count the bound is evaluated at.
    #[arg(long)]
    m: usize,
    /// Acceptance constant override.
    #[arg(long)]
    c: Option<f64>,
    /// JSON report destination.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct AuditArgs {
    /// Family manifest JSON.
    #[arg(long)]
    family: PathBuf,
    /// Compressed row count.
    #[arg(long)]
    m: usize,
    /// Monte Carlo trials per audited block.
    #[arg(long)]
    trials: u64,
    /// Master seed.
    #[arg(long)]
    seed: u64,
    /// Acceptance constant override.
    #[arg(long)]
    c: Option<f64>,
    /// Override the family-wide covariance slack.
    #[arg(long)]
    delta_max: Option<f64>,
    /// JSON report destination.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct PcaArgs {
    /// Original matrix CSV.
    #[arg(long)]
    input: PathBuf,
    /// Compressed matrix CSV.
    #[arg(long)]
    compressed: PathBuf,
    /// Subspace dimension.
    #[arg(long)]
    d: usize,
    /// Compressed row count (validated against the compressed CSV).
    #[arg(long)]
    m: usize,
    /// Family-wide covariance slack used when the matrix was compressed.
    #[arg(long)]
    delta_max: f64,
    /// Acceptance constant override.
    #[arg(long)]
    c: Option<f64>,
    /// Skip one header line in input CSVs.
    #[arg(long, default_value_t = false)]
    header: bool,
    /// JSON report destination.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct BinaryDemoArgs {
    /// Record count of the generated sign matrix.
    #[arg(long)]
    n: usize,
    /// Attribute count.
    #[arg(long)]
    p: usize,
    /// Number of sign flips in the perturbed row.
    #[arg(long)]
    k: usize,
    /// Compressed row count.
    #[arg(long)]
    m: usize,
    /// Master seed.
    #[arg(long)]
    seed: u64,
    /// Acceptance constant override.
    #[arg(long)]
    c: Option<f64>,
    /// Subspace dimension for the utility certificate.
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Row receiving the sign flips.
    #[arg(long, default_value_t = 0)]
    row: usize,
    /// JSON report destination.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct Provenance<C: Serialize> {
    tool_version: &'static str,
    seed: Option<u64>,
    config: C,
    wall_time_ms: f64,
}

#[derive(Serialize)]
struct Report<C: Serialize, T: Serialize> {
    schema: &'static str,
    command: &'static str,
    provenance: Provenance<C>,
    result: T,
}

fn write_report<C: Serialize, T: Serialize>(
    path: &PathBuf,
    command: &'static str,
    seed: Option<u64>,
    config: C,
    started: Instant,
    result: T,
) -> compriv_core::Result<()> {
    let report = Report {
        schema: "compriv/1",
        command,
        provenance: Provenance {
            tool_version: env!("CARGO_PKG_VERSION"),
            seed,
            config,
            wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
        },
        result,
    };
    let mut text = serde_json::to_string_pretty(&report).expect("report types serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| compriv_core::Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(2);
    }
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: failed to build the thread pool: {e}");
            return ExitCode::from(2);
        }
    };
    let started = Instant::now();
    let outcome = pool.install(|| match cli.command {
        Command::Sanitize(args) => commands::sanitize(args, started),
        Command::Bound(args) => commands::bound(args, started),
        Command::Audit(args) => commands::audit(args, started),
        Command::Pca(args) => commands::pca(args, started),
        Command::BinaryDemo(args) => commands::binary_demo(args, started),
    });
    match outcome {
        Ok(commands::Outcome::Clean) => ExitCode::SUCCESS,
        Ok(commands::Outcome::AuditViolation) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
