//! `catoni`: robust mean and regression estimates on CSV data, influence
//! validation and seeded simulation runs.

mod commands;
mod data;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "catoni", version, about = "Catoni-type robust estimators for heavy-tailed data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Robust location estimate of one CSV column with a normal-approximation interval.
    Estimate(EstimateArgs),
    /// Robust linear regression with Gram and radius diagnostics.
    Regress(RegressArgs),
    /// Run one experiment config; writes report.csv and provenance.jsonl.
    Simulate(SimulateArgs),
    /// Check an influence function against the logarithmic envelope on a grid.
    ValidatePhi(ValidatePhiArgs),
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    /// Headered CSV file.
    #[arg(long)]
    pub input: PathBuf,
    /// Column to estimate the location of.
    #[arg(long)]
    pub column: String,
    /// Explicit scale parameter alpha of the estimating equation.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Tuning a_n; alpha = a_n / sigma (default a_n = n^-1/2).
    #[arg(long = "a-n")]
    pub a_n: Option<f64>,
    /// Use alpha = a_n / sigma_hat with the sample standard deviation (n - 1 denominator).
    #[arg(long)]
    pub self_normalized: bool,
    /// Known standard deviation; used for alpha and for the interval.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Influence function: wide, narrow or custom:<path to x,phi table>.
    #[arg(long, default_value = "wide")]
    pub phi: String,
    /// Interval confidence level in (0, 1).
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Widen the interval by the bias allowance alpha sigma^2 / sqrt(1 - alpha^2 sigma^2).
    #[arg(long)]
    pub bias_corrected: bool,
    /// Root tolerance: the reported bracket has width at most 2 tol.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Args, Debug)]
pub struct RegressArgs {
    /// Headered CSV file.
    #[arg(long)]
    pub input: PathBuf,
    /// Response column.
    #[arg(long)]
    pub response: String,
    /// Comma-separated feature columns (default: every other column).
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    /// Prepend a column of ones.
    #[arg(long)]
    pub intercept: bool,
    /// Explicit alpha.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Failure probability for the automatic alpha = sqrt(2 log(1/epsilon) / (n sigma_bar^2)) (default 0.1).
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Noise variance sigma_bar^2 for the automatic alpha and the radius (default: least-squares residual variance).
    #[arg(long)]
    pub sigma_bar_sq: Option<f64>,
    /// Influence function: wide or narrow (regression needs a derivative).
    #[arg(long, default_value = "wide")]
    pub phi: String,
    /// Newton stopping tolerance on ||h||_2.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Experiment config (flat TOML, one experiment).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (0 = all cores); never changes the output bytes.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Args, Debug)]
pub struct ValidatePhiArgs {
    /// Influence function: wide, narrow or custom:<path to x,phi table>.
    #[arg(long)]
    pub phi: String,
    /// Grid start.
    #[arg(long, default_value_t = -50.0, allow_negative_numbers = true)]
    pub lo: f64,
    /// Grid end.
    #[arg(long, default_value_t = 50.0, allow_negative_numbers = true)]
    pub hi: f64,
    /// Grid spacing.
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Estimate(a) => commands::estimate(&a),
        Command::Regress(a) => commands::regress(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::ValidatePhi(a) => commands::validate_phi(&a),
    };
    match result {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            print!("{}", f.partial);
            eprintln!("catoni: {}", f.error);
            ExitCode::from(f.error.code() as u8)
        }
    }
}
