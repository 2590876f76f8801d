//! Command-line pipelines for fitting, applying and evaluating attribute erasers.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use salkit::{GuardedEncoding, KernelSpec, SalError};

pub mod bench;
pub mod eval;
pub mod fit;
pub mod synth;
pub mod transform;

/// Exit code for usage, contract, parse and I/O failures.
pub const EXIT_USAGE: i32 = 2;
/// Exit code for numeric failures (non-convergence, non-finite values).
pub const EXIT_NUMERIC: i32 = 3;

/// Kernel evaluation refuses more training samples than this unless raised.
pub const DEFAULT_KERNEL_CAP: usize = 20_000;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Sal(#[from] SalError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Sal(e) if e.is_numeric() => EXIT_NUMERIC,
            _ => EXIT_USAGE,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Sal(SalError::Io(e))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub(crate) fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Parser)]
#[command(
    name = "salkit",
    version,
    about = "Spectral attribute removal for vector representations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit an eraser on a labeled dataset and save it.
    Fit(fit::FitArgs),
    /// Apply a saved eraser to a dataset or embedding file.
    Transform(transform::TransformArgs),
    /// Measure leakage, task accuracy and fairness before and after removal.
    Eval(eval::EvalArgs),
    /// Time SAL and INLP fits on synthetic data.
    Bench(bench::BenchArgs),
    /// Write a synthetic dataset with a planted attribute signal.
    Synth(synth::SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Sal,
    Ksal,
    Inlp,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Sal => "sal",
            Method::Ksal => "ksal",
            Method::Inlp => "inlp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelFamily {
    Linear,
    Poly2,
    Rbf,
}

impl KernelFamily {
    pub fn spec(self, gamma: f64) -> Result<KernelSpec, SalError> {
        match self {
            KernelFamily::Linear => Ok(KernelSpec::Linear),
            KernelFamily::Poly2 => Ok(KernelSpec::Poly2),
            KernelFamily::Rbf => KernelSpec::rbf(gamma),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Encoding {
    /// ±1 column for binary attributes, centered one-hot otherwise.
    Auto,
    /// Uncentered one-hot indicators.
    Onehot,
}

impl From<Encoding> for GuardedEncoding {
    fn from(e: Encoding) -> Self {
        match e {
            Encoding::Auto => GuardedEncoding::Auto,
            Encoding::Onehot => GuardedEncoding::OneHot,
        }
    }
}

/// Hyperparameters shared by `fit` and `eval`.
#[derive(Debug, Clone, Args)]
pub struct FitOptions {
    /// Removal method.
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Singular-value ratio threshold for choosing k (SAL).
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    /// Number of directions to remove; overrides the alpha rule. Required for ksal.
    #[arg(long)]
    pub k: Option<usize>,
    /// Feature kernel for ksal.
    #[arg(long, value_enum, default_value_t = KernelFamily::Rbf)]
    pub kernel: KernelFamily,
    /// RBF bandwidth.
    #[arg(long, default_value_t = salkit::kernel::DEFAULT_GAMMA)]
    pub gamma: f64,
    /// Maximum INLP rounds.
    #[arg(long, default_value_t = 10)]
    pub iterations: usize,
    /// Encoding of the guarded attribute. Defaults to onehot for ksal, auto otherwise.
    #[arg(long, value_enum)]
    pub encoding: Option<Encoding>,
    /// Largest training set accepted by kernel methods.
    #[arg(long, default_value_t = DEFAULT_KERNEL_CAP)]
    pub kernel_cap: usize,
    #[command(flatten)]
    pub probe: ProbeOptions,
}

impl FitOptions {
    pub fn encoding_for(&self, method: Option<Method>) -> GuardedEncoding {
        match (self.encoding, method) {
            (Some(e), _) => e.into(),
            (None, Some(Method::Ksal)) => GuardedEncoding::OneHot,
            (None, _) => GuardedEncoding::Auto,
        }
    }

    pub fn kernel_spec(&self) -> CliResult<KernelSpec> {
        Ok(self.kernel.spec(self.gamma)?)
    }
}

#[derive(Debug, Clone, Copy, Args)]
pub struct ProbeOptions {
    /// Probe gradient-descent step size.
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    /// Probe training epochs.
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    /// Probe L2 penalty.
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
}

impl ProbeOptions {
    pub fn config(&self) -> salkit::ProbeConfig {
        salkit::ProbeConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            l2: self.l2,
        }
    }
}

pub(crate) fn check_kernel_cap(n: usize, cap: usize) -> CliResult<()> {
    if n > cap {
        return Err(usage(format!(
            "kernel methods are limited to {cap} training samples (got {n}); \
             kernels cost O(n^2) memory, raise --kernel-cap to override"
        )));
    }
    Ok(())
}

pub(crate) fn require_file(path: &Path, what: &str) -> CliResult<()> {
    if !path.is_file() {
        return Err(usage(format!("{what} '{}' does not exist", path.display())));
    }
    Ok(())
}

pub(crate) fn check_output(path: &Path, force: bool) -> CliResult<()> {
    if path.exists() && !force {
        return Err(usage(format!(
            "output '{}' already exists; pass --force to overwrite",
            path.display()
        )));
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        if !parent.is_dir() {
            return Err(usage(format!(
                "output directory '{}' does not exist",
                parent.display()
            )));
        }
    }
    Ok(())
}

/// Formats a value for a report cell, `NA` when absent.
pub(crate) fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| salkit::io::format_sig(x, 6))
}

pub(crate) fn display(p: &Path) -> String {
    p.display().to_string()
}

pub(crate) fn opt_path(p: &Option<PathBuf>) -> String {
    p.as_deref().map_or_else(|| "-".to_string(), display)
}

/// Sizes the global worker pool from `SALKIT_THREADS` when set.
pub fn init_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("SALKIT_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        usage(format!(
            "SALKIT_THREADS must be a positive integer, got '{raw}'"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| usage(format!("cannot size the thread pool: {e}")))
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit(a) => fit::run(&a),
        Command::Transform(a) => transform::run(&a),
        Command::Eval(a) => eval::run(&a),
        Command::Bench(a) => bench::run(&a),
        Command::Synth(a) => synth::run(&a),
    }
}
