//! The `ccc` command-line tool.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input or usage,
//! 3 numerical failure (degenerate variance, singularity, non-convergence).

mod commands;
pub mod input;
pub mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::loss::Variant;
use crate::permutation::Objective;
use input::{Column, Format, InputSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::Core(_) | CliError::Input(_) => EXIT_INPUT,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ccc", version, about = "Concordance correlation coefficient versus MSE-family error metrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Input file, `-` for standard input.
    #[arg(long, default_value = "-")]
    pub input: String,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// First non-comment row holds column names.
    #[arg(long)]
    pub header: bool,
    /// Gold-standard column (0-based index or header name).
    #[arg(long, default_value = "0")]
    pub gold_col: Column,
}

impl InputArgs {
    fn spec(&self) -> InputSpec {
        InputSpec {
            path: self.input.clone(),
            format: self.format,
            header: self.header,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Emit the report as JSON.
    #[arg(long)]
    pub json: bool,
    /// Write the command's table as CSV to this path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    Max,
    Min,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Max => Objective::Max,
            ObjectiveArg::Min => Objective::Min,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Ratio,
    RatioPow,
    GeneralRatio,
    Diff,
    DiffPow,
    GeneralDiff,
    AbsMseOverCov,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Ratio => Variant::Ratio,
            VariantArg::RatioPow => Variant::RatioPow,
            VariantArg::GeneralRatio => Variant::GeneralRatio,
            VariantArg::Diff => Variant::Diff,
            VariantArg::DiffPow => Variant::DiffPow,
            VariantArg::GeneralDiff => Variant::GeneralDiff,
            VariantArg::AbsMseOverCov => Variant::AbsMseOverCov,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegionKind {
    Mse,
    Lk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleKind {
    Permutation,
    MseSphere,
    LkSphere,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pairwise statistics, with ρc computed directly and from (MSE, σ_XY).
    Analyze {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = "1")]
        pred_col: Column,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Extreme ρc at a fixed MSE and the error vectors attaining them.
    BoundsMse {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        mse: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// ρc envelope at a fixed L_k error norm over a θ grid.
    BoundsLk {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        k: f64,
        #[arg(long)]
        lk: f64,
        #[arg(long, default_value_t = 9)]
        theta_steps: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Orderings of an error multiset that maximize and minimize ρc.
    Permute {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = "1")]
        error_col: Column,
        /// Also enumerate every ordering (N ≤ 9).
        #[arg(long)]
        audit: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Numerical ρc extremum at a fixed L_k norm, k even.
    SolveEvenP {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        lk: f64,
        #[arg(long, value_enum, default_value_t = ObjectiveArg::Max)]
        objective: ObjectiveArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = crate::even_p::DEFAULT_RESTARTS)]
        restarts: usize,
        #[arg(long, default_value_t = 20_000)]
        max_iters: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Loss value and gradient, optionally with a gradient-descent trace.
    Loss {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = "1")]
        pred_col: Column,
        #[arg(long, value_enum)]
        variant: VariantArg,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        beta: u32,
        /// Per-sample α_j column (general variants).
        #[arg(long)]
        alpha_col: Option<Column>,
        /// Per-sample ε_j column (general variants).
        #[arg(long)]
        eps_col: Option<Column>,
        /// Per-sample β_j column (general variants).
        #[arg(long)]
        beta_col: Option<Column>,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        /// Run this many descent steps from the prediction column.
        #[arg(long)]
        iters: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Plot data for the ρc envelopes as CSV.
    Region {
        #[arg(long, value_enum)]
        kind: RegionKind,
        #[arg(long, default_value_t = 3.0)]
        x_max: f64,
        #[arg(long, default_value_t = 61)]
        steps: usize,
        #[arg(long)]
        k: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        sigma_g: f64,
        #[arg(long, default_value_t = 9)]
        theta_steps: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Brute-force and sampling checks of the closed forms.
    Audit {
        #[arg(long, value_enum)]
        oracle: OracleKind,
        /// Input file; without it a random instance is drawn from the seed.
        #[arg(long)]
        input: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        header: bool,
        #[arg(long, default_value = "0")]
        gold_col: Column,
        #[arg(long, default_value = "1")]
        error_col: Column,
        /// Size of the random instance.
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        /// MSE of the sphere (default σ_G²).
        #[arg(long)]
        mse: Option<f64>,
        #[arg(long, default_value_t = 4.0)]
        k: f64,
        /// L_k of the sphere (default √N·σ_G).
        #[arg(long)]
        lk: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return EXIT_INPUT;
            }
            let _ = write!(stdout, "{}", e.render());
            return EXIT_OK;
        }
    };
    let echo: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match commands::execute(cli.command, echo, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
