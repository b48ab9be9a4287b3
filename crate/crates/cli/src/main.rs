//! `smoothent` command-line front end.
//!
//! Exit status: 0 when every asserted inequality holds, 2 when one is
//! violated (offending rows go to stderr), 1 on bad input.

mod commands;
mod grid;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::output::Report;

#[derive(Debug, Parser)]
#[command(
    name = "smoothent",
    version,
    about = "Exact smooth entropies and bound verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Where the joint distribution comes from.
#[derive(Debug, Args)]
pub struct SourceArgs {
    /// Joint distribution JSON file.
    #[arg(long)]
    pub dist: Option<PathBuf>,
    /// Alphabet size of the tightness family (used when --dist is absent).
    #[arg(long)]
    pub alphabet: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Above,
    Below,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TailMethod {
    Exact,
    Mc,
    /// Exact when the spectrum fits, Monte Carlo otherwise.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TightnessCheck {
    /// Smooth-entropy check where its preconditions hold, tail check otherwise.
    Auto,
    Tail,
    Entropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AppendixPart {
    /// The r_t inequalities.
    Rt,
    /// The binomial and Stirling estimates.
    Binomial,
    All,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Smooth min- and max-entropies of the n-fold product.
    Entropy {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, default_value = "1")]
        n: String,
        #[arg(long, default_value = "0")]
        epsilon: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Closed-form concentration bounds, with exact values when a
    /// distribution is given and its spectrum is tractable.
    Bounds {
        /// Joint distribution JSON file; without it only closed forms are reported.
        #[arg(long)]
        dist: Option<PathBuf>,
        /// |X| for the closed forms when --dist is absent.
        #[arg(long)]
        alphabet: Option<usize>,
        #[arg(long)]
        n: String,
        #[arg(long)]
        delta: String,
        /// MGF used inside the Chernoff optimisation.
        #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
        mode: ModeArg,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Surprisal tail probabilities at H ± nδ, exactly or by Monte Carlo.
    Tail {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        n: String,
        #[arg(long)]
        delta: String,
        #[arg(long, value_enum, default_value_t = SideArg::Both)]
        side: SideArg,
        #[arg(long, value_enum, default_value_t = TailMethod::Auto)]
        method: TailMethod,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        master_seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Lower bounds on tails and smooth-entropy deviations for the tightness family.
    Tightness {
        #[arg(long)]
        alphabet: String,
        #[arg(long)]
        n: String,
        #[arg(long)]
        delta: String,
        #[arg(long, value_enum, default_value_t = TightnessCheck::Auto)]
        check: TightnessCheck,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Typical-set codec against the max-entropy length limits.
    Codec {
        #[command(flatten)]
        op: OperationalArgs,
    },
    /// Toeplitz-hash extraction at the min-entropy target length.
    Extract {
        #[command(flatten)]
        op: OperationalArgs,
    },
    /// Grid checks of the auxiliary analytic inequalities.
    Appendix {
        #[arg(long, value_enum, default_value_t = AppendixPart::All)]
        part: AppendixPart,
        #[arg(long, default_value_t = 10_000)]
        stirling_max_n: u64,
        #[arg(long, default_value_t = 1000)]
        sandwich_max_n: u64,
        #[arg(long, default_value_t = 2000)]
        window_max_n: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Plot-ready CSV of exact quantities against the closed forms over an n × δ grid.
    Sweep {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        n: String,
        #[arg(long)]
        delta: String,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct OperationalArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Block length; the n-fold product is expanded explicitly.
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long)]
    pub epsilon: String,
    #[arg(long, default_value = "0")]
    pub epsilon_prime: String,
    #[arg(long, default_value_t = 0)]
    pub master_seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("SMOOTHENT_THREADS") {
        let threads: usize = v.trim().parse().map_err(|_| {
            anyhow::anyhow!("SMOOTHENT_THREADS must be a positive integer, got {v:?}")
        })?;
        if threads == 0 {
            anyhow::bail!("SMOOTHENT_THREADS must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<(Report, Option<PathBuf>)> {
    configure_threads()?;
    Ok(match cli.command {
        Command::Entropy {
            source,
            n,
            epsilon,
            output,
        } => (
            commands::entropy(&source, &n, &epsilon, output.format)?,
            output.out,
        ),
        Command::Bounds {
            dist,
            alphabet,
            n,
            delta,
            mode,
            output,
        } => (
            commands::bounds(dist.as_deref(), alphabet, &n, &delta, mode, output.format)?,
            output.out,
        ),
        Command::Tail {
            source,
            n,
            delta,
            side,
            method,
            trials,
            master_seed,
            output,
        } => (
            commands::tail(
                &source,
                &n,
                &delta,
                side,
                method,
                trials,
                master_seed,
                output.format,
            )?,
            output.out,
        ),
        Command::Tightness {
            alphabet,
            n,
            delta,
            check,
            output,
        } => (
            commands::tightness(&alphabet, &n, &delta, check, output.format)?,
            output.out,
        ),
        Command::Codec { op } => (commands::codec(&op)?, op.output.out),
        Command::Extract { op } => (commands::extract(&op)?, op.output.out),
        Command::Appendix {
            part,
            stirling_max_n,
            sandwich_max_n,
            window_max_n,
            output,
        } => {
            let grid = smoothent::binom::BinomialGrid {
                stirling_max_n,
                sandwich_max_n,
                window_max_n,
            };
            (commands::appendix(part, &grid, output.format)?, output.out)
        }
        Command::Sweep {
            source,
            n,
            delta,
            out,
        } => (commands::sweep(&source, &n, &delta)?, out),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli).and_then(|(report, out)| report.emit(out.as_deref()).map(|()| report)) {
        Ok(report) if report.violations.is_empty() => ExitCode::SUCCESS,
        Ok(report) => {
            for line in &report.violations {
                eprintln!("violation: {line}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
