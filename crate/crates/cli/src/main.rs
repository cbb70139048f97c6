//! `depreg`: data generation, HSIC testing, training, evaluation and
//! experiment reproduction.
//!
//! Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage error.
//! Machine-readable results go to stdout, logs to stderr.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use depreg::experiments::Experiment;
use depreg::Metric;

#[derive(Parser)]
#[command(name = "depreg", version, about = "Knowledge-based dependence regularization for generative models")]
struct Cli {
    /// Log verbosity on stderr (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetArg {
    Toy,
    Ccmnist,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    OutLayer,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Valid,
    Test,
}

#[derive(Subcommand)]
enum Command {
    /// Write a dataset cache and its canonical knowledge file.
    GenData {
        #[arg(long, value_enum)]
        dataset: DatasetArg,
        /// Directory holding the four MNIST IDX files.
        #[arg(long, required_if_eq("dataset", "ccmnist"))]
        mnist_dir: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Train, valid and test sizes.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
    /// Relative-dependence test of HSIC(ref, plus) > HSIC(ref, minus).
    HsicTest {
        /// CSV file with a header row.
        #[arg(long)]
        data: PathBuf,
        /// 1-based column indices, comma separated.
        #[arg(long = "ref", value_delimiter = ',', required = true)]
        reference: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        plus: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        minus: Vec<usize>,
        /// Rows drawn without replacement; all rows when larger than the file.
        #[arg(long, default_value_t = 128)]
        m: usize,
        /// Bootstrap resamples for the variance estimate.
        #[arg(long, default_value_t = 500)]
        boot: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        unbiased: bool,
    },
    /// Train one model from a JSON run configuration.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Force λ = 0 (the L2-only baseline).
        #[arg(long, conflicts_with = "baseline")]
        no_reg: bool,
        /// Replace the knowledge penalty by a baseline.
        #[arg(long, value_enum)]
        baseline: Option<BaselineArg>,
    },
    /// Evaluate a checkpoint on a cached dataset.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Cache directory written by gen-data.
        #[arg(long)]
        data: PathBuf,
        /// recon_error, cross_entropy or neg_elbo.
        #[arg(long)]
        metric: Metric,
        /// Dataset name inside the directory; inferred when there is only one.
        #[arg(long)]
        name: Option<String>,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        /// Noise seed for neg_elbo; defaults to the training seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a multi-seed experiment and write its result tables.
    Reproduce {
        /// toy-vae, ccmnist-vae, toy-gan or knowledge-size.
        #[arg(long)]
        experiment: Experiment,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed_base: u64,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        mnist_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(commands::CliError::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
