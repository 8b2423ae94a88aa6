use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dirmix::io::ColumnSelection;
use dirmix::sampler::AllocationMode;
use dirmix::simplex::{ValidationOptions, ZeroPolicy};
use dirmix::{Hyperparams, Result, SamplerConfig};

#[derive(Debug, Parser)]
#[command(name = "dirmix", version, about = "Bayesian clustering of compositional data with finite Dirichlet mixtures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run chains for a fixed number of clusters and write traces, summary and manifest.
    Fit(FitArgs),
    /// Fit a range of cluster counts and tabulate ICL, BIC and DIC5.
    Select(SelectArgs),
    /// Generate a synthetic data set with known labels.
    Simulate(SimulateArgs),
    /// Recompute the summary document from stored traces.
    Summarize(TraceArgs),
    /// Report scale reduction factors and acceptance rates of stored traces.
    Diagnose(TraceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ZeroPolicyArg {
    Reject,
    Epsilon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Gibbs,
    Metropolis,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Composition CSV with a header row.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Header of the id column, overriding detection.
    #[arg(long)]
    pub id_column: Option<String>,
    /// Comma-separated headers of the part columns, in model order.
    #[arg(long, value_delimiter = ',')]
    pub parts: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "reject")]
    pub zero_policy: ZeroPolicyArg,
    /// Replacement value for zeros under `--zero-policy epsilon`.
    #[arg(long, default_value_t = ZeroPolicy::DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// Rescale rows to unit sum instead of rejecting rows that do not sum to one.
    #[arg(long)]
    pub renormalize: bool,
}

impl InputArgs {
    pub fn validation(&self) -> ValidationOptions {
        ValidationOptions {
            zero_policy: match self.zero_policy {
                ZeroPolicyArg::Reject => ZeroPolicy::Reject,
                ZeroPolicyArg::Epsilon => ZeroPolicy::Epsilon(self.epsilon),
            },
            renormalize: self.renormalize,
        }
    }

    pub fn columns(&self) -> ColumnSelection {
        ColumnSelection {
            id_column: self.id_column.clone(),
            parts: self.parts.clone(),
        }
    }
}

#[derive(Debug, Args)]
pub struct SamplerArgs {
    #[arg(long, default_value_t = 5)]
    pub chains: usize,
    #[arg(long, default_value_t = 50_000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 10_000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 5)]
    pub thin: usize,
    /// Log-scale step of the alpha proposal.
    #[arg(long, default_value_t = SamplerConfig::DEFAULT_SIGMA_ALPHA)]
    pub sigma_alpha: f64,
    /// Proposal variance per unit of rho for the rho updates.
    #[arg(long, default_value_t = SamplerConfig::DEFAULT_P_VAR)]
    pub p_var: f64,
    #[arg(long, default_value_t = Hyperparams::default().delta)]
    pub delta: f64,
    #[arg(long, default_value_t = Hyperparams::default().gamma)]
    pub gamma: f64,
    #[arg(long, default_value_t = Hyperparams::default().phi)]
    pub phi: f64,
    #[arg(long, default_value_t = Hyperparams::default().lambda)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value = "gibbs")]
    pub allocation_mode: ModeArg,
    /// Master seed; drawn from system entropy when absent and recorded in the manifest.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl SamplerArgs {
    /// Builds a validated configuration and reports whether the seed came from entropy.
    pub fn config(&self, k: usize) -> Result<(SamplerConfig, bool)> {
        let (seed, from_entropy) = match self.seed {
            Some(s) => (s, false),
            None => (rand::random::<u64>(), true),
        };
        let cfg = SamplerConfig {
            sigma_alpha: self.sigma_alpha,
            p_var: self.p_var,
            hyper: Hyperparams {
                delta: self.delta,
                gamma: self.gamma,
                phi: self.phi,
                lambda: self.lambda,
            },
            allocation_mode: match self.allocation_mode {
                ModeArg::Gibbs => AllocationMode::Gibbs,
                ModeArg::Metropolis => AllocationMode::Metropolis,
            },
            ..SamplerConfig::new(k)
        }
        .with_schedule(self.iterations, self.burn_in, self.thin)
        .with_seed(seed);
        cfg.validate()?;
        if self.chains == 0 {
            return Err(dirmix::Error::Config("at least one chain is required".into()));
        }
        Ok((cfg, from_entropy))
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Number of mixture components.
    #[arg(long)]
    pub k: Option<usize>,
    /// One-based reference labels; the summary then scores the MAP partition.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Rerun exactly the fit recorded in this manifest; other model flags are ignored.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long, default_value_t = 1)]
    pub k_min: usize,
    #[arg(long)]
    pub k_max: usize,
    /// Output directory for the table and manifest; the table goes to standard output
    /// when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Built-in scenario: high2, moderate2, low2, high3, moderate3 or low3.
    #[arg(long, conflicts_with = "rho_file", required_unless_present = "rho_file")]
    pub scenario: Option<String>,
    /// CSV with one row of Dirichlet parameters per cluster.
    #[arg(long)]
    pub rho_file: Option<PathBuf>,
    /// Comma-separated cluster sizes; defaults to an even split of 50 for scenarios.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output directory for `data.csv` and `truth.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    /// A fit output directory or its `traces` subdirectory.
    #[arg(long)]
    pub trace_dir: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
