//! Command-line surface. Every subcommand accepts the same flag set so a run
//! manifest can echo one flat configuration record.

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

pub const SEED_ENV: &str = "GRAVNET_SEED";

#[derive(Debug, Parser)]
#[command(name = "gravnet", version, about = "Grassmannian averaging experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset directory.
    Gen(ExperimentConfig),
    /// Centralized averaging (rgrav or power) on a dataset.
    Avg(ExperimentConfig),
    /// Decentralized averaging (drgrav or deepca) over a simulated network.
    Dravg(ExperimentConfig),
    /// Grassmannian K-means on a labelled dataset.
    Kmeans(ExperimentConfig),
    /// Tabulate the filter polynomials on [0, 1] as CSV.
    ChebDump(ExperimentConfig),
}

impl Command {
    pub fn into_parts(self) -> (Mode, ExperimentConfig) {
        match self {
            Command::Gen(c) => (Mode::Gen, c),
            Command::Avg(c) => (Mode::Avg, c),
            Command::Dravg(c) => (Mode::Dravg, c),
            Command::Kmeans(c) => (Mode::Kmeans, c),
            Command::ChebDump(c) => (Mode::ChebDump, c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Gen,
    Avg,
    Dravg,
    Kmeans,
    ChebDump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum VariantArg {
    Finite,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AlgoArg {
    Rgrav,
    Power,
    Drgrav,
    Deepca,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AveragingArg {
    Rgrav,
    Power,
    Frechet,
    Flag,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Ambient dimension.
    #[arg(long, default_value_t = 150)]
    pub n: usize,
    /// Subspace dimension.
    #[arg(long, default_value_t = 30)]
    pub k: usize,
    /// Number of subspaces (agents in decentralized runs).
    #[arg(long, default_value_t = 64)]
    pub m: usize,
    /// Cluster spread of generated data.
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
    pub sigma: f64,
    /// Filter stop-band edge; defaults to 0.15, or the clustering constant for kmeans.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// hypercube, cycle, complete, or custom:<edge-file>.
    #[arg(long, default_value = "hypercube")]
    pub topology: String,
    /// Consensus rounds per iteration; defaults by topology.
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long, value_enum, default_value_t = VariantArg::Asymptotic)]
    pub variant: VariantArg,
    /// rgrav/power for avg, drgrav/deepca for dravg.
    #[arg(long, value_enum)]
    pub algo: Option<AlgoArg>,
    /// Horizon of the finite variant; also the filter degree for cheb-dump.
    #[arg(long = "T")]
    pub horizon: Option<usize>,
    /// Iteration whose partial filter cheb-dump tabulates; defaults to T.
    #[arg(long = "t")]
    pub step: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    /// Stopping tolerance: squared chordal change between iterates for
    /// avg/dravg (default 1e-14), center movement for kmeans (default 1e-6).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Orthonormalize every this many iterations; 0 disables it.
    #[arg(long, default_value_t = 1)]
    pub ortho_every: usize,
    /// Planted clusters for gen; cluster count for kmeans (defaults to the label count).
    #[arg(long)]
    pub clusters: Option<usize>,
    /// Averaging routine used by kmeans.
    #[arg(long, value_enum, default_value_t = AveragingArg::Rgrav)]
    pub averaging: AveragingArg,
    /// Overridden by the GRAVNET_SEED environment variable when set.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Applies the seed override from the environment.
    pub fn apply_seed_env(&mut self, value: Option<String>) -> anyhow::Result<bool> {
        match value {
            None => Ok(false),
            Some(v) => {
                self.seed = v
                    .trim()
                    .parse()
                    .map_err(|_| anyhow::anyhow!("{SEED_ENV}={v:?} is not an unsigned integer"))?;
                Ok(true)
            }
        }
    }

    pub fn input_dir(&self) -> anyhow::Result<&PathBuf> {
        self.input.as_ref().ok_or_else(|| anyhow::anyhow!("--in <dataset dir> is required"))
    }

    pub fn output_dir(&self) -> anyhow::Result<&PathBuf> {
        self.out.as_ref().ok_or_else(|| anyhow::anyhow!("--out <dir> is required"))
    }
}
