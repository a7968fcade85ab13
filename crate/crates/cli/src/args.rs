//! Command-line arguments. Every subcommand's arguments are serializable so
//! a run can be replayed from its manifest.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "bayes-ergm", version, about = "Bayesian inference for exponential random graph models")]
pub struct Cli {
    /// Worker threads for data-parallel stages.
    #[arg(long, global = true, env = "BAYES_ERGM_THREADS")]
    pub threads: Option<usize>,

    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Re-run the command recorded in a manifest.
    #[arg(long, value_name = "FILE")]
    pub from_manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Clone, Debug, Subcommand, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Sample the posterior of a fully observed network.
    Fit(FitArgs),
    /// Sample the posterior with unobserved ties imputed.
    FitMissing(FitMissingArgs),
    /// Estimate the log evidence of a model.
    Evidence(EvidenceArgs),
    /// Bayes factors and posterior model probabilities from evidence files.
    Compare(CompareArgs),
    /// Posterior-predictive goodness of fit.
    Gof(GofArgs),
    /// Simulate networks at a fixed parameter.
    Simulate(SimulateArgs),
    /// Maximum pseudo-likelihood estimate.
    Mple(MpleArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Fit(_) => "fit",
            Command::FitMissing(_) => "fit-missing",
            Command::Evidence(_) => "evidence",
            Command::Compare(_) => "compare",
            Command::Gof(_) => "gof",
            Command::Simulate(_) => "simulate",
            Command::Mple(_) => "mple",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct NetworkArgs {
    /// Edge list: one pair per line.
    #[arg(long)]
    pub network: PathBuf,
    /// Node attribute table; its first column holds the node labels used by
    /// the edge list.
    #[arg(long)]
    pub attrs: Option<PathBuf>,
    #[arg(long)]
    pub directed: bool,
    /// Node count when no attribute table is given (default: largest index + 1).
    #[arg(long)]
    pub nodes: Option<usize>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    /// Model formula, e.g. `edges + nodematch("Office") + gwesp(0.5, fixed = TRUE)`.
    #[arg(long)]
    pub model: String,
    /// Comma-separated coefficients for offset terms, in formula order.
    #[arg(long, allow_hyphen_values = true)]
    pub offset_coef: Option<String>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct PriorArgs {
    /// Comma-separated prior mean (default: zeros).
    #[arg(long, allow_hyphen_values = true)]
    pub prior_mean: Option<String>,
    /// `diag:v`, `diag:v1,v2,...`, or a file holding the covariance matrix
    /// (default: `diag:100`).
    #[arg(long)]
    pub prior_sigma: Option<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    #[default]
    Sequential,
    Split,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Start {
    #[default]
    Mple,
    PriorMean,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ExchangeArgs {
    #[arg(long, default_value_t = 100)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 1000)]
    pub main_iters: usize,
    #[arg(long, default_value_t = 2500)]
    pub aux_iters: usize,
    /// Default: twice the number of free parameters.
    #[arg(long)]
    pub nchains: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    /// Proposal noise covariance, same forms as --prior-sigma (default: `diag:0.0025`).
    #[arg(long)]
    pub v_proposal: Option<String>,
    #[arg(long, value_enum, default_value_t = Schedule::Sequential)]
    pub schedule: Schedule,
    #[arg(long, value_enum, default_value_t = Start::Mple)]
    pub start: Start,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    #[default]
    Exchange,
    Mple,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct FitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub network: NetworkArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub exchange: ExchangeArgs,
    #[arg(long, value_enum, default_value_t = FitMethod::Exchange)]
    pub method: FitMethod,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Refresh {
    #[default]
    OnAccept,
    EveryIteration,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct FitMissingArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub network: NetworkArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub exchange: ExchangeArgs,
    /// Unobserved dyads, one pair per line.
    #[arg(long)]
    pub missing_file: Option<PathBuf>,
    /// Comma-separated nodes whose ties are all unobserved.
    #[arg(long)]
    pub missing_nodes: Option<String>,
    /// Imputed networks to keep.
    #[arg(long, default_value_t = 0)]
    pub n_imp: usize,
    /// Toggle proposals per imputation (default: number of unobserved dyads).
    #[arg(long)]
    pub missing_update: Option<usize>,
    #[arg(long, value_enum, default_value_t = Refresh::OnAccept)]
    pub refresh: Refresh,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvidenceMethodArg {
    Cj,
    Pp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum EstimateArg {
    #[value(name = "CD", alias = "cd")]
    #[serde(rename = "CD")]
    Cd,
    #[value(name = "MLE", alias = "mle")]
    #[serde(rename = "MLE")]
    Mle,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct EvidenceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub network: NetworkArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub prior: PriorArgs,
    #[arg(long, value_enum, default_value_t = EvidenceMethodArg::Cj)]
    pub method: EvidenceMethodArg,
    #[arg(long, default_value_t = 2500)]
    pub aux_iters: usize,
    #[arg(long, default_value_t = 50)]
    pub n_aux_draws: usize,
    #[arg(long, default_value_t = 50)]
    pub aux_thin: usize,
    #[arg(long, default_value_t = 200)]
    pub ladder: usize,
    #[arg(long, value_enum, default_value_t = EstimateArg::Cd)]
    pub estimate: EstimateArg,
    /// Simulated networks per Newton step of the likelihood-mode search.
    #[arg(long, default_value_t = 1000)]
    pub mle_draws: usize,
    /// Toggle proposals per contrastive-divergence run.
    #[arg(long, default_value_t = 100)]
    pub cd_steps: usize,
    /// Simulated networks for the likelihood curvature.
    #[arg(long, default_value_t = 1000)]
    pub curvature_draws: usize,
    #[arg(long, default_value_t = 1.5)]
    pub v_proposal: f64,
    /// Default: 1000 (cj) or 500 per rung (pp).
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Default: 10000 (cj) or 2000 per rung (pp).
    #[arg(long)]
    pub main_iters: Option<usize>,
    /// Trailing draws used by the ordinate estimate (default: half of main-iters).
    #[arg(long)]
    pub num_samples: Option<usize>,
    #[arg(long, default_value_t = 20)]
    pub rungs: usize,
    #[arg(long, default_value_t = 5.0)]
    pub pp_exponent: f64,
    /// Run power-posterior rungs concurrently, each started at the
    /// likelihood mode.
    #[arg(long)]
    pub parallel_rungs: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct CompareArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub evidence_files: Vec<PathBuf>,
    /// Comma-separated prior model probabilities (default: uniform).
    #[arg(long)]
    pub prior_probs: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GofStartArg {
    #[default]
    Observed,
    Empty,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct GofArgs {
    /// Posterior draws CSV written by `fit`, `fit-missing` or `evidence`.
    #[arg(long)]
    pub fit: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub network: NetworkArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 100)]
    pub sample_size: usize,
    #[arg(long, default_value_t = 10000)]
    pub aux_iters: usize,
    #[arg(long, default_value_t = 10)]
    pub n_deg: usize,
    #[arg(long, default_value_t = 10)]
    pub n_ideg: usize,
    #[arg(long, default_value_t = 10)]
    pub n_odeg: usize,
    #[arg(long, default_value_t = 10)]
    pub n_dist: usize,
    #[arg(long, default_value_t = 10)]
    pub n_esp: usize,
    #[arg(long, value_enum, default_value_t = GofStartArg::Observed)]
    pub start: GofStartArg,
    /// Also print a text summary of every bin.
    #[arg(long)]
    pub text: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Starting network; also supplies the node count.
    #[arg(long)]
    pub network: Option<PathBuf>,
    #[arg(long)]
    pub attrs: Option<PathBuf>,
    #[arg(long)]
    pub directed: bool,
    /// Node count when simulating without a starting network.
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Comma-separated parameter values for the free coordinates.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: String,
    /// Toggle proposals between successive draws.
    #[arg(long, default_value_t = 10000)]
    pub aux_iters: usize,
    #[arg(long, default_value_t = 1)]
    pub draws: usize,
    /// Start from the empty graph even when a network is given.
    #[arg(long)]
    pub from_empty: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct MpleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub network: NetworkArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}
