//! Bayesian inference for exponential random graph models.
//!
//! Posterior sampling uses the exchange algorithm with a population of
//! chains; model evidence is estimated on an adjusted pseudo-likelihood.

pub mod adjust;
pub mod error;
pub mod evidence;
pub mod exchange;
pub mod gof;
pub mod graph;
pub mod linalg;
pub mod model;
pub mod par;
pub mod posterior;
pub mod prior;
pub mod pseudo;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
pub use graph::{Attribute, Dyad, Graph};
pub use model::{parse_formula, validate, Model, ModelSpec};
pub use par::Execution;
pub use prior::GaussianPrior;
pub use pseudo::{log_pl, mple, PseudoFit};
pub use exchange::{exchange_fit, exchange_fit_missing, ExchangeSettings};
pub use posterior::{summarize, PosteriorSample, SummaryTable};
pub use adjust::{build_apl, AdjustedPseudoLikelihood, AplSettings, Estimate};
pub use evidence::{compare, evidence_cj, evidence_pp, CjSettings, EvidenceEstimate, PpSettings};
pub use gof::{bgof, GofReport, GofSettings};
