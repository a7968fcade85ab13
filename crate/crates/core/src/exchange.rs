//! Approximate exchange algorithm with a population of chains and
//! adaptive-direction proposals, plus the missing-tie variant.

use log::warn;
use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg;
use crate::model::Model;
use crate::par::{self, Execution};
use crate::posterior::PosteriorSample;
use crate::prior::GaussianPrior;
use crate::pseudo;
use crate::rng::{stream, Domain, StreamRng};
use crate::sampler::{simulate_constrained, TieSampler};

/// Order in which chains are updated within one iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainSchedule {
    /// Chains in index order, each proposal seeing the chains already moved.
    #[default]
    Sequential,
    /// Two halves in turn; chains of one half move concurrently, drawing
    /// their directions from the other half.
    Split,
}

/// When the shared imputed network is redrawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImputationRefresh {
    /// After an iteration with at least one accepted swap, at the parameter
    /// of a randomly chosen accepting chain.
    #[default]
    OnAccept,
    /// Every iteration, at the parameter of a randomly chosen chain.
    EveryIteration,
}

/// Where chains start.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartPoint {
    /// Pseudo-likelihood estimate, falling back to the prior mean when it
    /// does not exist.
    #[default]
    Mple,
    PriorMean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExchangeSettings {
    pub burn_in: usize,
    pub main_iters: usize,
    pub aux_iters: usize,
    /// Defaults to twice the number of free parameters (at least 4).
    pub nchains: Option<usize>,
    pub gamma: f64,
    /// Proposal noise covariance; defaults to `0.0025 · I`.
    pub v_proposal: Option<Vec<Vec<f64>>>,
    pub n_imp: usize,
    /// Toggle proposals per imputation; defaults to the masked-dyad count.
    pub missing_update: Option<usize>,
    pub seed: u64,
    pub start: StartPoint,
    /// Half-width of the uniform jitter added to each chain's start.
    pub start_jitter: f64,
    pub schedule: ChainSchedule,
    pub imputation_refresh: ImputationRefresh,
    pub execution: Execution,
}

impl Default for ExchangeSettings {
    fn default() -> Self {
        ExchangeSettings {
            burn_in: 100,
            main_iters: 1000,
            aux_iters: 2500,
            nchains: None,
            gamma: 0.5,
            v_proposal: None,
            n_imp: 0,
            missing_update: None,
            seed: 0,
            start: StartPoint::Mple,
            start_jitter: 0.1,
            schedule: ChainSchedule::Sequential,
            imputation_refresh: ImputationRefresh::OnAccept,
            execution: Execution::Parallel,
        }
    }
}

pub const DEFAULT_PROPOSAL_VARIANCE: f64 = 0.0025;

impl ExchangeSettings {
    pub fn resolved_nchains(&self, d: usize) -> usize {
        self.nchains.unwrap_or((2 * d).max(4))
    }

    pub fn proposal_matrix(&self, d: usize) -> Result<DMatrix<f64>> {
        match &self.v_proposal {
            None => Ok(DMatrix::identity(d, d) * DEFAULT_PROPOSAL_VARIANCE),
            Some(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(Error::DimensionMismatch {
                        what: "proposal covariance".into(),
                        expected: d,
                        got: rows.len(),
                    });
                }
                Ok(DMatrix::from_fn(d, d, |a, b| rows[a][b]))
            }
        }
    }
}

/// Lower factor `L` with `L Lᵀ = V`; `V` may be singular (e.g. zero).
pub fn proposal_factor(v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !linalg::is_symmetric(v, 1e-12) || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NotPositiveDefinite("proposal covariance".into()));
    }
    if v.iter().all(|&x| x == 0.0) {
        return Ok(v.clone());
    }
    let eig = nalgebra::SymmetricEigen::new(v.clone());
    if eig.eigenvalues.iter().any(|&l| l < -1e-12) {
        return Err(Error::NotPositiveDefinite("proposal covariance".into()));
    }
    match nalgebra::Cholesky::new(v.clone()) {
        Some(c) => Ok(c.l()),
        None => {
            let sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
            Ok(&eig.eigenvectors * sqrt)
        }
    }
}

fn propose_from<R: Rng + ?Sized>(
    states: &[Vec<f64>],
    h: usize,
    pool: &[usize],
    gamma: f64,
    v_lower: &DMatrix<f64>,
    rng: &mut R,
) -> Vec<f64> {
    let pick = sample_indices(rng, pool.len(), 2);
    let (h1, h2) = (pool[pick.index(0)], pool[pick.index(1)]);
    let eps = linalg::correlated_normal(v_lower, rng);
    states[h]
        .iter()
        .enumerate()
        .map(|(k, &x)| x + gamma * (states[h1][k] - states[h2][k]) + eps[k])
        .collect()
}

/// Adaptive-direction proposal for chain `h`: `θ_h + γ(θ_h1 − θ_h2) + ε`
/// with `h1 ≠ h2` drawn uniformly from the other chains and
/// `ε ~ N(0, L Lᵀ)`.
pub fn ads_propose<R: Rng + ?Sized>(
    states: &[Vec<f64>],
    h: usize,
    gamma: f64,
    v_lower: &DMatrix<f64>,
    rng: &mut R,
) -> Vec<f64> {
    assert!(states.len() >= 3, "adaptive direction proposals need at least three chains");
    let pool: Vec<usize> = (0..states.len()).filter(|&k| k != h).collect();
    propose_from(states, h, &pool, gamma, v_lower, rng)
}

struct Chain {
    theta: Vec<f64>,
    log_prior: f64,
    rng: StreamRng,
    aux: Graph,
    accepted: u64,
    proposals: u64,
    accepted_now: bool,
}

struct Context<'a> {
    model: &'a Model,
    prior: &'a GaussianPrior,
    free: Vec<usize>,
    gamma: f64,
    v_lower: DMatrix<f64>,
    aux_iters: usize,
}

impl Context<'_> {
    /// One exchange move of `chain` from the proposal `proposal`, with the
    /// auxiliary network started at `base`.
    fn exchange_move(&self, chain: &mut Chain, proposal: Vec<f64>, base: &Graph, count: bool) -> Result<()> {
        chain.accepted_now = false;
        let log_prior = self.prior.log_density(&proposal);
        let full = self.model.full_theta(&proposal);
        let mut sampler = TieSampler::new(self.model, &full)?;
        chain.aux.copy_state_from(base);
        sampler.run(&mut chain.aux, self.aux_iters, &mut chain.rng);
        let delta = sampler.delta();
        let mut log_alpha = log_prior - chain.log_prior;
        for (a, &k) in self.free.iter().enumerate() {
            log_alpha += (chain.theta[a] - proposal[a]) * delta[k];
        }
        let u: f64 = chain.rng.gen();
        if count {
            chain.proposals += 1;
        }
        if log_alpha.is_finite() && u.ln() < log_alpha {
            chain.theta = proposal;
            chain.log_prior = log_prior;
            chain.accepted_now = true;
            if count {
                chain.accepted += 1;
            }
        }
        Ok(())
    }
}

struct Missing {
    updates: usize,
    refresh: ImputationRefresh,
    rng: StreamRng,
    keep_at: Vec<usize>,
}

/// Posterior sample for a fully observed network.
pub fn exchange_fit(
    model: &Model,
    g: &Graph,
    prior: &GaussianPrior,
    settings: &ExchangeSettings,
) -> Result<PosteriorSample> {
    if g.has_missing() {
        return Err(Error::HasMissingDyads(g.missing_count()));
    }
    let mut base = g.clone();
    run(model, &mut base, prior, settings, None)
}

/// Posterior sample with the unobserved ties of `g` imputed as part of the
/// chain. Up to `n_imp` imputed networks, spread over the main iterations,
/// are returned with the sample.
pub fn exchange_fit_missing(
    model: &Model,
    g: &Graph,
    prior: &GaussianPrior,
    settings: &ExchangeSettings,
) -> Result<PosteriorSample> {
    if !g.has_missing() {
        return Err(Error::NoMissingDyads);
    }
    let density = g.density()?;
    let mut rng = stream(settings.seed, Domain::Imputation, 0);
    let mut y_star = g.clone();
    for d in g.missing_dyads() {
        let present = rng.gen::<f64>() < density;
        y_star.set_edge(d.i, d.j, present);
    }
    let keep_at = imputation_schedule(settings.main_iters, settings.n_imp);
    let missing = Missing {
        updates: settings.missing_update.unwrap_or(g.missing_count()),
        refresh: settings.imputation_refresh,
        rng,
        keep_at,
    };
    run(model, &mut y_star, prior, settings, Some(missing))
}

/// Main-iteration indices at which imputed networks are kept, spread as far
/// apart as possible.
pub fn imputation_schedule(main_iters: usize, n_imp: usize) -> Vec<usize> {
    match (main_iters, n_imp) {
        (0, _) | (_, 0) => vec![],
        (m, 1) => vec![m - 1],
        (m, k) => {
            let mut v: Vec<usize> = (0..k)
                .map(|j| ((j as f64) * (m - 1) as f64 / (k - 1) as f64).round() as usize)
                .collect();
            v.dedup();
            v
        }
    }
}

fn check(model: &Model, prior: &GaussianPrior, settings: &ExchangeSettings) -> Result<usize> {
    if model.dim() < 2 {
        return Err(Error::ModelDimension(model.dim()));
    }
    let d = model.free_dim();
    if prior.dim() != d {
        return Err(Error::DimensionMismatch { what: "prior".into(), expected: d, got: prior.dim() });
    }
    let nchains = settings.resolved_nchains(d);
    if nchains < 4 {
        return Err(Error::InvalidSetting(format!("nchains must be at least 4, got {nchains}")));
    }
    if !(settings.gamma.is_finite() && settings.gamma >= 0.0) {
        return Err(Error::InvalidSetting("gamma must be a nonnegative number".into()));
    }
    if settings.main_iters == 0 {
        return Err(Error::InvalidSetting("main_iters must be positive".into()));
    }
    Ok(nchains)
}

fn start_point(model: &Model, base: &Graph, prior: &GaussianPrior, settings: &ExchangeSettings) -> Vec<f64> {
    let fallback = || prior.mean().iter().copied().collect();
    match settings.start {
        StartPoint::PriorMean => fallback(),
        StartPoint::Mple => match pseudo::mple(model, base) {
            Ok(fit) => fit.theta_mple,
            Err(e) => {
                warn!("starting chains at the prior mean: {e}");
                fallback()
            }
        },
    }
}

fn run(
    model: &Model,
    base: &mut Graph,
    prior: &GaussianPrior,
    settings: &ExchangeSettings,
    mut missing: Option<Missing>,
) -> Result<PosteriorSample> {
    let nchains = check(model, prior, settings)?;
    let d = model.free_dim();
    let ctx = Context {
        model,
        prior,
        free: model.free_indices(),
        gamma: settings.gamma,
        v_lower: proposal_factor(&settings.proposal_matrix(d)?)?,
        aux_iters: settings.aux_iters,
    };
    let centre = start_point(model, base, prior, settings);
    let mut chains: Vec<Chain> = (0..nchains)
        .map(|h| {
            let mut rng = stream(settings.seed, Domain::Chain, h as u64);
            let theta: Vec<f64> = centre
                .iter()
                .map(|&c| c + settings.start_jitter * (2.0 * rng.gen::<f64>() - 1.0))
                .collect();
            Chain {
                log_prior: prior.log_density(&theta),
                theta,
                rng,
                aux: base.clone(),
                accepted: 0,
                proposals: 0,
                accepted_now: false,
            }
        })
        .collect();

    let mut draws = vec![Vec::with_capacity(settings.main_iters); nchains];
    let mut imputed = Vec::new();
    let halves = [(0..nchains / 2).collect::<Vec<_>>(), (nchains / 2..nchains).collect::<Vec<_>>()];
    for iter in 0..settings.burn_in + settings.main_iters {
        let main = iter >= settings.burn_in;
        match settings.schedule {
            ChainSchedule::Sequential => {
                for h in 0..nchains {
                    let states: Vec<Vec<f64>> = chains.iter().map(|c| c.theta.clone()).collect();
                    let pool: Vec<usize> = (0..nchains).filter(|&k| k != h).collect();
                    let chain = &mut chains[h];
                    let proposal = propose_from(&states, h, &pool, ctx.gamma, &ctx.v_lower, &mut chain.rng);
                    ctx.exchange_move(chain, proposal, base, main)?;
                }
            }
            ChainSchedule::Split => {
                for (moving, fixed) in [(&halves[0], &halves[1]), (&halves[1], &halves[0])] {
                    let states: Vec<Vec<f64>> = chains.iter().map(|c| c.theta.clone()).collect();
                    let lo = moving[0];
                    let results: Vec<Result<()>> = {
                        let slice = &mut chains[lo..lo + moving.len()];
                        let mut out: Vec<Result<()>> = (0..slice.len()).map(|_| Ok(())).collect();
                        let base_ref: &Graph = base;
                        let ctx_ref = &ctx;
                        let states_ref = &states;
                        let mut pairs: Vec<(&mut Chain, &mut Result<()>)> = slice.iter_mut().zip(out.iter_mut()).collect();
                        par::for_each_mut(settings.execution, &mut pairs, |i, (chain, res)| {
                            let h = lo + i;
                            let proposal =
                                propose_from(states_ref, h, fixed, ctx_ref.gamma, &ctx_ref.v_lower, &mut chain.rng);
                            **res = ctx_ref.exchange_move(chain, proposal, base_ref, main);
                        });
                        out
                    };
                    results.into_iter().collect::<Result<Vec<()>>>()?;
                }
            }
        }
        if let Some(m) = missing.as_mut() {
            let candidates: Vec<usize> = match m.refresh {
                ImputationRefresh::OnAccept => (0..nchains).filter(|&h| chains[h].accepted_now).collect(),
                ImputationRefresh::EveryIteration => (0..nchains).collect(),
            };
            if !candidates.is_empty() {
                let h = candidates[m.rng.gen_range(0..candidates.len())];
                let full = model.full_theta(&chains[h].theta);
                *base = simulate_constrained(model, &full, base, m.updates, &mut m.rng)?;
            }
            if main && m.keep_at.binary_search(&(iter - settings.burn_in)).is_ok() {
                imputed.push(base.clone());
            }
        }
        if main {
            for (h, c) in chains.iter().enumerate() {
                draws[h].push(c.theta.clone());
            }
        }
    }

    let proposals: u64 = chains.iter().map(|c| c.proposals).sum();
    let accepted: u64 = chains.iter().map(|c| c.accepted).sum();
    Ok(PosteriorSample {
        names: model.free_names(),
        nchains,
        iterations: settings.main_iters,
        draws: draws.into_iter().flatten().collect(),
        acceptance_rate: accepted as f64 / proposals.max(1) as f64,
        imputed_networks: imputed,
    })
}
