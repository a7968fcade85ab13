//! Log-evidence of the adjusted pseudo-posterior by the Chib–Jeliazkov and
//! power-posterior estimators, and Bayes factors between models.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adjust::{AdjustedPseudoLikelihood, AplDiagnostics};
use crate::error::{Error, Result};
use crate::linalg;
use crate::par::{self, Execution};
use crate::posterior::PosteriorSample;
use crate::prior::GaussianPrior;
use crate::rng::{stream, Domain, StreamRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvidenceMethod {
    #[serde(rename = "CJ", alias = "cj")]
    Cj,
    #[serde(rename = "PP", alias = "pp")]
    Pp,
}

impl FromStr for EvidenceMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CJ" => Ok(EvidenceMethod::Cj),
            "PP" => Ok(EvidenceMethod::Pp),
            _ => Err(Error::InvalidSetting(format!("unknown evidence method {s:?}; expected cj or pp"))),
        }
    }
}

impl fmt::Display for EvidenceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvidenceMethod::Cj => "CJ",
            EvidenceMethod::Pp => "PP",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CjSettings {
    /// Scale of the random-walk covariance relative to the inverse
    /// posterior precision at the mode.
    pub v_proposal: f64,
    pub burn_in: usize,
    pub main_iters: usize,
    /// Trailing draws used for the ordinate; at most `main_iters`.
    pub num_samples: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for CjSettings {
    fn default() -> Self {
        CjSettings { v_proposal: 1.5, burn_in: 1000, main_iters: 10000, num_samples: 5000, seed: 0, execution: Execution::Parallel }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpSettings {
    /// Temperatures `(i/rungs)^exponent`, `i = 0..=rungs`.
    pub rungs: usize,
    pub exponent: f64,
    pub v_proposal: f64,
    pub burn_in: usize,
    pub main_iters: usize,
    /// Start every rung at θ̂_MLE and run rungs concurrently instead of
    /// warm-starting each rung from the previous one.
    pub parallel_rungs: bool,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for PpSettings {
    fn default() -> Self {
        PpSettings {
            rungs: 20,
            exponent: 5.0,
            v_proposal: 1.5,
            burn_in: 500,
            main_iters: 2000,
            parallel_rungs: false,
            seed: 0,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method")]
pub enum EvidenceSettings {
    #[serde(rename = "CJ")]
    Cj(CjSettings),
    #[serde(rename = "PP")]
    Pp(PpSettings),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvidenceEstimate {
    pub log_evidence: f64,
    pub method: EvidenceMethod,
    pub names: Vec<String>,
    pub theta_mle: Vec<f64>,
    pub log_c: f64,
    pub apl_diagnostics: Option<AplDiagnostics>,
    /// Posterior sample of the Chib–Jeliazkov run.
    pub posterior_sample: Option<PosteriorSample>,
    pub theta_star: Option<Vec<f64>>,
    pub log_ordinate: Option<f64>,
    pub temperatures: Vec<f64>,
    pub rung_means: Vec<f64>,
    pub rung_variances: Vec<f64>,
    pub settings: EvidenceSettings,
    pub wall_time_secs: f64,
}

/// Negative Hessian of `log_apl` at θ̂_MLE, `Qᵀ (−H_PL) Q`.
fn apl_precision(apl: &AdjustedPseudoLikelihood) -> DMatrix<f64> {
    let (_, h) = apl.pseudo_gradient_hessian(&apl.theta_mple);
    apl.q.transpose() * (-h) * &apl.q
}

struct Target<'a> {
    apl: &'a AdjustedPseudoLikelihood,
    prior: &'a GaussianPrior,
    temperature: f64,
}

impl Target<'_> {
    /// `(t · log_apl, log prior)`.
    fn eval(&self, theta: &[f64]) -> (f64, f64) {
        let lp = self.prior.log_density(theta);
        let la = if self.temperature == 0.0 { 0.0 } else { self.apl.log_apl(theta) };
        (la, lp)
    }
}

struct Walk {
    draws: Vec<Vec<f64>>,
    log_apl: Vec<f64>,
    log_post: Vec<f64>,
    accepted: usize,
    last: (Vec<f64>, f64, f64),
}

/// Random-walk Metropolis on `t · log_apl + log prior`.
fn random_walk(
    target: &Target<'_>,
    lower: &DMatrix<f64>,
    start: &[f64],
    burn_in: usize,
    iters: usize,
    rng: &mut StreamRng,
) -> Walk {
    let t = target.temperature;
    let mut theta = start.to_vec();
    let (mut la, mut lp) = target.eval(&theta);
    let mut walk = Walk {
        draws: Vec::with_capacity(iters),
        log_apl: Vec::with_capacity(iters),
        log_post: Vec::with_capacity(iters),
        accepted: 0,
        last: (vec![], 0.0, 0.0),
    };
    for k in 0..burn_in + iters {
        let eps = linalg::correlated_normal(lower, rng);
        let prop: Vec<f64> = theta.iter().zip(eps.iter()).map(|(a, b)| a + b).collect();
        let (la2, lp2) = target.eval(&prop);
        let log_ratio = t * la2 + lp2 - t * la - lp;
        let u: f64 = rng.gen();
        if log_ratio.is_finite() && u.ln() < log_ratio {
            theta = prop;
            la = la2;
            lp = lp2;
            if k >= burn_in {
                walk.accepted += 1;
            }
        }
        if k >= burn_in {
            walk.draws.push(theta.clone());
            walk.log_apl.push(la);
            walk.log_post.push(t * la + lp);
        }
    }
    walk.last = (theta, la, lp);
    walk
}

fn check_prior(apl: &AdjustedPseudoLikelihood, prior: &GaussianPrior) -> Result<()> {
    if prior.dim() != apl.dim() {
        return Err(Error::DimensionMismatch { what: "prior".into(), expected: apl.dim(), got: prior.dim() });
    }
    Ok(())
}

fn log_mean_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + (xs.iter().map(|x| (x - m).exp()).sum::<f64>() / xs.len() as f64).ln()
}

/// Chib–Jeliazkov estimate from a single random-walk chain started at
/// θ̂_MLE with covariance `v_proposal · (−H_apl + Σ_prior⁻¹)⁻¹`.
pub fn evidence_cj(apl: &AdjustedPseudoLikelihood, prior: &GaussianPrior, settings: &CjSettings) -> Result<EvidenceEstimate> {
    check_prior(apl, prior)?;
    if settings.main_iters == 0 || settings.num_samples == 0 || settings.num_samples > settings.main_iters {
        return Err(Error::InvalidSetting("num_samples must be in 1..=main_iters".into()));
    }
    if settings.v_proposal.is_nan() || settings.v_proposal <= 0.0 {
        return Err(Error::InvalidSetting("v_proposal must be positive".into()));
    }
    let started = Instant::now();
    let d = apl.dim();
    let precision = apl_precision(apl) + prior.precision();
    let cov = linalg::spd_inverse(&precision, "posterior precision")? * settings.v_proposal;
    let lower = linalg::lower_cholesky(&cov, "proposal covariance")?;
    let target = Target { apl, prior, temperature: 1.0 };
    let mut rng = stream(settings.seed, Domain::Evidence, 0);
    let walk = random_walk(&target, &lower, &apl.theta_mle, settings.burn_in, settings.main_iters, &mut rng);

    let first = settings.main_iters - settings.num_samples;
    let kept = &walk.draws[first..];
    let kept_post = &walk.log_post[first..];
    let theta_star: Vec<f64> = (0..d).map(|k| kept.iter().map(|r| r[k]).sum::<f64>() / kept.len() as f64).collect();
    let (la_star, lp_star) = target.eval(&theta_star);
    let post_star = la_star + lp_star;
    let star = DVector::from_column_slice(&theta_star);

    let numer: Vec<f64> = kept
        .iter()
        .zip(kept_post)
        .map(|(th, &post)| {
            let log_alpha = (post_star - post).min(0.0);
            let diff = &star - DVector::from_column_slice(th);
            log_alpha + linalg::normal_log_density(&lower, &diff)
        })
        .collect();
    let denom: Vec<f64> = par::map_range(settings.execution, settings.num_samples, |j| {
        let mut r = stream(settings.seed, Domain::Evidence, 1 + j as u64);
        let eps = linalg::correlated_normal(&lower, &mut r);
        let prop: Vec<f64> = theta_star.iter().zip(eps.iter()).map(|(a, b)| a + b).collect();
        let (la, lp) = target.eval(&prop);
        let lr = la + lp - post_star;
        if lr.is_finite() { lr.min(0.0) } else { f64::NEG_INFINITY }
    });
    let log_denom = log_mean_exp(&denom);
    if !log_denom.is_finite() {
        return Err(Error::ZeroAcceptance(
            "no proposal from the ordinate point was accepted; decrease v_proposal".into(),
        ));
    }
    let log_ordinate = log_mean_exp(&numer) - log_denom;
    let log_evidence = post_star - log_ordinate;
    if !log_evidence.is_finite() {
        return Err(Error::NonFinite("log evidence".into()));
    }
    let sample = PosteriorSample {
        names: apl.names.clone(),
        nchains: 1,
        iterations: settings.main_iters,
        draws: walk.draws,
        acceptance_rate: walk.accepted as f64 / settings.main_iters as f64,
        imputed_networks: vec![],
    };
    Ok(EvidenceEstimate {
        log_evidence,
        method: EvidenceMethod::Cj,
        names: apl.names.clone(),
        theta_mle: apl.theta_mle.clone(),
        log_c: apl.log_c,
        apl_diagnostics: apl.diagnostics.clone(),
        posterior_sample: Some(sample),
        theta_star: Some(theta_star),
        log_ordinate: Some(log_ordinate),
        temperatures: vec![],
        rung_means: vec![],
        rung_variances: vec![],
        settings: EvidenceSettings::Cj(settings.clone()),
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

pub fn temperatures(rungs: usize, exponent: f64) -> Vec<f64> {
    (0..=rungs).map(|i| (i as f64 / rungs as f64).powf(exponent)).collect()
}

/// `Σ Δt (E_i + E_{i+1})/2 − Σ Δt² (V_{i+1} − V_i)/12`.
pub fn corrected_trapezoid(ts: &[f64], means: &[f64], variances: &[f64]) -> f64 {
    (0..ts.len() - 1)
        .map(|i| {
            let dt = ts[i + 1] - ts[i];
            dt * (means[i] + means[i + 1]) / 2.0 - dt * dt * (variances[i + 1] - variances[i]) / 12.0
        })
        .sum()
}

/// Power-posterior estimate on the temperature ladder `(i/m)^exponent`.
pub fn evidence_pp(apl: &AdjustedPseudoLikelihood, prior: &GaussianPrior, settings: &PpSettings) -> Result<EvidenceEstimate> {
    check_prior(apl, prior)?;
    if settings.rungs == 0 || settings.main_iters < 2 {
        return Err(Error::InvalidSetting("power posterior needs at least one rung and two iterations per rung".into()));
    }
    if settings.v_proposal.is_nan() || settings.v_proposal <= 0.0 {
        return Err(Error::InvalidSetting("v_proposal must be positive".into()));
    }
    let started = Instant::now();
    let ts = temperatures(settings.rungs, settings.exponent);
    let h = apl_precision(apl);
    let p = prior.precision();
    let factor = |t: f64| -> Result<DMatrix<f64>> {
        let cov = linalg::spd_inverse(&(&h * t + &p), "tempered precision")? * settings.v_proposal;
        linalg::lower_cholesky(&cov, "proposal covariance")
    };
    let factors: Vec<DMatrix<f64>> = ts.iter().map(|&t| factor(t)).collect::<Result<_>>()?;
    let rung = |i: usize, start: &[f64]| -> Result<Walk> {
        let target = Target { apl, prior, temperature: ts[i] };
        let mut rng = stream(settings.seed, Domain::Ladder, i as u64);
        let walk = random_walk(&target, &factors[i], start, settings.burn_in, settings.main_iters, &mut rng);
        if walk.accepted == 0 {
            return Err(Error::ZeroAcceptance(format!("power-posterior rung {i} (t = {:.3e}) accepted no proposals", ts[i])));
        }
        Ok(walk)
    };
    let walks: Vec<Walk> = if settings.parallel_rungs {
        par::map_range(settings.execution, ts.len(), |i| rung(i, &apl.theta_mle)).into_iter().collect::<Result<_>>()?
    } else {
        let mut out: Vec<Walk> = Vec::with_capacity(ts.len());
        for i in 0..ts.len() {
            let start = out.last().map_or_else(|| apl.theta_mle.clone(), |w| w.last.0.clone());
            out.push(rung(i, &start)?);
        }
        out
    };
    let mut means = Vec::with_capacity(ts.len());
    let mut variances = Vec::with_capacity(ts.len());
    for (i, w) in walks.iter().enumerate() {
        // log_apl is not evaluated at t = 0 during sampling
        let values: Vec<f64> = if ts[i] == 0.0 {
            par::map_range(settings.execution, w.draws.len(), |k| apl.log_apl(&w.draws[k]))
        } else {
            w.log_apl.clone()
        };
        let m = values.iter().sum::<f64>() / values.len() as f64;
        let v = values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
        means.push(m);
        variances.push(v);
    }
    let log_evidence = corrected_trapezoid(&ts, &means, &variances);
    if !log_evidence.is_finite() {
        return Err(Error::NonFinite("log evidence".into()));
    }
    Ok(EvidenceEstimate {
        log_evidence,
        method: EvidenceMethod::Pp,
        names: apl.names.clone(),
        theta_mle: apl.theta_mle.clone(),
        log_c: apl.log_c,
        apl_diagnostics: apl.diagnostics.clone(),
        posterior_sample: None,
        theta_star: None,
        log_ordinate: None,
        temperatures: ts,
        rung_means: means,
        rung_variances: variances,
        settings: EvidenceSettings::Pp(settings.clone()),
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub log_evidence: Vec<f64>,
    /// `log_bayes_factors[m][k] = log Z_m − log Z_k`.
    pub log_bayes_factors: Vec<Vec<f64>>,
    pub posterior_model_probs: Vec<f64>,
}

impl Comparison {
    pub fn bayes_factor(&self, m: usize, k: usize) -> f64 {
        self.log_bayes_factors[m][k].exp()
    }
}

/// Bayes factors and posterior model probabilities, in log space.
pub fn compare(log_z: &[f64], prior_model_probs: &[f64]) -> Result<Comparison> {
    if log_z.len() != prior_model_probs.len() {
        return Err(Error::DimensionMismatch {
            what: "prior model probabilities".into(),
            expected: log_z.len(),
            got: prior_model_probs.len(),
        });
    }
    if log_z.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("log evidence".into()));
    }
    let total: f64 = prior_model_probs.iter().sum();
    if prior_model_probs.iter().any(|&p| p.is_nan() || p <= 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidSetting("prior model probabilities must be positive and sum to 1".into()));
    }
    let log_bayes_factors = log_z.iter().map(|a| log_z.iter().map(|b| a - b).collect()).collect();
    let weights: Vec<f64> = log_z.iter().zip(prior_model_probs).map(|(z, p)| z + p.ln()).collect();
    let m = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = weights.iter().map(|w| (w - m).exp()).collect();
    let total: f64 = scaled.iter().sum();
    Ok(Comparison {
        log_evidence: log_z.to_vec(),
        log_bayes_factors,
        posterior_model_probs: scaled.iter().map(|w| w / total).collect(),
    })
}
