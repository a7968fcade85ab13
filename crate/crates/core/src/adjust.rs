//! Adjusted pseudo-likelihood: the log pseudo-likelihood corrected in mode,
//! curvature and magnitude so that it approximates the log-likelihood.
//!
//! `log_apl(θ) = log C + log_pl(θ̂_MPLE + Q (θ − θ̂_MLE))`.

use std::fmt;
use std::str::FromStr;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg;
use crate::model::Model;
use crate::par::{self, Execution};
use crate::pseudo::{self, DyadDesign};
use crate::rng::{stream, Domain};
use crate::sampler::TieSampler;
use crate::stats::{change_stats_into, suff_stats};

/// How the maximum likelihood estimate is approximated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimate {
    /// Contrastive divergence: short runs from the observed network.
    #[default]
    #[serde(rename = "CD", alias = "cd")]
    Cd,
    /// Monte Carlo maximum likelihood with long runs.
    #[serde(rename = "MLE", alias = "mle")]
    Mle,
}

impl FromStr for Estimate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CD" => Ok(Estimate::Cd),
            "MLE" => Ok(Estimate::Mle),
            _ => Err(Error::InvalidSetting(format!("unknown estimate {s:?}; expected CD or MLE"))),
        }
    }
}

impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimate::Cd => "CD",
            Estimate::Mle => "MLE",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AplSettings {
    pub aux_iters: usize,
    pub n_aux_draws: usize,
    pub aux_thin: usize,
    pub ladder: usize,
    pub estimate: Estimate,
    /// Simulated statistic vectors per Newton iteration.
    pub mle_draws: usize,
    /// Toggle proposals per contrastive-divergence run.
    pub cd_steps: usize,
    pub max_newton: usize,
    /// Stop once every statistic is within this many simulated standard
    /// deviations of its observed value.
    pub tolerance: f64,
    /// Simulated networks for the likelihood Hessian.
    pub curvature_draws: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for AplSettings {
    fn default() -> Self {
        AplSettings {
            aux_iters: 2500,
            n_aux_draws: 50,
            aux_thin: 50,
            ladder: 200,
            estimate: Estimate::Cd,
            mle_draws: 1000,
            cd_steps: 100,
            max_newton: 25,
            tolerance: 0.1,
            curvature_draws: 1000,
            seed: 0,
            execution: Execution::Parallel,
        }
    }
}

impl AplSettings {
    fn validate(&self) -> Result<()> {
        if self.ladder < 2 {
            return Err(Error::InvalidSetting("ladder must be at least 2".into()));
        }
        if self.n_aux_draws == 0 || self.aux_thin == 0 {
            return Err(Error::InvalidSetting("n_aux_draws and aux_thin must be positive".into()));
        }
        if self.mle_draws < 2 || self.curvature_draws < 2 {
            return Err(Error::InvalidSetting("mle_draws and curvature_draws must be at least 2".into()));
        }
        Ok(())
    }
}

fn check_model(model: &Model, g: &Graph) -> Result<()> {
    if model.has_offsets() {
        return Err(Error::InvalidSetting("adjusted pseudo-likelihood does not support offset terms".into()));
    }
    if g.has_missing() {
        return Err(Error::HasMissingDyads(g.missing_count()));
    }
    Ok(())
}

/// Statistic vectors of `draws` independent runs of `steps` toggles, each
/// started at `g` and using its own stream.
#[allow(clippy::too_many_arguments)]
pub fn simulate_statistics(
    model: &Model,
    g: &Graph,
    theta: &[f64],
    draws: usize,
    steps: usize,
    seed: u64,
    domain: Domain,
    exec: Execution,
) -> Result<Vec<Vec<f64>>> {
    TieSampler::new(model, theta)?;
    let observed = suff_stats(model, g);
    Ok(par::map_range(exec, draws, |i| {
        let mut rng = stream(seed, domain, i as u64);
        let mut sampler = TieSampler::new(model, theta).expect("checked above");
        let mut y = g.clone();
        sampler.run(&mut y, steps, &mut rng);
        observed.iter().zip(sampler.delta()).map(|(a, b)| a + b).collect()
    }))
}

/// Parallel chains used by [`chain_statistics`].
pub const SIMULATION_CHAINS: usize = 16;

/// Statistic vectors of `draws` networks taken every `thin` toggles from
/// [`SIMULATION_CHAINS`] chains started at `g`, each after `burn_in`
/// toggles.
#[allow(clippy::too_many_arguments)]
pub fn chain_statistics(
    model: &Model,
    g: &Graph,
    theta: &[f64],
    draws: usize,
    burn_in: usize,
    thin: usize,
    seed: u64,
    domain: Domain,
    exec: Execution,
) -> Result<Vec<Vec<f64>>> {
    TieSampler::new(model, theta)?;
    let observed = suff_stats(model, g);
    let chains = SIMULATION_CHAINS.min(draws.max(1));
    let per_chain = |c: usize| draws / chains + usize::from(c < draws % chains);
    let blocks = par::map_range(exec, chains, |c| {
        let mut rng = stream(seed, domain, c as u64);
        let mut sampler = TieSampler::new(model, theta).expect("checked above");
        let mut y = g.clone();
        sampler.run(&mut y, burn_in, &mut rng);
        let mut out = Vec::with_capacity(per_chain(c));
        for k in 0..per_chain(c) {
            if k > 0 {
                sampler.run(&mut y, thin, &mut rng);
            }
            out.push(observed.iter().zip(sampler.delta()).map(|(a, b)| a + b).collect());
        }
        out
    });
    Ok(blocks.into_iter().flatten().collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleEstimate {
    pub theta: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Largest standardized statistic discrepancy at the last iteration.
    pub discrepancy: f64,
}

/// Monte Carlo Newton iterations `θ ← θ + Ĉov⁻¹(s(y) − s̄)` from `start`.
/// The update computed from the final batch of draws is applied before
/// returning.
pub fn estimate_mle(model: &Model, g: &Graph, start: &[f64], settings: &AplSettings) -> Result<MleEstimate> {
    check_model(model, g)?;
    settings.validate()?;
    let observed = DVector::from_vec(suff_stats(model, g));
    let mut theta = start.to_vec();
    let mut discrepancy = f64::INFINITY;
    for iter in 1..=settings.max_newton.max(1) {
        let seed = settings.seed.wrapping_add((iter as u64) << 32);
        let draws = match settings.estimate {
            Estimate::Cd => simulate_statistics(
                model,
                g,
                &theta,
                settings.mle_draws,
                settings.cd_steps,
                seed,
                Domain::MleDraws,
                settings.execution,
            )?,
            Estimate::Mle => chain_statistics(
                model,
                g,
                &theta,
                settings.mle_draws,
                settings.aux_iters,
                settings.aux_iters,
                seed,
                Domain::MleDraws,
                settings.execution,
            )?,
        };
        let (mean, cov) = linalg::mean_and_covariance(&draws);
        let gap = &observed - &mean;
        discrepancy = (0..gap.len())
            .map(|k| {
                let sd = cov[(k, k)].sqrt();
                if sd > 0.0 {
                    gap[k].abs() / sd
                } else if gap[k] == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max);
        let step = nalgebra::Cholesky::new(cov).ok_or(Error::SingularCovariance)?.solve(&gap);
        for (t, s) in theta.iter_mut().zip(step.iter()) {
            *t += s;
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("maximum likelihood iterate".into()));
        }
        if discrepancy < settings.tolerance {
            return Ok(MleEstimate { theta, iterations: iter, converged: true, discrepancy });
        }
    }
    warn!(
        "maximum likelihood iterations did not converge after {} steps (discrepancy {discrepancy:.3})",
        settings.max_newton
    );
    Ok(MleEstimate { theta, iterations: settings.max_newton, converged: false, discrepancy })
}

/// `−Ĉov[s(Y)]` at `theta` from `curvature_draws` networks spaced
/// `aux_iters` toggles apart.
pub fn simulated_hessian(model: &Model, g: &Graph, theta: &[f64], settings: &AplSettings) -> Result<DMatrix<f64>> {
    let draws = chain_statistics(
        model,
        g,
        theta,
        settings.curvature_draws,
        settings.aux_iters,
        settings.aux_iters,
        settings.seed,
        Domain::Curvature,
        settings.execution,
    )?;
    Ok(-linalg::mean_and_covariance(&draws).1)
}

/// `Q = M_P⁻¹ M_L` with `−H_PL = M_PᵀM_P` and `−H_L = M_LᵀM_L` (upper
/// Cholesky factors), so that `Qᵀ H_PL Q = H_L`.
pub fn curvature_matrix(h_pl: &DMatrix<f64>, h_l: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m_p = linalg::upper_cholesky(&-h_pl, "negative pseudo-likelihood Hessian")?;
    let m_l = linalg::upper_cholesky(&-h_l, "negative likelihood Hessian")?;
    m_p.solve_upper_triangular(&m_l).ok_or_else(|| Error::NotPositiveDefinite("pseudo-likelihood Hessian".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagnitudeEstimate {
    pub log_c: f64,
    /// Path-sampling estimate of `log z(θ̂_MLE)`.
    pub log_z: f64,
    /// Exact `log z` of the dyad-independent reference.
    pub log_z_reference: f64,
    pub reference: Vec<f64>,
    /// `(θ̂_MLE − θ_ref)ᵀ E_t[s]` per rung, averaged over both walks.
    pub rung_means: Vec<f64>,
    /// Path integral from the walk up from the reference and from the walk
    /// down from the observed network. Their gap indicates how far the
    /// walks lag behind the moving target.
    pub integral_up: f64,
    pub integral_down: f64,
    pub degenerate_rungs: usize,
}

/// Path-sampling estimate of `log z(θ̂_MLE)` from the dyad-independent
/// reference `θ_ref` (θ̂_MLE with dependent coordinates zeroed) along
/// `θ(t) = θ_ref + t (θ̂_MLE − θ_ref)`, with the trapezoid rule on a uniform
/// ladder. Two chains walk the ladder, each rung continuing from the
/// previous one: one upward from an exact draw of the reference model, one
/// downward from the observed network. The rung means average both walks.
/// `log C` is the estimated log-likelihood at θ̂_MLE minus `log_pl_at_mode`.
pub fn magnitude_constant(
    model: &Model,
    g: &Graph,
    theta_mle: &[f64],
    log_pl_at_mode: f64,
    settings: &AplSettings,
) -> Result<MagnitudeEstimate> {
    check_model(model, g)?;
    settings.validate()?;
    let mask = model.independent_mask();
    let reference: Vec<f64> = theta_mle.iter().zip(&mask).map(|(&t, &keep)| if keep { t } else { 0.0 }).collect();
    let design = DyadDesign::new(model, g).with_execution(settings.execution);
    let observed = suff_stats(model, g);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let log_z_reference = dot(&reference, &observed) - design.log_pl(&reference);
    let direction: Vec<f64> = theta_mle.iter().zip(&reference).map(|(a, b)| a - b).collect();

    let rungs = settings.ladder;
    let ts: Vec<f64> = (0..rungs).map(|k| k as f64 / (rungs - 1) as f64).collect();
    let trapezoid = |means: &[f64]| -> f64 {
        (0..rungs - 1).map(|k| (ts[k + 1] - ts[k]) * (means[k] + means[k + 1]) / 2.0).sum()
    };
    let walk = |upward: bool| -> Result<(Vec<f64>, usize)> {
        let mut means = vec![0.0; rungs];
        let mut degenerate = 0;
        if direction.iter().all(|&x| x == 0.0) {
            return Ok((means, 0));
        }
        let mut rng = stream(settings.seed, Domain::Rung, u64::from(!upward));
        let mut y = if upward { reference_draw(model, g, &reference, &mut rng) } else { g.clone() };
        let start = suff_stats(model, &y);
        let mut sampler = TieSampler::new(model, theta_mle)?;
        let order: Vec<usize> = if upward { (0..rungs).collect() } else { (0..rungs).rev().collect() };
        for k in order {
            let theta: Vec<f64> = reference.iter().zip(&direction).map(|(r, d)| r + ts[k] * d).collect();
            sampler.set_theta(&theta)?;
            sampler.run(&mut y, settings.aux_iters, &mut rng);
            let mut values = Vec::with_capacity(settings.n_aux_draws);
            for j in 0..settings.n_aux_draws {
                if j > 0 {
                    sampler.run(&mut y, settings.aux_thin, &mut rng);
                }
                let s: Vec<f64> = start.iter().zip(sampler.delta()).map(|(a, b)| a + b).collect();
                values.push(dot(&direction, &s));
            }
            if values.iter().all(|&v| v == values[0]) {
                warn!("path rung {k} (t = {:.4}) produced identical statistics in every draw", ts[k]);
                degenerate += 1;
            }
            means[k] = values.iter().sum::<f64>() / values.len() as f64;
        }
        Ok((means, degenerate))
    };
    let mut walks = par::map_range(settings.execution, 2, |w| walk(w == 0)).into_iter();
    let (up, degenerate_up) = walks.next().expect("two walks")?;
    let (down, degenerate_down) = walks.next().expect("two walks")?;
    let rung_means: Vec<f64> = up.iter().zip(&down).map(|(a, b)| (a + b) / 2.0).collect();
    let (integral_up, integral_down) = (trapezoid(&up), trapezoid(&down));
    if (integral_up - integral_down).abs() > 1.0 {
        warn!(
            "path walks disagree by {:.2} log units; increase aux_iters or ladder",
            (integral_up - integral_down).abs()
        );
    }
    let log_z = log_z_reference + trapezoid(&rung_means);
    let log_lik = dot(theta_mle, &observed) - log_z;
    let log_c = log_lik - log_pl_at_mode;
    if !log_c.is_finite() {
        return Err(Error::NonFinite("magnitude constant".into()));
    }
    Ok(MagnitudeEstimate {
        log_c,
        log_z,
        log_z_reference,
        reference,
        rung_means,
        integral_up,
        integral_down,
        degenerate_rungs: degenerate_up + degenerate_down,
    })
}

/// Exact draw from a parameter that only loads dyad-independent terms:
/// every dyad is an independent Bernoulli trial.
fn reference_draw<R: Rng + ?Sized>(model: &Model, g: &Graph, reference: &[f64], rng: &mut R) -> Graph {
    let mut y = g.clone();
    let mut delta = vec![0.0; model.dim()];
    for d in g.dyads() {
        change_stats_into(model, g, d, &mut delta);
        let eta: f64 = reference.iter().zip(&delta).map(|(a, b)| a * b).sum();
        let p = 1.0 / (1.0 + (-eta).exp());
        y.set_edge(d.i, d.j, rng.gen::<f64>() < p);
    }
    y
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AplDiagnostics {
    pub estimate: Estimate,
    pub mle_iterations: usize,
    pub mle_converged: bool,
    pub mle_discrepancy: f64,
    pub curvature_draws: usize,
    pub ladder: usize,
    pub n_aux_draws: usize,
    pub aux_iters: usize,
    pub aux_thin: usize,
    pub log_z: f64,
    pub log_z_reference: f64,
    pub degenerate_rungs: usize,
    pub path_integral_up: f64,
    pub path_integral_down: f64,
    pub hessian_pl: Vec<Vec<f64>>,
    pub hessian_l: Vec<Vec<f64>>,
}

pub(crate) fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[derive(Clone, Debug)]
pub struct AdjustedPseudoLikelihood {
    pub names: Vec<String>,
    pub formula: String,
    pub theta_mple: Vec<f64>,
    pub theta_mle: Vec<f64>,
    pub q: DMatrix<f64>,
    pub log_c: f64,
    pub diagnostics: Option<AplDiagnostics>,
    design: DyadDesign,
}

impl AdjustedPseudoLikelihood {
    /// Assembles an adjusted pseudo-likelihood from given corrections.
    pub fn from_parts(
        model: &Model,
        g: &Graph,
        theta_mple: Vec<f64>,
        theta_mle: Vec<f64>,
        q: DMatrix<f64>,
        log_c: f64,
    ) -> Result<Self> {
        let d = model.dim();
        for (what, v) in [("theta_mple", &theta_mple), ("theta_mle", &theta_mle)] {
            if v.len() != d {
                return Err(Error::DimensionMismatch { what: what.into(), expected: d, got: v.len() });
            }
        }
        if q.nrows() != d || q.ncols() != d {
            return Err(Error::DimensionMismatch { what: "Q".into(), expected: d, got: q.nrows() });
        }
        Ok(AdjustedPseudoLikelihood {
            names: model.names.clone(),
            formula: model.formula(),
            theta_mple,
            theta_mle,
            q,
            log_c,
            diagnostics: None,
            design: DyadDesign::new(model, g),
        })
    }

    pub fn dim(&self) -> usize {
        self.theta_mle.len()
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.design = self.design.with_execution(exec);
        self
    }

    /// `θ̂_MPLE + Q (θ − θ̂_MLE)`.
    pub fn transform(&self, theta: &[f64]) -> Vec<f64> {
        let diff = DVector::from_iterator(self.dim(), theta.iter().zip(&self.theta_mle).map(|(a, b)| a - b));
        let moved = &self.q * diff;
        self.theta_mple.iter().zip(moved.iter()).map(|(a, b)| a + b).collect()
    }

    pub fn log_apl(&self, theta: &[f64]) -> f64 {
        self.log_c + self.design.log_pl(&self.transform(theta))
    }

    /// The unadjusted log pseudo-likelihood.
    pub fn log_pl(&self, theta: &[f64]) -> f64 {
        self.design.log_pl(theta)
    }

    /// Gradient and Hessian of the unadjusted log pseudo-likelihood.
    pub fn pseudo_gradient_hessian(&self, theta: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        self.design.gradient_hessian(theta)
    }

    pub fn q_rows(&self) -> Vec<Vec<f64>> {
        rows(&self.q)
    }
}

/// Builds the adjusted pseudo-likelihood of `model` at `g`.
pub fn build_apl(model: &Model, g: &Graph, settings: &AplSettings) -> Result<AdjustedPseudoLikelihood> {
    check_model(model, g)?;
    settings.validate()?;
    let design = DyadDesign::new(model, g).with_execution(settings.execution);
    let fit = pseudo::mple_with(model, &design)?;
    let mle = estimate_mle(model, g, &fit.theta_mple, settings)?;
    let h_l = simulated_hessian(model, g, &mle.theta, settings)?;
    let h_pl = fit.hessian_matrix();
    let q = curvature_matrix(&h_pl, &h_l)?;
    let magnitude = magnitude_constant(model, g, &mle.theta, fit.log_pl_at_mode, settings)?;
    Ok(AdjustedPseudoLikelihood {
        names: model.names.clone(),
        formula: model.formula(),
        theta_mple: fit.theta_mple,
        theta_mle: mle.theta,
        q,
        log_c: magnitude.log_c,
        diagnostics: Some(AplDiagnostics {
            estimate: settings.estimate,
            mle_iterations: mle.iterations,
            mle_converged: mle.converged,
            mle_discrepancy: mle.discrepancy,
            curvature_draws: settings.curvature_draws,
            ladder: settings.ladder,
            n_aux_draws: settings.n_aux_draws,
            aux_iters: settings.aux_iters,
            aux_thin: settings.aux_thin,
            log_z: magnitude.log_z,
            log_z_reference: magnitude.log_z_reference,
            degenerate_rungs: magnitude.degenerate_rungs,
            path_integral_up: magnitude.integral_up,
            path_integral_down: magnitude.integral_down,
            hessian_pl: rows(&h_pl),
            hessian_l: rows(&h_l),
        }),
        design,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_formula, validate};

    fn spd(seed: u64, d: usize) -> DMatrix<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(d, d) * 0.5
    }

    #[test]
    fn curvature_identity() {
        for seed in 0..20 {
            let h_pl = -spd(seed, 4);
            let h_l = -spd(seed + 100, 4);
            let q = curvature_matrix(&h_pl, &h_l).unwrap();
            let back = q.transpose() * &h_pl * &q;
            assert!((back - &h_l).amax() < 1e-8);
            for i in 0..4 {
                assert!(q[(i, i)] > 0.0);
                for j in 0..i {
                    assert!(q[(i, j)].abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn not_negative_definite_is_an_error() {
        let h = DMatrix::identity(2, 2);
        assert!(matches!(curvature_matrix(&h, &-&h), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn value_at_mle_is_scaled_pl_at_mple() {
        let g = Graph::from_edge_list(&[(0, 1), (1, 2), (0, 2), (2, 3), (3, 4)], 6, false).unwrap();
        let m = validate(&parse_formula("edges + gwesp(0.5, fixed = TRUE)").unwrap(), &g, &[]).unwrap();
        let q = DMatrix::from_row_slice(2, 2, &[1.3, 0.2, 0.0, 0.7]);
        let apl = AdjustedPseudoLikelihood::from_parts(&m, &g, vec![-1.0, 0.4], vec![-0.8, 0.3], q, 2.5).unwrap();
        let at = apl.log_apl(&[-0.8, 0.3]);
        assert!((at - (2.5 + pseudo::log_pl(&m, &g, &[-1.0, 0.4]))).abs() < 1e-12);
    }

    #[test]
    fn rejects_offsets_and_missing() {
        let g = Graph::from_edge_list(&[(0, 1), (1, 2)], 4, true).unwrap();
        let m = validate(&parse_formula("edges + offset(mutual)").unwrap(), &g, &[-1.0]).unwrap();
        assert!(build_apl(&m, &g, &AplSettings::default()).is_err());
    }

    #[test]
    fn estimate_parses() {
        assert_eq!("cd".parse::<Estimate>().unwrap(), Estimate::Cd);
        assert_eq!("MLE".parse::<Estimate>().unwrap(), Estimate::Mle);
        assert!("x".parse::<Estimate>().is_err());
    }
}
