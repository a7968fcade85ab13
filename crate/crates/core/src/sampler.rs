//! Network simulation by single-dyad toggle Metropolis–Hastings, and exact
//! enumeration of small graph spaces.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Dyad, Graph};
use crate::model::Model;
use crate::stats::{change_stats_into, suff_stats};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerSettings {
    /// Toggle proposals per simulated network.
    pub aux_iters: usize,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        SamplerSettings { aux_iters: 2500 }
    }
}

/// Toggle sampler for `f(y | θ) ∝ exp(θᵀ s(y))` that tracks the accumulated
/// statistic change since the last reset.
#[derive(Clone, Debug)]
pub struct TieSampler<'m> {
    model: &'m Model,
    theta: Vec<f64>,
    delta: Vec<f64>,
    scratch: Vec<f64>,
    proposals: u64,
    accepted: u64,
}

fn check_theta(model: &Model, theta: &[f64]) -> Result<()> {
    if theta.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            what: "parameter vector".into(),
            expected: model.dim(),
            got: theta.len(),
        });
    }
    if theta.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("parameter vector".into()));
    }
    Ok(())
}

#[inline]
pub(crate) fn random_dyad<R: Rng + ?Sized>(n: usize, directed: bool, rng: &mut R) -> Dyad {
    let i = rng.gen_range(0..n);
    let mut j = rng.gen_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    if directed || i < j {
        Dyad { i, j }
    } else {
        Dyad { i: j, j: i }
    }
}

impl<'m> TieSampler<'m> {
    /// `theta` is the full parameter vector, offsets included.
    pub fn new(model: &'m Model, theta: &[f64]) -> Result<Self> {
        check_theta(model, theta)?;
        Ok(TieSampler {
            model,
            theta: theta.to_vec(),
            delta: vec![0.0; model.dim()],
            scratch: vec![0.0; model.dim()],
            proposals: 0,
            accepted: 0,
        })
    }

    pub fn set_theta(&mut self, theta: &[f64]) -> Result<()> {
        check_theta(self.model, theta)?;
        self.theta.copy_from_slice(theta);
        Ok(())
    }

    /// `s(current) − s(start)` since the last reset.
    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn reset_delta(&mut self) {
        self.delta.iter_mut().for_each(|x| *x = 0.0);
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    #[inline]
    fn step<R: Rng + ?Sized>(&mut self, g: &mut Graph, d: Dyad, rng: &mut R) {
        change_stats_into(self.model, g, d, &mut self.scratch);
        let eta: f64 = self.theta.iter().zip(&self.scratch).map(|(a, b)| a * b).sum();
        let present = g.has_edge(d.i, d.j);
        let log_ratio = if present { -eta } else { eta };
        let u: f64 = rng.gen();
        self.proposals += 1;
        if log_ratio >= 0.0 || u < log_ratio.exp() {
            g.toggle_in_place(d);
            self.accepted += 1;
            let sign = if present { -1.0 } else { 1.0 };
            for (acc, c) in self.delta.iter_mut().zip(&self.scratch) {
                *acc += sign * c;
            }
        }
    }

    /// `steps` proposals on uniformly chosen dyads.
    pub fn run<R: Rng + ?Sized>(&mut self, g: &mut Graph, steps: usize, rng: &mut R) {
        let (n, directed) = (g.n(), g.is_directed());
        if n < 2 {
            return;
        }
        for _ in 0..steps {
            let d = random_dyad(n, directed, rng);
            self.step(g, d, rng);
        }
    }

    /// `steps` proposals restricted to `dyads`.
    pub fn run_on<R: Rng + ?Sized>(&mut self, g: &mut Graph, dyads: &[Dyad], steps: usize, rng: &mut R) {
        if dyads.is_empty() {
            return;
        }
        for _ in 0..steps {
            let d = dyads[rng.gen_range(0..dyads.len())];
            self.step(g, d, rng);
        }
    }
}

/// Runs `aux_iters` toggle proposals from `g0` and returns the final network.
pub fn simulate<R: Rng + ?Sized>(
    model: &Model,
    theta: &[f64],
    g0: &Graph,
    settings: &SamplerSettings,
    rng: &mut R,
) -> Result<Graph> {
    let mut s = TieSampler::new(model, theta)?;
    let mut g = g0.clone();
    s.run(&mut g, settings.aux_iters, rng);
    Ok(g)
}

/// Redraws the unobserved dyads of `g_star` with `updates` toggle proposals
/// on masked dyads only; observed dyads are never touched.
pub fn simulate_constrained<R: Rng + ?Sized>(
    model: &Model,
    theta: &[f64],
    g_star: &Graph,
    updates: usize,
    rng: &mut R,
) -> Result<Graph> {
    let missing = g_star.missing_dyads();
    if missing.is_empty() {
        return Err(Error::NoMissingDyads);
    }
    let mut s = TieSampler::new(model, theta)?;
    let mut g = g_star.clone();
    s.run_on(&mut g, &missing, updates, rng);
    Ok(g)
}

/// Largest dyad count accepted by [`enumerate_exact`].
pub const ENUMERATION_LIMIT: usize = 24;

/// Every graph on a small node set, grouped by statistic vector.
#[derive(Clone, Debug)]
pub struct ExactTable {
    template: Graph,
    dyads: Vec<Dyad>,
    /// Distinct statistic vectors.
    pub stats: Vec<Vec<f64>>,
    /// Number of graphs sharing each statistic vector.
    pub multiplicity: Vec<f64>,
    class_of: Vec<u32>,
}

/// Enumerates all graphs on the nodes of `template` (its edges are ignored,
/// its attributes are used).
pub fn enumerate_exact(model: &Model, template: &Graph) -> Result<ExactTable> {
    let base = template.cleared();
    let dyads: Vec<Dyad> = base.dyads().collect();
    if dyads.len() > ENUMERATION_LIMIT {
        return Err(Error::TooLarge { dyads: dyads.len(), limit: ENUMERATION_LIMIT });
    }
    let total = 1u64 << dyads.len();
    let mut index: HashMap<Vec<i64>, u32> = HashMap::new();
    let mut stats = Vec::new();
    let mut multiplicity = Vec::new();
    let mut class_of = vec![0u32; total as usize];
    let mut g = base.clone();
    let mut gray_prev = 0u64;
    for k in 0..total {
        // walk the codes in Gray order, toggling one dyad per step
        let gray = k ^ (k >> 1);
        let changed = gray ^ gray_prev;
        if changed != 0 {
            g.toggle_in_place(dyads[changed.trailing_zeros() as usize]);
        }
        gray_prev = gray;
        let s = suff_stats(model, &g);
        let key: Vec<i64> = s.iter().map(|x| (x * 1e9).round() as i64).collect();
        let class = *index.entry(key).or_insert_with(|| {
            stats.push(s);
            multiplicity.push(0.0);
            (stats.len() - 1) as u32
        });
        multiplicity[class as usize] += 1.0;
        class_of[gray as usize] = class;
    }
    Ok(ExactTable { template: base, dyads, stats, multiplicity, class_of })
}

fn log_sum_exp(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ExactTable {
    pub fn graph_count(&self) -> u64 {
        1u64 << self.dyads.len()
    }

    pub fn dyads(&self) -> &[Dyad] {
        &self.dyads
    }

    /// `log z(θ)`.
    pub fn log_z(&self, theta: &[f64]) -> f64 {
        log_sum_exp(self.stats.iter().zip(&self.multiplicity).map(|(s, m)| dot(theta, s) + m.ln()))
    }

    pub fn log_likelihood(&self, observed: &[f64], theta: &[f64]) -> f64 {
        dot(theta, observed) - self.log_z(theta)
    }

    /// `E_θ[s(Y)]` and `Cov_θ[s(Y)]`.
    pub fn moments(&self, theta: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        let lz = self.log_z(theta);
        let d = theta.len();
        let mut mean = vec![0.0; d];
        let mut second = DMatrix::<f64>::zeros(d, d);
        for (s, m) in self.stats.iter().zip(&self.multiplicity) {
            let p = m * (dot(theta, s) - lz).exp();
            for a in 0..d {
                mean[a] += p * s[a];
                for b in 0..d {
                    second[(a, b)] += p * s[a] * s[b];
                }
            }
        }
        let cov = DMatrix::from_fn(d, d, |a, b| second[(a, b)] - mean[a] * mean[b]);
        (mean, cov)
    }

    pub fn code_of(&self, g: &Graph) -> u64 {
        self.dyads
            .iter()
            .enumerate()
            .filter(|(_, d)| g.has_edge(d.i, d.j))
            .fold(0, |acc, (k, _)| acc | 1 << k)
    }

    pub fn graph(&self, code: u64) -> Graph {
        let mut g = self.template.clone();
        for (k, d) in self.dyads.iter().enumerate() {
            if code >> k & 1 == 1 {
                g.toggle_in_place(*d);
            }
        }
        g
    }

    pub fn stats_of_code(&self, code: u64) -> &[f64] {
        &self.stats[self.class_of[code as usize] as usize]
    }

    /// Probability of every graph, indexed by code.
    pub fn probabilities(&self, theta: &[f64]) -> Vec<f64> {
        let lz = self.log_z(theta);
        let per_class: Vec<f64> = self.stats.iter().map(|s| (dot(theta, s) - lz).exp()).collect();
        self.class_of.iter().map(|&c| per_class[c as usize]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_formula, validate};
    use rand::SeedableRng;

    fn model(f: &str, g: &Graph) -> Model {
        validate(&parse_formula(f).unwrap(), g, &[]).unwrap()
    }

    #[test]
    fn enumeration_sizes() {
        let g = Graph::empty(4, false);
        let m = model("edges + gwesp(0.5, fixed = TRUE)", &g);
        let t = enumerate_exact(&m, &g).unwrap();
        assert_eq!(t.graph_count(), 64);
        assert!((t.log_z(&[0.0, 0.0]) - 64f64.ln()).abs() < 1e-12);
        let g = Graph::empty(3, true);
        let m = model("edges + mutual", &g);
        assert_eq!(enumerate_exact(&m, &g).unwrap().graph_count(), 64);
        let g = Graph::empty(8, false);
        let m = model("edges + gwesp(0.5, fixed = TRUE)", &g);
        assert!(matches!(enumerate_exact(&m, &g), Err(Error::TooLarge { dyads: 28, .. })));
    }

    #[test]
    fn code_round_trip_and_class_stats() {
        let g = Graph::empty(4, false);
        let m = model("edges + gwesp(0.5, fixed = TRUE)", &g);
        let t = enumerate_exact(&m, &g).unwrap();
        for code in 0..64 {
            let h = t.graph(code);
            assert_eq!(t.code_of(&h), code);
            let s = suff_stats(&m, &h);
            assert!(s.iter().zip(t.stats_of_code(code)).all(|(a, b)| (a - b).abs() < 1e-9));
        }
    }

    #[test]
    fn zero_steps_leave_graph_unchanged() {
        let g = Graph::from_edge_list(&[(0, 1), (2, 3)], 5, false).unwrap();
        let m = model("edges + gwesp(0.5, fixed = TRUE)", &g);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let out = simulate(&m, &[1.0, 1.0], &g, &SamplerSettings { aux_iters: 0 }, &mut rng).unwrap();
        assert_eq!(out, g);
        assert!(simulate(&m, &[f64::NAN, 0.0], &g, &SamplerSettings::default(), &mut rng).is_err());
    }

    #[test]
    fn tracked_delta_matches_recount() {
        let g = Graph::from_edge_list(&[(0, 1), (1, 2)], 7, true).unwrap();
        let m = model("edges + mutual + gwesp(0.3, fixed = TRUE) + idegree(0:2) + odegree(1)", &g);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut s = TieSampler::new(&m, &[-0.5, 1.0, 0.3, 0.2, -0.1, 0.0, 0.4]).unwrap();
        let mut h = g.clone();
        s.run(&mut h, 5000, &mut rng);
        let before = suff_stats(&m, &g);
        let after = suff_stats(&m, &h);
        for k in 0..m.dim() {
            assert!((after[k] - before[k] - s.delta()[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn constrained_run_keeps_observed_part() {
        let g = Graph::from_edge_list(&[(0, 1), (1, 2), (3, 4)], 6, false).unwrap();
        let m = model("edges + gwesp(0.5, fixed = TRUE)", &g);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        assert!(matches!(simulate_constrained(&m, &[0.0, 0.0], &g, 10, &mut rng), Err(Error::NoMissingDyads)));
        let masked = g.apply_missing_mask(&[Dyad { i: 0, j: 1 }, Dyad { i: 2, j: 5 }]).unwrap();
        for _ in 0..50 {
            let out = simulate_constrained(&m, &[0.5, 0.2], &masked, 20, &mut rng).unwrap();
            for d in g.dyads() {
                if !masked.is_missing(d.i, d.j) {
                    assert_eq!(out.has_edge(d.i, d.j), g.has_edge(d.i, d.j));
                }
            }
        }
    }
}
