//! Log pseudo-likelihood and maximum pseudo-likelihood estimation.
//!
//! The pseudo-likelihood is a logistic regression of each observed dyad on
//! its change statistics. Dyads with identical change-statistic rows are
//! pooled into one weighted row.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::Model;
use crate::par::{self, Execution};
use crate::stats::change_stats_into;

#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Pooled logistic-regression design of the observed dyads.
#[derive(Clone, Debug)]
pub struct DyadDesign {
    dim: usize,
    rows: Vec<f64>,
    ones: Vec<f64>,
    zeros: Vec<f64>,
    exec: Execution,
}

impl DyadDesign {
    /// Change statistics of every observed dyad at the current graph state.
    pub fn new(model: &Model, g: &Graph) -> Self {
        let dim = model.dim();
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut rows = Vec::new();
        let mut ones = Vec::new();
        let mut zeros = Vec::new();
        let mut buf = vec![0.0; dim];
        for d in g.dyads() {
            if g.is_missing(d.i, d.j) {
                continue;
            }
            change_stats_into(model, g, d, &mut buf);
            let key: Vec<u64> = buf.iter().map(|x| x.to_bits()).collect();
            let r = *index.entry(key).or_insert_with(|| {
                rows.extend_from_slice(&buf);
                ones.push(0.0);
                zeros.push(0.0);
                ones.len() - 1
            });
            if g.has_edge(d.i, d.j) {
                ones[r] += 1.0;
            } else {
                zeros[r] += 1.0;
            }
        }
        DyadDesign { dim, rows, ones, zeros, exec: Execution::default() }
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of distinct rows.
    pub fn len(&self) -> usize {
        self.ones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ones.is_empty()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.rows[r * self.dim..(r + 1) * self.dim]
    }

    /// (edges, non-edges) pooled into row `r`.
    pub fn weights(&self, r: usize) -> (f64, f64) {
        (self.ones[r], self.zeros[r])
    }

    #[inline]
    fn eta(&self, r: usize, theta: &[f64]) -> f64 {
        self.row(r).iter().zip(theta).map(|(a, b)| a * b).sum()
    }

    /// `Σ y η − log(1 + e^η)` over observed dyads; `theta` is the full vector.
    pub fn log_pl(&self, theta: &[f64]) -> f64 {
        par::chunked_sum(self.exec, self.len(), |range| {
            range
                .map(|r| {
                    let eta = self.eta(r, theta);
                    self.ones[r] * eta - (self.ones[r] + self.zeros[r]) * softplus(eta)
                })
                .sum()
        })
    }

    /// Gradient and Hessian of [`log_pl`](Self::log_pl) over all coordinates.
    pub fn gradient_hessian(&self, theta: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let d = self.dim;
        let chunks = self.len().div_ceil(par::CHUNK).max(1);
        let parts = par::map_range(self.exec, chunks, |c| {
            let mut g = vec![0.0; d];
            let mut h = vec![0.0; d * d];
            for r in c * par::CHUNK..((c + 1) * par::CHUNK).min(self.len()) {
                let x = self.row(r);
                let n = self.ones[r] + self.zeros[r];
                let p = logistic(self.eta(r, theta));
                let resid = self.ones[r] - n * p;
                let w = n * p * (1.0 - p);
                for a in 0..d {
                    g[a] += resid * x[a];
                    if x[a] != 0.0 {
                        for b in 0..=a {
                            h[a * d + b] -= w * x[a] * x[b];
                        }
                    }
                }
            }
            (g, h)
        });
        let mut grad = DVector::zeros(d);
        let mut hess = DMatrix::zeros(d, d);
        for (g, h) in parts {
            for a in 0..d {
                grad[a] += g[a];
                for b in 0..=a {
                    hess[(a, b)] += h[a * d + b];
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                hess[(b, a)] = hess[(a, b)];
            }
        }
        (grad, hess)
    }

    /// Unweighted-by-probability Gram matrix `Σ n_r x xᵀ`.
    fn gram(&self) -> DMatrix<f64> {
        let d = self.dim;
        let mut m = DMatrix::zeros(d, d);
        for r in 0..self.len() {
            let x = self.row(r);
            let n = self.ones[r] + self.zeros[r];
            for a in 0..d {
                for b in 0..d {
                    m[(a, b)] += n * x[a] * x[b];
                }
            }
        }
        m
    }

    /// True when some pooled row is fitted with probability within
    /// `1e-9` of 0 or 1.
    fn degenerate_fit(&self, theta: &[f64]) -> bool {
        (0..self.len()).any(|r| self.eta(r, theta).abs() > 20.7)
    }

    /// One line per observed dyad: response then change statistics.
    pub fn expanded_rows(&self) -> impl Iterator<Item = (bool, &[f64])> + '_ {
        (0..self.len()).flat_map(move |r| {
            let x = self.row(r);
            std::iter::repeat_n((true, x), self.ones[r] as usize)
                .chain(std::iter::repeat_n((false, x), self.zeros[r] as usize))
        })
    }
}

/// Log pseudo-likelihood at the full parameter vector `theta`.
pub fn log_pl(model: &Model, g: &Graph, theta: &[f64]) -> f64 {
    DyadDesign::new(model, g).log_pl(theta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoFit {
    /// Estimates of the free coordinates.
    pub theta_mple: Vec<f64>,
    /// Full vector with offsets inserted.
    pub theta_full: Vec<f64>,
    /// Hessian of the log pseudo-likelihood over the free coordinates.
    pub hessian: Vec<Vec<f64>>,
    pub log_pl_at_mode: f64,
    pub iterations: usize,
    pub names: Vec<String>,
}

impl PseudoFit {
    pub fn hessian_matrix(&self) -> DMatrix<f64> {
        let d = self.hessian.len();
        DMatrix::from_fn(d, d, |a, b| self.hessian[a][b])
    }

    /// `sqrt(diag((−H)⁻¹))`; these ignore dyad dependence and understate
    /// uncertainty.
    pub fn naive_standard_errors(&self) -> Vec<f64> {
        let neg = -self.hessian_matrix();
        match nalgebra::Cholesky::new(neg) {
            Some(c) => c.inverse().diagonal().iter().map(|v| v.sqrt()).collect(),
            None => vec![f64::NAN; self.hessian.len()],
        }
    }
}

const MPLE_MAX_ITERS: usize = 100;
const MPLE_GRAD_TOL: f64 = 1e-8;
const DIVERGENCE: f64 = 40.0;

fn sub_vector(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&k| v[k]))
}

fn sub_matrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])])
}

/// Maximum pseudo-likelihood estimate by Newton–Raphson with step halving.
pub fn mple(model: &Model, g: &Graph) -> Result<PseudoFit> {
    let design = DyadDesign::new(model, g);
    mple_with(model, &design)
}

pub fn mple_with(model: &Model, design: &DyadDesign) -> Result<PseudoFit> {
    if design.is_empty() {
        return Err(Error::NoObservedDyads);
    }
    let free = model.free_indices();
    let names = model.free_names();
    let gram = sub_matrix(&design.gram(), &free);
    let eig = SymmetricEigen::new(gram.clone());
    let max_ev = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let (k_min, min_ev) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |a, (k, v)| if v < a.1 { (k, v) } else { a });
    if min_ev <= 1e-10 * max_ev.max(1e-300) {
        let v = eig.eigenvectors.column(k_min);
        let terms = (0..free.len()).filter(|&a| v[a].abs() > 1e-6).map(|a| names[a].clone()).collect();
        return Err(Error::RankDeficient { terms });
    }

    let mut theta = model.full_theta(&vec![0.0; free.len()]);
    let mut current = design.log_pl(&theta);
    for iter in 1..=MPLE_MAX_ITERS {
        let (grad, hess) = design.gradient_hessian(&theta);
        let gf = sub_vector(&grad, &free);
        let hf = sub_matrix(&hess, &free);
        if gf.amax() < MPLE_GRAD_TOL {
            if design.degenerate_fit(&theta) {
                return Err(separation(model, &theta, &free));
            }
            return Ok(finish(model, theta, hf, current, iter - 1, names));
        }
        let step = match nalgebra::Cholesky::new(-&hf) {
            Some(c) => c.solve(&gf),
            None => return Err(separation(model, &theta, &free)),
        };
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let mut trial = theta.clone();
            for (a, &k) in free.iter().enumerate() {
                trial[k] += scale * step[a];
            }
            let value = design.log_pl(&trial);
            if value.is_finite() && value >= current - 1e-12 * current.abs() {
                theta = trial;
                current = value;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted || free.iter().any(|&k| theta[k].abs() > DIVERGENCE) {
            return Err(separation(model, &theta, &free));
        }
        if step.amax() * scale < 1e-12 {
            if design.degenerate_fit(&theta) {
                return Err(separation(model, &theta, &free));
            }
            let (_, hess) = design.gradient_hessian(&theta);
            return Ok(finish(model, theta, sub_matrix(&hess, &free), current, iter, names));
        }
    }
    Err(separation(model, &theta, &free))
}

fn separation(model: &Model, theta: &[f64], free: &[usize]) -> Error {
    let k = free
        .iter()
        .copied()
        .max_by(|&a, &b| theta[a].abs().total_cmp(&theta[b].abs()))
        .unwrap_or(0);
    Error::Separation { coordinate: model.names[k].clone() }
}

fn finish(
    model: &Model,
    theta: Vec<f64>,
    hess: DMatrix<f64>,
    value: f64,
    iterations: usize,
    names: Vec<String>,
) -> PseudoFit {
    let d = hess.nrows();
    PseudoFit {
        theta_mple: model.free_part(&theta),
        theta_full: theta,
        hessian: (0..d).map(|a| (0..d).map(|b| hess[(a, b)]).collect()).collect(),
        log_pl_at_mode: value,
        iterations,
        names,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Attribute, Dyad};
    use crate::model::{parse_formula, validate};
    use crate::stats::suff_stats;
    use rand::{Rng, SeedableRng};

    fn model(f: &str, g: &Graph, off: &[f64]) -> Model {
        validate(&parse_formula(f).unwrap(), g, off).unwrap()
    }

    fn random_graph(rng: &mut impl Rng, n: usize, directed: bool, p: f64) -> Graph {
        let mut g = Graph::empty(n, directed);
        let dyads: Vec<Dyad> = g.dyads().collect();
        for d in dyads {
            if rng.gen::<f64>() < p {
                g.set_edge(d.i, d.j, true);
            }
        }
        let x = (0..n).map(|i| ["a", "b"][i % 2].to_string()).collect();
        g.with_attribute("x", Attribute::Categorical(x)).unwrap()
    }

    #[test]
    fn zero_parameter_gives_half_per_dyad() {
        let g = random_graph(&mut rand_chacha::ChaCha8Rng::seed_from_u64(0), 4, false, 0.5);
        let m = model(r#"edges + nodematch("x")"#, &g, &[]);
        let lp = log_pl(&m, &g, &[0.0, 0.0]);
        assert!((lp - 6.0 * 0.5f64.ln()).abs() < 1e-12);
        assert!((lp + 4.158883).abs() < 1e-6);
    }

    /// Each conditional recomputed from two full statistic evaluations.
    fn literal_log_pl(m: &Model, g: &Graph, theta: &[f64]) -> f64 {
        let mut total = 0.0;
        for d in g.dyads() {
            let mut plus = g.clone();
            plus.set_edge(d.i, d.j, true);
            let mut minus = g.clone();
            minus.set_edge(d.i, d.j, false);
            let sp = suff_stats(m, &plus);
            let sm = suff_stats(m, &minus);
            let eta: f64 = theta.iter().zip(sp.iter().zip(&sm)).map(|(t, (a, b))| t * (a - b)).sum();
            let p1 = 1.0 / (1.0 + (-eta).exp());
            total += if g.has_edge(d.i, d.j) { p1.ln() } else { (1.0 - p1).ln() };
        }
        total
    }

    #[test]
    fn matches_product_of_conditionals() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let g = random_graph(&mut rng, 6, false, 0.4);
            let m = model("edges + gwesp(0.5, fixed = TRUE)", &g, &[]);
            let theta = [rng.gen_range(-2.0..1.0), rng.gen_range(-1.0..1.5)];
            let a = log_pl(&m, &g, &theta);
            let b = literal_log_pl(&m, &g, &theta);
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn edges_mple_is_logit_density() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let g = random_graph(&mut rng, 20, false, 0.2);
        let m = model("edges + absdiff(\"y\")", &g.clone().with_attribute("y", Attribute::Numeric(vec![1.0; 20])).unwrap(), &[]);
        // absdiff of a constant attribute is identically zero
        let g2 = g.clone().with_attribute("y", Attribute::Numeric(vec![1.0; 20])).unwrap();
        assert!(matches!(mple(&m, &g2), Err(Error::RankDeficient { .. })));
        let m = model("edges + offset(nodematch(\"x\"))", &g, &[0.0]);
        let fit = mple(&m, &g).unwrap();
        let p = g.density().unwrap();
        assert!((fit.theta_mple[0] - (p / (1.0 - p)).ln()).abs() < 1e-8);
    }

    #[test]
    fn empty_graph_is_separated() {
        let g = random_graph(&mut rand_chacha::ChaCha8Rng::seed_from_u64(1), 10, false, 0.0);
        let m = model("edges + offset(nodematch(\"x\"))", &g, &[0.0]);
        match mple(&m, &g) {
            Err(Error::Separation { coordinate }) => assert_eq!(coordinate, "edges"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn gradient_matches_finite_differences_and_is_concave() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for k in 0..10 {
            let directed = k % 2 == 1;
            let g = random_graph(&mut rng, 9, directed, 0.3);
            let f = if directed {
                "edges + mutual + gwesp(0.4, fixed = TRUE) + nodematch(\"x\")"
            } else {
                "edges + gwesp(0.4, fixed = TRUE) + nodematch(\"x\") + degree(1)"
            };
            let m = model(f, &g, &[]);
            let design = DyadDesign::new(&m, &g);
            let theta: Vec<f64> = (0..m.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (grad, hess) = design.gradient_hessian(&theta);
            for a in 0..m.dim() {
                let h = 1e-5;
                let mut up = theta.clone();
                up[a] += h;
                let mut dn = theta.clone();
                dn[a] -= h;
                let fd = (design.log_pl(&up) - design.log_pl(&dn)) / (2.0 * h);
                assert!((fd - grad[a]).abs() <= 1e-5 * grad[a].abs().max(1.0), "{fd} vs {}", grad[a]);
            }
            let ev = SymmetricEigen::new(hess).eigenvalues;
            assert!(ev.iter().all(|&v| v <= 1e-9));
        }
    }

    #[test]
    fn masked_dyads_do_not_contribute() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let g = random_graph(&mut rng, 8, false, 0.4);
        let m = model("edges + nodematch(\"x\")", &g, &[]);
        let masked = g.apply_missing_mask(&[Dyad { i: 0, j: 1 }, Dyad { i: 2, j: 3 }]).unwrap();
        let mut flipped = masked.clone();
        flipped.toggle_in_place(Dyad { i: 0, j: 1 });
        flipped.toggle_in_place(Dyad { i: 2, j: 3 });
        let theta = [-0.3, 0.8];
        assert_eq!(log_pl(&m, &masked, &theta), log_pl(&m, &flipped, &theta));
    }
}
