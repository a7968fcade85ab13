//! Independent oracles shared by the integration tests: brute-force
//! statistic recounts, exact small-graph instances and grid quadrature.
#![allow(dead_code)]

use bayes_ergm::model::TermKind;
use bayes_ergm::rng::{stream, Domain};
use bayes_ergm::sampler::{enumerate_exact, simulate, ExactTable, SamplerSettings};
use bayes_ergm::stats::suff_stats;
use bayes_ergm::{parse_formula, validate, Attribute, Graph, Model};
use rand::Rng;

pub const LEVELS: [&str; 3] = ["a", "b", "c"];

/// Random graph with a categorical attribute `c` and a numeric one `v`.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, directed: bool, p: f64) -> Graph {
    let mut g = Graph::empty(n, directed);
    for i in 0..n {
        for j in 0..n {
            if i != j && (directed || i < j) && rng.gen::<f64>() < p {
                g.set_edge(i, j, true);
            }
        }
    }
    // every level present so the default level sets are the same everywhere
    let c = (0..n)
        .map(|i| if i < 3 { LEVELS[i] } else { LEVELS[rng.gen_range(0..3)] }.to_string())
        .collect();
    let v = (0..n).map(|_| f64::from(rng.gen_range(0..20u32)) / 4.0).collect();
    g.with_attribute("c", Attribute::Categorical(c))
        .unwrap()
        .with_attribute("v", Attribute::Numeric(v))
        .unwrap()
}

pub const UNDIRECTED_FULL: &str = r#"edges + nodematch("c") + nodematch("c", diff = TRUE, levels = c("a", "c"))
    + nodefactor("c") + absdiff("v") + gwesp(0.5, fixed = TRUE) + gwesp(1.3, fixed = TRUE) + degree(0:3)"#;
pub const DIRECTED_FULL: &str = r#"edges + mutual + nodematch("c", levels = c("b")) + nodematch("c", diff = TRUE)
    + nodefactor("c", levels = c("a", "b")) + absdiff("v") + gwesp(0.25, fixed = TRUE) + idegree(0:2) + odegree(1:3)"#;
pub const UNDIRECTED_INDEPENDENT: &str =
    r#"edges + nodematch("c") + nodefactor("c") + absdiff("v") + nodematch("c", diff = TRUE)"#;
pub const DIRECTED_INDEPENDENT: &str = r#"edges + nodematch("c", diff = TRUE) + nodefactor("c") + absdiff("v")"#;

pub fn model(formula: &str, g: &Graph) -> Model {
    validate(&parse_formula(formula).unwrap(), g, &[]).unwrap()
}

fn adjacency(g: &Graph) -> Vec<Vec<bool>> {
    (0..g.n()).map(|i| (0..g.n()).map(|j| i != j && g.has_edge(i, j)).collect()).collect()
}

fn categories(g: &Graph, name: &str) -> Vec<String> {
    match g.attribute(name).unwrap() {
        Attribute::Categorical(v) => v.clone(),
        Attribute::Numeric(v) => v.iter().map(|x| x.to_string()).collect(),
    }
}

/// Recounts every statistic from the adjacency matrix, term by term, using
/// only the formula and the coordinate names.
pub fn brute_stats(m: &Model, g: &Graph) -> Vec<f64> {
    let n = g.n();
    let a = adjacency(g);
    let directed = g.is_directed();
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| a[i][j] && (directed || i < j))
        .collect();
    let mut s = Vec::new();
    for t in &m.terms {
        let term = &t.term;
        let names = &m.names[t.start..t.start + t.len];
        match term.kind {
            TermKind::Edges => s.push(edges.len() as f64),
            TermKind::Mutual => {
                s.push(edges.iter().filter(|&&(i, j)| i < j && a[j][i]).count() as f64);
            }
            TermKind::Nodematch if !term.diff => {
                let x = categories(g, term.attr.as_ref().unwrap());
                let ok = |l: &String| term.levels.as_ref().is_none_or(|ls| ls.contains(l));
                s.push(edges.iter().filter(|&&(i, j)| x[i] == x[j] && ok(&x[i])).count() as f64);
            }
            TermKind::Nodematch | TermKind::Nodefactor => {
                let attr = term.attr.as_ref().unwrap();
                let x = categories(g, attr);
                for name in names {
                    let level = name.rsplit('.').next().unwrap();
                    let v = edges
                        .iter()
                        .map(|&(i, j)| {
                            if term.kind == TermKind::Nodematch {
                                usize::from(x[i] == level && x[j] == level)
                            } else {
                                usize::from(x[i] == level) + usize::from(x[j] == level)
                            }
                        })
                        .sum::<usize>();
                    s.push(v as f64);
                }
            }
            TermKind::Absdiff => {
                let Attribute::Numeric(v) = g.attribute(term.attr.as_ref().unwrap()).unwrap() else {
                    panic!("absdiff on categorical attribute")
                };
                s.push(edges.iter().map(|&(i, j)| (v[i] - v[j]).abs()).sum());
            }
            TermKind::Gwesp => {
                let tau = term.decay;
                let total = edges
                    .iter()
                    .map(|&(i, j)| {
                        let sp = (0..n)
                            .filter(|&k| {
                                k != i && k != j && if directed { a[i][k] && a[k][j] } else { a[i][k] && a[j][k] }
                            })
                            .count();
                        tau.exp() * (1.0 - (1.0 - (-tau).exp()).powi(sp as i32))
                    })
                    .sum();
                s.push(total);
            }
            TermKind::Idegree | TermKind::Odegree | TermKind::Degree => {
                for &d in &term.degrees {
                    let count = (0..n)
                        .filter(|&v| {
                            let deg = match term.kind {
                                TermKind::Idegree => (0..n).filter(|&u| a[u][v]).count(),
                                TermKind::Odegree => (0..n).filter(|&u| a[v][u]).count(),
                                _ => (0..n).filter(|&u| a[v][u] || a[u][v]).count(),
                            };
                            deg == d as usize
                        })
                        .count();
                    s.push(count as f64);
                }
            }
        }
    }
    s
}

/// n = 4 undirected edges + gwesp(0.5) network drawn at θ = (−1, 0.5).
pub struct GwespInstance {
    pub model: Model,
    pub graph: Graph,
    pub table: ExactTable,
    pub observed: Vec<f64>,
}

pub fn gwesp_instance() -> GwespInstance {
    let g0 = Graph::empty(4, false);
    let model = model("edges + gwesp(0.5, fixed = TRUE)", &g0);
    let mut rng = stream(0, Domain::Simulate, 0);
    let graph = simulate(&model, &[-1.0, 0.5], &g0, &SamplerSettings { aux_iters: 1000 }, &mut rng).unwrap();
    let table = enumerate_exact(&model, &g0).unwrap();
    let observed = suff_stats(&model, &graph);
    GwespInstance { model, graph, table, observed }
}

/// n = 4 undirected path-plus-pendant network with a two-level attribute,
/// modelled by edges + nodematch("x").
pub fn nodematch_graph() -> Graph {
    let x = Attribute::Categorical(["a", "a", "a", "b"].iter().map(|s| s.to_string()).collect());
    Graph::from_edge_list(&[(0, 1), (1, 2), (0, 3)], 4, false).unwrap().with_attribute("x", x).unwrap()
}

/// Unnormalised log density on a square 2-D grid.
pub struct Grid {
    pub lo: f64,
    pub h: f64,
    pub n: usize,
    /// Row-major: index `a * n + b` is θ = (lo + a h, lo + b h).
    pub logw: Vec<f64>,
    max: f64,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, n: usize, f: impl Fn([f64; 2]) -> f64) -> Self {
        let h = (hi - lo) / (n - 1) as f64;
        let mut logw = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                logw.push(f([lo + a as f64 * h, lo + b as f64 * h]));
            }
        }
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Grid { lo, h, n, logw, max }
    }

    pub fn point(&self, k: usize) -> [f64; 2] {
        [self.lo + (k / self.n) as f64 * self.h, self.lo + (k % self.n) as f64 * self.h]
    }

    fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.logw.iter().map(move |l| (l - self.max).exp())
    }

    /// Log of the integral (rectangle rule).
    pub fn log_integral(&self) -> f64 {
        self.max + (self.weights().sum::<f64>() * self.h * self.h).ln()
    }

    pub fn mean(&self) -> [f64; 2] {
        let mut z = 0.0;
        let mut m = [0.0; 2];
        for (k, w) in self.weights().enumerate() {
            let p = self.point(k);
            z += w;
            m[0] += w * p[0];
            m[1] += w * p[1];
        }
        [m[0] / z, m[1] / z]
    }

    /// Marginal CDF of coordinate `c`, evaluated by linear interpolation
    /// between cell edges.
    pub fn marginal_cdf(&self, c: usize) -> impl Fn(f64) -> f64 {
        let mut mass = vec![0.0; self.n];
        for (k, w) in self.weights().enumerate() {
            let idx = if c == 0 { k / self.n } else { k % self.n };
            mass[idx] += w;
        }
        let total: f64 = mass.iter().sum();
        let mut cum = Vec::with_capacity(self.n + 1);
        cum.push(0.0);
        for m in &mass {
            cum.push(cum.last().unwrap() + m / total);
        }
        let (lo, h) = (self.lo - self.h / 2.0, self.h);
        move |x: f64| {
            let u = (x - lo) / h;
            if u <= 0.0 {
                return 0.0;
            }
            let k = u.floor() as usize;
            if k >= cum.len() - 1 {
                return 1.0;
            }
            cum[k] + (u - k as f64) * (cum[k + 1] - cum[k])
        }
    }
}

/// One-sample Kolmogorov–Smirnov statistic.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of the KS statistic with the small-sample correction
/// of Stephens.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// Integrated autocorrelation time with the initial-positive cut-off.
pub fn iat(xs: &[f64]) -> f64 {
    let n = xs.len();
    let m = xs.iter().sum::<f64>() / n as f64;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
    let mut tau = 1.0;
    for lag in 1..n / 10 {
        let c = (0..n - lag).map(|i| (xs[i] - m) * (xs[i + lag] - m)).sum::<f64>() / (n as f64 * v);
        if c < 0.05 {
            break;
        }
        tau += 2.0 * c;
    }
    tau
}

/// Total-variation distance between two probability vectors.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
