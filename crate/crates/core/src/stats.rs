//! Sufficient statistics, change statistics and goodness-of-fit
//! distributions.
//!
//! Directed shared partners follow the outgoing two-path convention: `k` is a
//! shared partner of the edge `i → j` when `i → k` and `k → j`.

use serde::{Deserialize, Serialize};

use crate::graph::{popcount_and, Dyad, Graph};
use crate::model::{Model, Stat};

/// Geometrically weighted shared-partner weight `e^τ (1 − (1 − e^{−τ})^k)`.
#[inline]
pub fn gwesp_weight(decay: f64, k: u32) -> f64 {
    let r = 1.0 - (-decay).exp();
    decay.exp() * (1.0 - r.powi(k as i32))
}

/// Increment of the weight when a shared-partner count rises from `k` to `k + 1`.
#[inline]
fn gwesp_step(decay: f64, k: u32) -> f64 {
    (1.0 - (-decay).exp()).powi(k as i32)
}

/// Number of shared partners of the pair (i, j) in the current graph.
#[inline]
pub fn shared_partners(g: &Graph, i: usize, j: usize) -> u32 {
    popcount_and(g.out_row(i), g.in_row(j))
}

fn gwesp_change(g: &Graph, i: usize, j: usize, decay: f64) -> f64 {
    let e = u32::from(g.has_edge(i, j));
    let own = gwesp_weight(decay, shared_partners(g, i, j));
    let mut delta = own;
    if g.is_directed() {
        // i → j becomes the first leg of i → j → b for edges i → b
        for (wi, (a, b)) in g.out_row(i).iter().zip(g.out_row(j)).enumerate() {
            let mut w = a & b;
            while w != 0 {
                let b = wi * 64 + w.trailing_zeros() as usize;
                w &= w - 1;
                delta += gwesp_step(decay, shared_partners(g, i, b) - e);
            }
        }
        // and the second leg of a → i → j for edges a → j
        for (wi, (a, b)) in g.in_row(i).iter().zip(g.in_row(j)).enumerate() {
            let mut w = a & b;
            while w != 0 {
                let a = wi * 64 + w.trailing_zeros() as usize;
                w &= w - 1;
                delta += gwesp_step(decay, shared_partners(g, a, j) - e);
            }
        }
    } else {
        for (wi, (a, b)) in g.out_row(i).iter().zip(g.out_row(j)).enumerate() {
            let mut w = a & b;
            while w != 0 {
                let k = wi * 64 + w.trailing_zeros() as usize;
                w &= w - 1;
                delta += gwesp_step(decay, shared_partners(g, i, k) - e);
                delta += gwesp_step(decay, shared_partners(g, j, k) - e);
            }
        }
    }
    delta
}

#[inline]
fn degree_change(out: &mut [f64], degrees: &[u32], before: u32) {
    for (slot, &d) in out.iter_mut().zip(degrees) {
        if before + 1 == d {
            *slot += 1.0;
        } else if before == d {
            *slot -= 1.0;
        }
    }
}

/// Writes `s(y⁺ᵢⱼ) − s(y⁻ᵢⱼ)` into `out` (length `model.dim()`), whatever the
/// current state of the dyad.
pub fn change_stats_into(model: &Model, g: &Graph, d: Dyad, out: &mut [f64]) {
    let (i, j) = (d.i, d.j);
    out.iter_mut().for_each(|x| *x = 0.0);
    let e = u32::from(g.has_edge(i, j));
    for t in &model.terms {
        let o = &mut out[t.start..t.start + t.len];
        match &t.stat {
            Stat::Edges => o[0] = 1.0,
            Stat::Mutual => o[0] = f64::from(u8::from(g.has_edge(j, i))),
            Stat::Match { codes, keep } => {
                let c = codes[i];
                if c == codes[j] && keep[c as usize] {
                    o[0] = 1.0;
                }
            }
            Stat::MatchDiff { codes, coord } => {
                let c = codes[i];
                if c == codes[j] {
                    if let Some(k) = coord[c as usize] {
                        o[k] = 1.0;
                    }
                }
            }
            Stat::Factor { codes, coord } => {
                for v in [i, j] {
                    if let Some(k) = coord[codes[v] as usize] {
                        o[k] += 1.0;
                    }
                }
            }
            Stat::AbsDiff { values } => o[0] = (values[i] - values[j]).abs(),
            Stat::Gwesp { decay } => o[0] = gwesp_change(g, i, j, *decay),
            Stat::InDegree { degrees } => degree_change(o, degrees, g.in_degree(j) - e),
            Stat::OutDegree { degrees } => degree_change(o, degrees, g.out_degree(i) - e),
            Stat::Degree { degrees } => {
                degree_change(o, degrees, g.degree(i) - e);
                degree_change(o, degrees, g.degree(j) - e);
            }
        }
    }
}

pub fn change_stats(model: &Model, g: &Graph, d: Dyad) -> Vec<f64> {
    let mut out = vec![0.0; model.dim()];
    change_stats_into(model, g, d, &mut out);
    out
}

/// The statistic vector `s(y)`.
pub fn suff_stats(model: &Model, g: &Graph) -> Vec<f64> {
    let mut s = vec![0.0; model.dim()];
    let edges = g.edge_list();
    for t in &model.terms {
        let o = &mut s[t.start..t.start + t.len];
        match &t.stat {
            Stat::Edges => o[0] = edges.len() as f64,
            Stat::Mutual => {
                o[0] = edges.iter().filter(|&&(i, j)| i < j && g.has_edge(j, i)).count() as f64
            }
            Stat::Match { codes, keep } => {
                o[0] = edges
                    .iter()
                    .filter(|&&(i, j)| codes[i] == codes[j] && keep[codes[i] as usize])
                    .count() as f64
            }
            Stat::MatchDiff { codes, coord } => {
                for &(i, j) in &edges {
                    if codes[i] == codes[j] {
                        if let Some(k) = coord[codes[i] as usize] {
                            o[k] += 1.0;
                        }
                    }
                }
            }
            Stat::Factor { codes, coord } => {
                for &(i, j) in &edges {
                    for v in [i, j] {
                        if let Some(k) = coord[codes[v] as usize] {
                            o[k] += 1.0;
                        }
                    }
                }
            }
            Stat::AbsDiff { values } => {
                o[0] = edges.iter().map(|&(i, j)| (values[i] - values[j]).abs()).sum()
            }
            Stat::Gwesp { decay } => {
                o[0] = edges.iter().map(|&(i, j)| gwesp_weight(*decay, shared_partners(g, i, j))).sum()
            }
            Stat::InDegree { degrees } => count_degrees(o, degrees, (0..g.n()).map(|v| g.in_degree(v))),
            Stat::OutDegree { degrees } => count_degrees(o, degrees, (0..g.n()).map(|v| g.out_degree(v))),
            Stat::Degree { degrees } => count_degrees(o, degrees, (0..g.n()).map(|v| g.degree(v))),
        }
    }
    s
}

fn count_degrees(out: &mut [f64], degrees: &[u32], values: impl Iterator<Item = u32>) {
    for v in values {
        for (slot, &d) in out.iter_mut().zip(degrees) {
            if v == d {
                *slot += 1.0;
            }
        }
    }
}

/// Histograms used for goodness-of-fit checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GofDistributions {
    pub directed: bool,
    /// Nodes per degree (undirected only).
    pub degree: Vec<usize>,
    pub in_degree: Vec<usize>,
    pub out_degree: Vec<usize>,
    /// Edges per shared-partner count.
    pub esp: Vec<usize>,
    /// Dyads per geodesic length; index 0 is unused.
    pub geodesic: Vec<usize>,
    pub unreachable: usize,
}

fn histogram(values: impl Iterator<Item = usize>, len: usize) -> Vec<usize> {
    let mut h = vec![0; len];
    for v in values {
        h[v] += 1;
    }
    h
}

pub fn gof_stats(g: &Graph) -> GofDistributions {
    let n = g.n();
    let directed = g.is_directed();
    let (degree, in_degree, out_degree) = if directed {
        (
            Vec::new(),
            histogram((0..n).map(|v| g.in_degree(v) as usize), n),
            histogram((0..n).map(|v| g.out_degree(v) as usize), n),
        )
    } else {
        (histogram((0..n).map(|v| g.degree(v) as usize), n), Vec::new(), Vec::new())
    };
    let esp = histogram(
        g.edge_list().into_iter().map(|(i, j)| shared_partners(g, i, j) as usize),
        n.saturating_sub(1).max(1),
    );
    let mut geodesic = vec![0; n.max(2)];
    let mut unreachable = 0;
    let words = g.out_row(0).len();
    let mut visited = vec![0u64; words];
    let mut frontier = vec![0u64; words];
    let mut next = vec![0u64; words];
    for src in 0..n {
        visited.iter_mut().for_each(|w| *w = 0);
        frontier.iter_mut().for_each(|w| *w = 0);
        visited[src / 64] |= 1 << (src % 64);
        frontier[src / 64] |= 1 << (src % 64);
        let mut dist = 0;
        let mut reached = 0usize;
        loop {
            dist += 1;
            next.iter_mut().for_each(|w| *w = 0);
            for v in crate::graph::BitIter::new(&frontier) {
                for (nw, r) in next.iter_mut().zip(g.out_row(v)) {
                    *nw |= r;
                }
            }
            let mut any = false;
            for ((nw, vw), fw) in next.iter_mut().zip(visited.iter_mut()).zip(frontier.iter_mut()) {
                *nw &= !*vw;
                *vw |= *nw;
                *fw = *nw;
                any |= *nw != 0;
            }
            if !any {
                break;
            }
            let count = if directed {
                frontier.iter().map(|w| w.count_ones() as usize).sum()
            } else {
                crate::graph::BitIter::new(&frontier).filter(|&v| v > src).count()
            };
            geodesic[dist] += count;
            reached += count;
        }
        let others = if directed { n - 1 } else { n - 1 - src };
        unreachable += others - reached;
    }
    GofDistributions { directed, degree, in_degree, out_degree, esp, geodesic, unreachable }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Attribute;
    use crate::model::{parse_formula, validate};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn model(f: &str, g: &Graph) -> Model {
        validate(&parse_formula(f).unwrap(), g, &[]).unwrap()
    }

    #[test]
    fn empty_graph_statistics_are_zero() {
        let g = Graph::empty(5, false)
            .with_attribute("x", Attribute::Categorical(vec!["a".into(); 5]))
            .unwrap();
        let m = model(r#"edges + nodematch("x") + gwesp(0.5, fixed = TRUE)"#, &g);
        assert_eq!(suff_stats(&m, &g), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn triangle_gwesp_is_three() {
        let g = Graph::from_edge_list(&[(0, 1), (1, 2), (0, 2)], 3, false).unwrap();
        let m = model("edges + gwesp(0.5, fixed = TRUE)", &g);
        let s = suff_stats(&m, &g);
        assert_eq!(s[0], 3.0);
        assert!((s[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn edges_and_mutual_change() {
        let mut g = Graph::from_edge_list(&[(1, 0)], 3, true).unwrap();
        let m = model("edges + mutual", &g);
        assert_eq!(change_stats(&m, &g, Dyad { i: 0, j: 1 }), vec![1.0, 1.0]);
        assert_eq!(change_stats(&m, &g, Dyad { i: 0, j: 2 }), vec![1.0, 0.0]);
        g.set_edge(1, 0, false);
        assert_eq!(change_stats(&m, &g, Dyad { i: 0, j: 1 }), vec![1.0, 0.0]);
    }

    #[test]
    fn gof_of_empty_and_complete() {
        let g = Graph::empty(5, false);
        let s = gof_stats(&g);
        assert_eq!(s.degree[0], 5);
        assert!(s.esp.iter().all(|&c| c == 0));
        assert_eq!(s.unreachable, 10);
        assert!(s.geodesic.iter().all(|&c| c == 0));
        let mut e = vec![];
        for i in 0..4 {
            for j in i + 1..4 {
                e.push((i, j));
            }
        }
        let s = gof_stats(&Graph::from_edge_list(&e, 4, false).unwrap());
        assert_eq!(s.degree[3], 4);
        assert_eq!(s.esp[2], 6);
        assert_eq!(s.geodesic[1], 6);
        assert_eq!(s.unreachable, 0);
    }

    fn random_graph(rng: &mut impl Rng, n: usize, directed: bool, p: f64) -> Graph {
        let mut g = Graph::empty(n, directed);
        let dyads: Vec<Dyad> = g.dyads().collect();
        for d in dyads {
            if rng.gen::<f64>() < p {
                g.set_edge(d.i, d.j, true);
            }
        }
        g
    }

    /// Floyd–Warshall distance histogram, independent of the bitset BFS.
    fn floyd_histogram(g: &Graph) -> (Vec<usize>, usize) {
        let n = g.n();
        let inf = usize::MAX / 4;
        let mut d = vec![vec![inf; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0;
            for (j, cell) in row.iter_mut().enumerate() {
                if g.has_edge(i, j) {
                    *cell = 1;
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        let mut h = vec![0; n.max(2)];
        let mut nr = 0;
        for i in 0..n {
            for j in 0..n {
                if i == j || (!g.is_directed() && j < i) {
                    continue;
                }
                if d[i][j] >= inf {
                    nr += 1;
                } else {
                    h[d[i][j]] += 1;
                }
            }
        }
        (h, nr)
    }

    #[test]
    fn geodesics_match_floyd_warshall() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for k in 0..60 {
            let directed = k % 2 == 0;
            let p = rng.gen_range(0.05..0.4);
            let g = random_graph(&mut rng, 12, directed, p);
            let s = gof_stats(&g);
            let (h, nr) = floyd_histogram(&g);
            assert_eq!(s.geodesic, h);
            assert_eq!(s.unreachable, nr);
            let pairs = if directed { 132 } else { 66 };
            assert_eq!(s.geodesic.iter().sum::<usize>() + s.unreachable, pairs);
            assert_eq!(s.esp.iter().sum::<usize>(), g.edge_count());
            if directed {
                assert_eq!(s.in_degree.iter().sum::<usize>(), 12);
            } else {
                assert_eq!(s.degree.iter().sum::<usize>(), 12);
            }
        }
    }

    proptest! {
        #[test]
        fn dyad_independent_change_ignores_rest_of_graph(seed in any::<u64>(), directed in any::<bool>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 9;
            let cats: Vec<String> = (0..n).map(|_| ["a", "b", "c"][rng.gen_range(0..3)].to_string()).collect();
            let nums: Vec<f64> = (0..n).map(|_| rng.gen_range(0..5) as f64).collect();
            let g1 = random_graph(&mut rng, n, directed, 0.3)
                .with_attribute("c", Attribute::Categorical(cats.clone())).unwrap()
                .with_attribute("x", Attribute::Numeric(nums.clone())).unwrap();
            let g2 = random_graph(&mut rng, n, directed, 0.6)
                .with_attribute("c", Attribute::Categorical(cats)).unwrap()
                .with_attribute("x", Attribute::Numeric(nums)).unwrap();
            let m = model(r#"edges + nodematch("c", diff = TRUE) + nodematch("c") + nodefactor("c") + absdiff("x")"#, &g1);
            prop_assert!(m.is_dyad_independent());
            for d in g1.dyads() {
                prop_assert_eq!(change_stats(&m, &g1, d), change_stats(&m, &g2, d));
            }
        }
    }
}
