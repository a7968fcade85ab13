//! Binary network data model: dense bit-matrix adjacency, node attributes
//! and an observation mask for missing dyads.

pub mod io;

pub use io::{read_attributes, read_dyad_pairs, read_edge_list, write_edge_list, NodeLabels};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A node pair. Undirected dyads are stored with `i < j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Dyad {
    pub i: usize,
    pub j: usize,
}

impl Dyad {
    pub fn new(i: usize, j: usize, directed: bool) -> Result<Self> {
        if i == j {
            return Err(Error::SelfLoop(i));
        }
        Ok(if directed || i < j {
            Dyad { i, j }
        } else {
            Dyad { i: j, j: i }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Attribute {
    Categorical(Vec<String>),
    Numeric(Vec<f64>),
}

impl Attribute {
    pub fn len(&self) -> usize {
        match self {
            Attribute::Categorical(v) => v.len(),
            Attribute::Numeric(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Types a column of raw strings: numeric when every entry parses.
    pub fn from_strings(values: Vec<String>) -> Self {
        let parsed: Option<Vec<f64>> = values.iter().map(|v| v.trim().parse().ok()).collect();
        match parsed {
            Some(nums) if !values.is_empty() => Attribute::Numeric(nums),
            _ => Attribute::Categorical(values),
        }
    }

    /// Distinct values in model order (numeric order for numbers, lexical
    /// otherwise) and the per-node index into that list.
    pub fn levels(&self) -> (Vec<String>, Vec<u32>) {
        match self {
            Attribute::Categorical(v) => {
                let mut lv: Vec<String> = v.clone();
                lv.sort();
                lv.dedup();
                let codes = v.iter().map(|x| lv.binary_search(x).unwrap() as u32).collect();
                (lv, codes)
            }
            Attribute::Numeric(v) => {
                let mut lv: Vec<f64> = v.clone();
                lv.sort_by(|a, b| a.total_cmp(b));
                lv.dedup();
                let codes = v
                    .iter()
                    .map(|x| lv.binary_search_by(|p| p.total_cmp(x)).unwrap() as u32)
                    .collect();
                (lv.into_iter().map(format_number).collect(), codes)
            }
        }
    }
}

pub(crate) fn format_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

#[inline]
pub(crate) fn popcount_and(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n: usize,
    directed: bool,
    words: usize,
    out: Vec<u64>,
    // Transposed adjacency; empty for undirected graphs.
    inc: Vec<u64>,
    out_deg: Vec<u32>,
    in_deg: Vec<u32>,
    edges: usize,
    // 1 = unobserved.
    missing: Vec<u64>,
    n_missing: usize,
    attributes: BTreeMap<String, Attribute>,
}

impl Graph {
    pub fn empty(n: usize, directed: bool) -> Self {
        let words = n.div_ceil(64).max(1);
        Graph {
            n,
            directed,
            words,
            out: vec![0; n * words],
            inc: if directed { vec![0; n * words] } else { Vec::new() },
            out_deg: vec![0; n],
            in_deg: vec![0; n],
            edges: 0,
            missing: vec![0; n * words],
            n_missing: 0,
            attributes: BTreeMap::new(),
        }
    }

    /// Builds a graph from node pairs. Repeated pairs are accepted once and
    /// reported through the log.
    pub fn from_edge_list(edges: &[(usize, usize)], n: usize, directed: bool) -> Result<Self> {
        let mut g = Graph::empty(n, directed);
        for &(i, j) in edges {
            for k in [i, j] {
                if k >= n {
                    return Err(Error::NodeOutOfRange { index: k, n });
                }
            }
            let d = Dyad::new(i, j, directed)?;
            if g.has_edge(d.i, d.j) {
                log::warn!("duplicate edge ({i}, {j}) ignored");
                continue;
            }
            g.set_edge(d.i, d.j, true);
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    pub fn dyad_count(&self) -> usize {
        if self.directed {
            self.n * (self.n.saturating_sub(1))
        } else {
            self.n * (self.n.saturating_sub(1)) / 2
        }
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.out[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    #[inline]
    pub fn out_row(&self, i: usize) -> &[u64] {
        &self.out[i * self.words..(i + 1) * self.words]
    }

    #[inline]
    pub fn in_row(&self, i: usize) -> &[u64] {
        if self.directed {
            &self.inc[i * self.words..(i + 1) * self.words]
        } else {
            self.out_row(i)
        }
    }

    #[inline]
    pub fn out_degree(&self, i: usize) -> u32 {
        self.out_deg[i]
    }

    #[inline]
    pub fn in_degree(&self, i: usize) -> u32 {
        self.in_deg[i]
    }

    /// Degree of node `i` in an undirected graph.
    #[inline]
    pub fn degree(&self, i: usize) -> u32 {
        self.out_deg[i]
    }

    pub fn out_neighbors(&self, i: usize) -> BitIter<'_> {
        BitIter::new(self.out_row(i))
    }

    pub fn in_neighbors(&self, i: usize) -> BitIter<'_> {
        BitIter::new(self.in_row(i))
    }

    /// Sets the state of dyad `(i, j)`, mirroring for undirected graphs.
    pub fn set_edge(&mut self, i: usize, j: usize, value: bool) {
        debug_assert!(i != j);
        if self.has_edge(i, j) == value {
            return;
        }
        self.flip(i, j);
    }

    #[inline]
    fn flip(&mut self, i: usize, j: usize) {
        let w = self.words;
        let on = !self.has_edge(i, j);
        self.out[i * w + j / 64] ^= 1 << (j % 64);
        if self.directed {
            self.inc[j * w + i / 64] ^= 1 << (i % 64);
            if on {
                self.out_deg[i] += 1;
                self.in_deg[j] += 1;
            } else {
                self.out_deg[i] -= 1;
                self.in_deg[j] -= 1;
            }
        } else {
            self.out[j * w + i / 64] ^= 1 << (i % 64);
            if on {
                self.out_deg[i] += 1;
                self.out_deg[j] += 1;
            } else {
                self.out_deg[i] -= 1;
                self.out_deg[j] -= 1;
            }
        }
        if on {
            self.edges += 1;
        } else {
            self.edges -= 1;
        }
    }

    /// Flips the dyad in place.
    #[inline]
    pub fn toggle_in_place(&mut self, d: Dyad) {
        self.flip(d.i, d.j);
    }

    /// Returns a copy with the dyad flipped.
    pub fn toggle(&self, d: Dyad) -> Result<Graph> {
        if d.i == d.j {
            return Err(Error::SelfLoop(d.i));
        }
        self.check_node(d.i)?;
        self.check_node(d.j)?;
        let mut g = self.clone();
        g.flip(d.i, d.j);
        Ok(g)
    }

    fn check_node(&self, i: usize) -> Result<()> {
        if i >= self.n {
            Err(Error::NodeOutOfRange { index: i, n: self.n })
        } else {
            Ok(())
        }
    }

    /// All dyads in canonical order (`i < j` when undirected).
    pub fn dyads(&self) -> impl Iterator<Item = Dyad> + '_ {
        let n = self.n;
        let directed = self.directed;
        (0..n).flat_map(move |i| {
            let start = if directed { 0 } else { i + 1 };
            (start..n).filter(move |&j| j != i).map(move |j| Dyad { i, j })
        })
    }

    /// Canonical edge list, sorted.
    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edges);
        for i in 0..self.n {
            for j in self.out_neighbors(i) {
                if self.directed || i < j {
                    out.push((i, j));
                }
            }
        }
        out
    }

    #[inline]
    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.missing[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    pub fn missing_count(&self) -> usize {
        self.n_missing
    }

    pub fn has_missing(&self) -> bool {
        self.n_missing > 0
    }

    /// Unobserved dyads in canonical order.
    pub fn missing_dyads(&self) -> Vec<Dyad> {
        self.dyads().filter(|d| self.is_missing(d.i, d.j)).collect()
    }

    /// Marks the listed dyads unobserved. Their current state is kept as the
    /// working imputation.
    pub fn apply_missing_mask(&self, missing: &[Dyad]) -> Result<Graph> {
        let mut g = self.clone();
        let w = g.words;
        for d in missing {
            if d.i == d.j {
                return Err(Error::SelfLoop(d.i));
            }
            g.check_node(d.i)?;
            g.check_node(d.j)?;
            let (i, j) = (d.i, d.j);
            if g.is_missing(i, j) {
                continue;
            }
            g.missing[i * w + j / 64] |= 1 << (j % 64);
            if !g.directed {
                g.missing[j * w + i / 64] |= 1 << (i % 64);
            }
            g.n_missing += 1;
        }
        Ok(g)
    }

    /// Every dyad touching any of `nodes` (both directions when directed).
    pub fn dyads_of_nodes(&self, nodes: &[usize]) -> Vec<Dyad> {
        self.dyads()
            .filter(|d| nodes.contains(&d.i) || nodes.contains(&d.j))
            .collect()
    }

    pub fn observed_dyad_count(&self) -> usize {
        self.dyad_count() - self.n_missing
    }

    /// Observed edges over observed dyads.
    pub fn density(&self) -> Result<f64> {
        let observed = self.observed_dyad_count();
        if observed == 0 {
            return Err(Error::NoObservedDyads);
        }
        let edges = self
            .dyads()
            .filter(|d| !self.is_missing(d.i, d.j) && self.has_edge(d.i, d.j))
            .count();
        Ok(edges as f64 / observed as f64)
    }

    pub fn attributes(&self) -> &BTreeMap<String, Attribute> {
        &self.attributes
    }

    pub fn attribute(&self, name: &str) -> Option<&Attribute> {
        self.attributes.get(name)
    }

    pub fn set_attribute(&mut self, name: impl Into<String>, value: Attribute) -> Result<()> {
        if value.len() != self.n {
            return Err(Error::DimensionMismatch {
                what: "attribute length".into(),
                expected: self.n,
                got: value.len(),
            });
        }
        self.attributes.insert(name.into(), value);
        Ok(())
    }

    pub fn with_attribute(mut self, name: impl Into<String>, value: Attribute) -> Result<Self> {
        self.set_attribute(name, value)?;
        Ok(self)
    }

    /// Copies the dyad states of `other` (same shape) without reallocating.
    pub fn copy_state_from(&mut self, other: &Graph) {
        debug_assert_eq!(self.n, other.n);
        self.out.copy_from_slice(&other.out);
        self.inc.copy_from_slice(&other.inc);
        self.out_deg.copy_from_slice(&other.out_deg);
        self.in_deg.copy_from_slice(&other.in_deg);
        self.edges = other.edges;
    }

    /// Same nodes, attributes and mask; no edges.
    pub fn cleared(&self) -> Graph {
        let mut g = self.clone();
        g.out.iter_mut().for_each(|w| *w = 0);
        g.inc.iter_mut().for_each(|w| *w = 0);
        g.out_deg.iter_mut().for_each(|d| *d = 0);
        g.in_deg.iter_mut().for_each(|d| *d = 0);
        g.edges = 0;
        g
    }
}

/// Iterator over set bits of an adjacency row.
pub struct BitIter<'a> {
    words: &'a [u64],
    idx: usize,
    cur: u64,
}

impl<'a> BitIter<'a> {
    pub fn new(words: &'a [u64]) -> Self {
        BitIter { words, idx: 0, cur: words.first().copied().unwrap_or(0) }
    }
}

impl Iterator for BitIter<'_> {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        loop {
            if self.cur != 0 {
                let b = self.cur.trailing_zeros() as usize;
                self.cur &= self.cur - 1;
                return Some(self.idx * 64 + b);
            }
            self.idx += 1;
            if self.idx >= self.words.len() {
                return None;
            }
            self.cur = self.words[self.idx];
        }
    }
}
