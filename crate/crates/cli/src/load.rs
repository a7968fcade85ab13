//! Reading networks, priors and numeric lists from command-line inputs.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use bayes_ergm::graph::io::{read_attributes, read_dyad_pairs, NodeLabels};
use bayes_ergm::model::parse_formula;
use bayes_ergm::{validate, Dyad, GaussianPrior, Graph, Model};
use nalgebra::DMatrix;

use crate::args::{ModelArgs, NetworkArgs, PriorArgs};
use crate::error::{CliError, CliResult};

pub const DEFAULT_PRIOR_VARIANCE: f64 = 100.0;

pub fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(CliError::io(path))
}

fn source_name(path: &Path) -> String {
    path.display().to_string()
}

/// A loaded network with the labels used to read and write node names.
pub struct Network {
    pub graph: Graph,
    pub labels: NodeLabels,
}

pub fn network(
    edges: Option<&Path>,
    attrs: Option<&Path>,
    directed: bool,
    nodes: Option<usize>,
) -> CliResult<Network> {
    let (labels, attributes) = match attrs {
        Some(p) => {
            let (labels, a) = read_attributes(open(p)?, &source_name(p))?;
            if let Some(n) = nodes {
                if n != labels.len() {
                    return Err(CliError::Usage(format!(
                        "--nodes {n} disagrees with {} rows in {}",
                        labels.len(),
                        p.display()
                    )));
                }
            }
            (Some(labels), a)
        }
        None => (None, Default::default()),
    };
    let pairs = match edges {
        Some(p) => read_dyad_pairs(open(p)?, &source_name(p), labels.as_ref())?,
        None => Vec::new(),
    };
    let labels = match labels {
        Some(l) => l,
        None => {
            let seen = pairs.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0);
            let n = nodes.unwrap_or(seen);
            if n == 0 {
                return Err(CliError::Usage("cannot infer the node count; pass --nodes or --attrs".into()));
            }
            NodeLabels::numeric(n)
        }
    };
    let mut graph = Graph::from_edge_list(&pairs, labels.len(), directed)?;
    for (name, a) in attributes {
        graph.set_attribute(name, a)?;
    }
    Ok(Network { graph, labels })
}

pub fn network_args(a: &NetworkArgs) -> CliResult<Network> {
    network(Some(&a.network), a.attrs.as_deref(), a.directed, a.nodes)
}

/// Comma- or whitespace-separated reals.
pub fn parse_list(text: &str, what: &str) -> CliResult<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| CliError::Usage(format!("{what}: `{t}` is not a number")))
        })
        .collect()
}

pub fn model(a: &ModelArgs, g: &Graph) -> CliResult<Model> {
    let spec = parse_formula(&a.model)?;
    let offsets = match &a.offset_coef {
        Some(t) => parse_list(t, "--offset-coef")?,
        None => Vec::new(),
    };
    Ok(validate(&spec, g, &offsets)?)
}

/// `diag:v`, `diag:v1,...,vd`, or a path to a whitespace/comma separated
/// square matrix.
pub fn covariance(text: &str, d: usize, what: &str) -> CliResult<DMatrix<f64>> {
    if let Some(rest) = text.strip_prefix("diag:") {
        let v = parse_list(rest, what)?;
        return match v.len() {
            1 => Ok(DMatrix::identity(d, d) * v[0]),
            k if k == d => Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(v))),
            k => Err(bayes_ergm::Error::DimensionMismatch { what: what.into(), expected: d, got: k }.into()),
        };
    }
    let path = Path::new(text);
    let mut rows = Vec::new();
    for line in open(path)?.lines() {
        let line = line.map_err(CliError::io(path))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        rows.push(parse_list(t, what)?);
    }
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(bayes_ergm::Error::DimensionMismatch { what: what.into(), expected: d, got: rows.len() }.into());
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

pub fn prior(a: &PriorArgs, d: usize) -> CliResult<GaussianPrior> {
    let mean = match &a.prior_mean {
        Some(t) => parse_list(t, "--prior-mean")?,
        None => vec![0.0; d],
    };
    if mean.len() != d {
        return Err(bayes_ergm::Error::DimensionMismatch { what: "prior mean".into(), expected: d, got: mean.len() }.into());
    }
    let sigma = match &a.prior_sigma {
        Some(t) => covariance(t, d, "prior covariance")?,
        None => DMatrix::identity(d, d) * DEFAULT_PRIOR_VARIANCE,
    };
    Ok(GaussianPrior::new(mean, sigma)?)
}

/// Dyads listed in a file, or all dyads touching the listed nodes.
pub fn missing_dyads(
    g: &Graph,
    labels: &NodeLabels,
    file: Option<&Path>,
    nodes: Option<&str>,
) -> CliResult<Vec<Dyad>> {
    let mut out = Vec::new();
    if let Some(p) = file {
        for (i, j) in read_dyad_pairs(open(p)?, &source_name(p), Some(labels))? {
            out.push(Dyad::new(i, j, g.is_directed())?);
        }
    }
    if let Some(list) = nodes {
        let idx = list
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| labels.get(t).ok_or_else(|| CliError::Usage(format!("--missing-nodes: unknown node `{t}`"))))
            .collect::<CliResult<Vec<_>>>()?;
        out.extend(g.dyads_of_nodes(&idx));
    }
    if file.is_none() && nodes.is_none() {
        return Err(CliError::Usage("fit-missing needs --missing-file or --missing-nodes".into()));
    }
    out.sort_by_key(|d| (d.i, d.j));
    out.dedup();
    Ok(out)
}
