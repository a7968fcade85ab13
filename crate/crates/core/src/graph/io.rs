//! Plain-text network files.
//!
//! * edge lists and missing-dyad lists: one `a b` or `a,b` pair per line,
//!   optional header, `#` comments;
//! * attribute tables: delimited, header row required, first column is the
//!   node label.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use super::{Attribute, Graph};
use crate::error::{Error, Result};

/// Mapping between external node labels and 0-based indices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NodeLabels {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl NodeLabels {
    pub fn from_labels(labels: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(labels.len());
        for (k, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), k).is_some() {
                return Err(Error::Input {
                    source_name: "node labels".into(),
                    line: k + 2,
                    msg: format!("duplicate node label `{l}`"),
                });
            }
        }
        Ok(NodeLabels { labels, index })
    }

    /// Labels `0..n`.
    pub fn numeric(n: usize) -> Self {
        Self::from_labels((0..n).map(|i| i.to_string()).collect()).unwrap()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }
}

fn split_fields(line: &str) -> Vec<&str> {
    let sep: &[char] = if line.contains(',') {
        &[',']
    } else if line.contains('\t') {
        &['\t']
    } else {
        &[' ']
    };
    line.split(sep)
        .map(|s| s.trim().trim_matches('"'))
        .filter(|s| !s.is_empty() || sep == [','] || sep == ['\t'])
        .collect()
}

const HEADER_WORDS: &[&str] = &["from", "to", "source", "target", "i", "j", "ego", "alter", "tail", "head"];

/// Reads node pairs. With `labels`, endpoints are looked up by label;
/// otherwise they must be 0-based integer indices.
pub fn read_dyad_pairs<R: BufRead>(
    reader: R,
    source_name: &str,
    labels: Option<&NodeLabels>,
) -> Result<Vec<(usize, usize)>> {
    let mut pairs = Vec::new();
    let mut first = true;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let f = split_fields(t);
        let err = |msg: String| Error::Input { source_name: source_name.into(), line: lineno + 1, msg };
        if f.len() < 2 {
            return Err(err(format!("expected a node pair, found `{t}`")));
        }
        let resolve = |tok: &str| -> Option<usize> {
            match labels {
                Some(l) => l.get(tok),
                None => tok.parse().ok(),
            }
        };
        let (a, b) = (resolve(f[0]), resolve(f[1]));
        if first {
            first = false;
            let looks_header = HEADER_WORDS.contains(&f[0].to_ascii_lowercase().as_str())
                || (a.is_none() && b.is_none());
            if looks_header {
                continue;
            }
        }
        match (a, b) {
            (Some(a), Some(b)) => pairs.push((a, b)),
            _ => {
                let bad = if a.is_none() { f[0] } else { f[1] };
                return Err(err(format!("unknown node `{bad}`")));
            }
        }
    }
    Ok(pairs)
}

/// Reads an edge list into a graph with `n` nodes.
pub fn read_edge_list<R: BufRead>(
    reader: R,
    source_name: &str,
    n: usize,
    directed: bool,
    labels: Option<&NodeLabels>,
) -> Result<Graph> {
    let pairs = read_dyad_pairs(reader, source_name, labels)?;
    Graph::from_edge_list(&pairs, n, directed)
}

/// Reads an attribute table; returns the node labels in file order and the
/// typed attribute columns.
pub fn read_attributes<R: BufRead>(
    reader: R,
    source_name: &str,
) -> Result<(NodeLabels, BTreeMap<String, Attribute>)> {
    let mut lines = reader.lines().enumerate().filter_map(|(k, l)| match l {
        Ok(l) if l.trim().is_empty() || l.trim_start().starts_with('#') => None,
        other => Some((k, other)),
    });
    let (_, header) = lines.next().ok_or_else(|| Error::Input {
        source_name: source_name.into(),
        line: 1,
        msg: "missing header row".into(),
    })?;
    let header = header?;
    let names: Vec<String> = split_fields(header.trim()).iter().map(|s| s.to_string()).collect();
    if names.len() < 2 {
        return Err(Error::Input {
            source_name: source_name.into(),
            line: 1,
            msg: "header needs a label column and at least one attribute".into(),
        });
    }
    let mut labels = Vec::new();
    let mut columns: Vec<Vec<String>> = vec![Vec::new(); names.len() - 1];
    for (k, line) in lines {
        let line = line?;
        let f = split_fields(line.trim());
        if f.len() != names.len() {
            return Err(Error::Input {
                source_name: source_name.into(),
                line: k + 1,
                msg: format!("expected {} fields, found {}", names.len(), f.len()),
            });
        }
        labels.push(f[0].to_string());
        for (c, v) in f[1..].iter().enumerate() {
            columns[c].push(v.to_string());
        }
    }
    let labels = NodeLabels::from_labels(labels)?;
    let attrs = names[1..]
        .iter()
        .cloned()
        .zip(columns.into_iter().map(Attribute::from_strings))
        .collect();
    Ok((labels, attrs))
}

pub fn write_edge_list<W: Write>(mut w: W, g: &Graph, labels: Option<&NodeLabels>) -> Result<()> {
    writeln!(w, "from,to")?;
    for (i, j) in g.edge_list() {
        match labels {
            Some(l) => writeln!(w, "{},{}", l.label(i), l.label(j))?,
            None => writeln!(w, "{i},{j}")?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_pairs_with_header_and_commas() {
        let text = "from,to\n0,1\n# comment\n2 3\n\n1\t3\n";
        let p = read_dyad_pairs(text.as_bytes(), "t", None).unwrap();
        assert_eq!(p, vec![(0, 1), (2, 3), (1, 3)]);
    }

    #[test]
    fn labelled_pairs_and_attributes() {
        let attrs = "node,Office,seniority\nalice,Boston,3\nbob,Hartford,10\ncarol,Boston,7\n";
        let (labels, a) = read_attributes(attrs.as_bytes(), "attrs").unwrap();
        assert_eq!(labels.len(), 3);
        assert!(matches!(a["Office"], Attribute::Categorical(_)));
        assert!(matches!(a["seniority"], Attribute::Numeric(_)));
        let edges = "alice bob\ncarol alice\n";
        let g = read_edge_list(edges.as_bytes(), "edges", 3, false, Some(&labels)).unwrap();
        assert_eq!(g.edge_list(), vec![(0, 1), (0, 2)]);
        let bad = read_dyad_pairs("alice bob\nalice dave\n".as_bytes(), "edges", Some(&labels));
        assert!(matches!(bad, Err(Error::Input { line: 2, .. })));
        let mut out = Vec::new();
        write_edge_list(&mut out, &g, Some(&labels)).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "from,to\nalice,bob\nalice,carol\n");
    }

    #[test]
    fn attribute_row_length_checked() {
        let attrs = "node,a\nx,1\ny\n";
        assert!(matches!(read_attributes(attrs.as_bytes(), "attrs"), Err(Error::Input { line: 3, .. })));
    }
}
