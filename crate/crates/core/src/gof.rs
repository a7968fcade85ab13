//! Posterior-predictive goodness of fit.
//!
//! Networks are simulated at parameters drawn from a posterior sample and
//! their degree, edgewise-shared-partner and geodesic distributions are
//! compared with those of the observed network. All distributions are
//! reported as proportions.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::Model;
use crate::par::{self, Execution};
use crate::posterior::{quantile_sorted, PosteriorSample, QUANTILE_LEVELS};
use crate::rng::{stream, Domain};
use crate::sampler::TieSampler;
use crate::stats::{gof_stats, GofDistributions};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GofStart {
    #[default]
    Observed,
    Empty,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GofSettings {
    pub sample_size: usize,
    pub aux_iters: usize,
    pub n_deg: usize,
    pub n_ideg: usize,
    pub n_odeg: usize,
    /// Geodesic bins: lengths `1..n_dist` plus one unreachable bin.
    pub n_dist: usize,
    pub n_esp: usize,
    pub start: GofStart,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for GofSettings {
    fn default() -> Self {
        GofSettings {
            sample_size: 100,
            aux_iters: 10000,
            n_deg: 10,
            n_ideg: 10,
            n_odeg: 10,
            n_dist: 10,
            n_esp: 10,
            start: GofStart::Observed,
            seed: 0,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GofBin {
    pub label: String,
    pub observed: f64,
    pub quantiles: [f64; 5],
}

impl GofBin {
    /// Whether the observed value lies in the 2.5%–97.5% band.
    pub fn covered(&self) -> bool {
        self.quantiles[0] <= self.observed && self.observed <= self.quantiles[4]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GofFamily {
    pub name: String,
    pub bins: Vec<GofBin>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub directed: bool,
    pub families: Vec<GofFamily>,
    pub settings: GofSettings,
}

impl GofReport {
    pub fn family(&self, name: &str) -> Option<&GofFamily> {
        self.families.iter().find(|f| f.name == name)
    }

    /// Fraction of bins whose observed value is inside the 95% band.
    pub fn coverage(&self) -> f64 {
        let bins: Vec<&GofBin> = self.families.iter().flat_map(|f| &f.bins).collect();
        bins.iter().filter(|b| b.covered()).count() as f64 / bins.len().max(1) as f64
    }

    /// Long format: `family,bin,observed,q2.5,q25,q50,q75,q97.5`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "family,bin,observed,q2.5,q25,q50,q75,q97.5")?;
        for f in &self.families {
            for b in &f.bins {
                write!(w, "{},{},{}", f.name, b.label, b.observed)?;
                for q in b.quantiles {
                    write!(w, ",{q}")?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }

    /// Text rendering: one line per bin with the observed value and the
    /// simulated 95% band.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for f in &self.families {
            out.push_str(&format!("{}\n", f.name));
            for b in &f.bins {
                let mark = if b.covered() { ' ' } else { '*' };
                out.push_str(&format!(
                    "  {:>4} {mark} obs {:.4}  [{:.4}, {:.4}]  median {:.4}\n",
                    b.label, b.observed, b.quantiles[0], b.quantiles[4], b.quantiles[2]
                ));
            }
        }
        out
    }
}

fn proportions(counts: &[usize], total: usize, bins: usize) -> Vec<f64> {
    let total = total.max(1) as f64;
    (0..bins).map(|k| counts.get(k).copied().unwrap_or(0) as f64 / total).collect()
}

fn families(d: &GofDistributions, n: usize, s: &GofSettings) -> Vec<(&'static str, Vec<String>, Vec<f64>)> {
    let degree_labels = |bins: usize| (0..bins).map(|k| k.to_string()).collect::<Vec<_>>();
    let mut out = Vec::new();
    if d.directed {
        out.push(("idegree", degree_labels(s.n_ideg), proportions(&d.in_degree, n, s.n_ideg)));
        out.push(("odegree", degree_labels(s.n_odeg), proportions(&d.out_degree, n, s.n_odeg)));
    } else {
        out.push(("degree", degree_labels(s.n_deg), proportions(&d.degree, n, s.n_deg)));
    }
    let edges: usize = d.esp.iter().sum();
    out.push(("esp", degree_labels(s.n_esp), proportions(&d.esp, edges, s.n_esp)));
    let pairs = d.geodesic.iter().sum::<usize>() + d.unreachable;
    let finite = s.n_dist.saturating_sub(1);
    let mut labels: Vec<String> = (1..=finite).map(|k| k.to_string()).collect();
    let mut values: Vec<f64> = (1..=finite)
        .map(|k| d.geodesic.get(k).copied().unwrap_or(0) as f64 / pairs.max(1) as f64)
        .collect();
    if s.n_dist > 0 {
        labels.push("NR".into());
        values.push(d.unreachable as f64 / pairs.max(1) as f64);
    }
    out.push(("distance", labels, values));
    out
}

/// Posterior-predictive check of `sample` against `g`.
pub fn bgof(sample: &PosteriorSample, model: &Model, g: &Graph, settings: &GofSettings) -> Result<GofReport> {
    if settings.sample_size < 2 {
        return Err(Error::InvalidSetting("sample_size must be at least 2".into()));
    }
    if sample.is_empty() {
        return Err(Error::InvalidSetting("posterior sample is empty".into()));
    }
    if sample.dim() != model.free_dim() {
        return Err(Error::DimensionMismatch { what: "posterior sample".into(), expected: model.free_dim(), got: sample.dim() });
    }
    let mut picker = stream(settings.seed, Domain::Gof, u64::MAX);
    let picks: Vec<usize> = (0..settings.sample_size).map(|_| picker.gen_range(0..sample.len())).collect();
    let start = match settings.start {
        GofStart::Observed => g.clone(),
        GofStart::Empty => g.cleared(),
    };
    let n = g.n();
    let simulated = par::map_range(settings.execution, settings.sample_size, |i| -> Result<Vec<Vec<f64>>> {
        let theta = model.full_theta(&sample.draws[picks[i]]);
        let mut sampler = TieSampler::new(model, &theta)?;
        let mut rng = stream(settings.seed, Domain::Gof, i as u64);
        let mut y = start.clone();
        sampler.run(&mut y, settings.aux_iters, &mut rng);
        Ok(families(&gof_stats(&y), n, settings).into_iter().map(|f| f.2).collect())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let observed = families(&gof_stats(g), n, settings);
    let families = observed
        .into_iter()
        .enumerate()
        .map(|(fi, (name, labels, obs))| GofFamily {
            name: name.to_string(),
            bins: labels
                .into_iter()
                .zip(obs)
                .enumerate()
                .map(|(b, (label, observed))| {
                    let mut values: Vec<f64> = simulated.iter().map(|s| s[fi][b]).collect();
                    values.sort_by(f64::total_cmp);
                    GofBin { label, observed, quantiles: QUANTILE_LEVELS.map(|p| quantile_sorted(&values, p)) }
                })
                .collect(),
        })
        .collect();
    Ok(GofReport { directed: g.is_directed(), families, settings: settings.clone() })
}
