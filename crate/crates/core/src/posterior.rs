//! Pooled posterior samples and their summary table.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::Graph;

/// Post-burn-in draws of the free coordinates, stored chain-major: row
/// `h * iterations + k` is iteration `k` of chain `h`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct PosteriorSample {
    pub names: Vec<String>,
    pub nchains: usize,
    pub iterations: usize,
    pub draws: Vec<Vec<f64>>,
    pub acceptance_rate: f64,
    #[serde(skip)]
    pub imputed_networks: Vec<Graph>,
}

impl PosteriorSample {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn chain_of(&self, row: usize) -> usize {
        row / self.iterations.max(1)
    }

    pub fn iteration_of(&self, row: usize) -> usize {
        row % self.iterations.max(1)
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.draws.iter().map(|r| r[k]).collect()
    }

    pub fn chain(&self, h: usize) -> &[Vec<f64>] {
        &self.draws[h * self.iterations..(h + 1) * self.iterations]
    }

    pub fn means(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| mean(&self.column(k))).collect()
    }
}

pub const QUANTILE_LEVELS: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinateSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub naive_se: f64,
    pub ts_se: f64,
    pub quantiles: [f64; 5],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub coordinates: Vec<CoordinateSummary>,
    pub draws: usize,
    pub acceptance_rate: f64,
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_sd(xs: &[f64], m: f64) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Linear interpolation between order statistics (`(n−1)p` positions).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Standard error of the mean from non-overlapping batch means with
/// `⌊√N⌋` batches.
pub fn batch_means_se(xs: &[f64]) -> f64 {
    let n = xs.len();
    let b = (n as f64).sqrt().floor() as usize;
    if b < 2 {
        return 0.0;
    }
    let m = n / b;
    let used = &xs[..b * m];
    let overall = mean(used);
    let var_b = used
        .chunks(m)
        .map(|c| (mean(c) - overall).powi(2))
        .sum::<f64>()
        / (b - 1) as f64;
    (m as f64 * var_b / (b * m) as f64).sqrt()
}

pub fn summarize_column(name: &str, xs: &[f64]) -> CoordinateSummary {
    let m = mean(xs);
    let sd = sample_sd(xs, m);
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    CoordinateSummary {
        name: name.to_string(),
        mean: m,
        sd,
        naive_se: sd / (xs.len() as f64).sqrt(),
        ts_se: batch_means_se(xs),
        quantiles: QUANTILE_LEVELS.map(|p| quantile_sorted(&sorted, p)),
    }
}

/// Per-coordinate summary of a nonempty sample.
pub fn summarize(sample: &PosteriorSample) -> SummaryTable {
    assert!(!sample.is_empty(), "summarize needs a nonempty sample");
    SummaryTable {
        coordinates: (0..sample.dim())
            .map(|k| summarize_column(&sample.names[k], &sample.column(k)))
            .collect(),
        draws: sample.len(),
        acceptance_rate: sample.acceptance_rate,
    }
}

impl fmt::Display for SummaryTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.coordinates.iter().map(|c| c.name.len()).max().unwrap_or(0).max(9);
        writeln!(
            f,
            "{:<width$} {:>10} {:>10} {:>10} {:>10}",
            "", "Mean", "SD", "Naive SE", "Time-series SE"
        )?;
        for c in &self.coordinates {
            writeln!(f, "{:<width$} {:>10.4} {:>10.4} {:>10.6} {:>10.6}", c.name, c.mean, c.sd, c.naive_se, c.ts_se)?;
        }
        writeln!(f)?;
        writeln!(
            f,
            "{:<width$} {:>10} {:>10} {:>10} {:>10} {:>10}",
            "", "2.5%", "25%", "50%", "75%", "97.5%"
        )?;
        for c in &self.coordinates {
            let q = c.quantiles;
            writeln!(
                f,
                "{:<width$} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
                c.name, q[0], q[1], q[2], q[3], q[4]
            )?;
        }
        writeln!(f)?;
        write!(f, "Acceptance rate: {:.3}", self.acceptance_rate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn sample(col: Vec<f64>) -> PosteriorSample {
        PosteriorSample {
            names: vec!["a".into()],
            nchains: 1,
            iterations: col.len(),
            draws: col.into_iter().map(|x| vec![x]).collect(),
            acceptance_rate: 0.5,
            imputed_networks: vec![],
        }
    }

    #[test]
    fn constant_sample() {
        let t = summarize(&sample(vec![1.5; 100]));
        let c = &t.coordinates[0];
        assert_eq!(c.sd, 0.0);
        assert!(c.quantiles.iter().all(|&q| q == 1.5));
    }

    #[test]
    fn quantiles_interpolate() {
        let xs: Vec<f64> = (1..=5).map(f64::from).collect();
        assert_eq!(quantile_sorted(&xs, 0.5), 3.0);
        assert_eq!(quantile_sorted(&xs, 0.25), 2.0);
        assert!((quantile_sorted(&xs, 0.025) - 1.1).abs() < 1e-12);
    }

    #[test]
    fn iid_normal() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let c = summarize(&sample(xs)).coordinates.remove(0);
        assert!(c.mean.abs() < 0.02);
        assert!((c.ts_se / c.naive_se - 1.0).abs() < 0.25);
    }

    #[test]
    fn ar1_inflation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let rho: f64 = 0.9;
        let mut x = 0.0;
        let xs: Vec<f64> = (0..200_000)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                x = rho * x + e;
                x
            })
            .collect();
        let c = summarize(&sample(xs)).coordinates.remove(0);
        let expected = ((1.0 + rho) / (1.0 - rho)).sqrt();
        assert!((c.ts_se / c.naive_se / expected - 1.0).abs() < 0.15, "{}", c.ts_se / c.naive_se);
    }
}
