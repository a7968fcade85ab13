use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Multivariate normal prior on the model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPrior {
    mean: DVector<f64>,
    sigma: DMatrix<f64>,
    lower: DMatrix<f64>,
}

/// Serializable form of a prior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub mean: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
}

impl GaussianPrior {
    pub fn new(mean: Vec<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        if sigma.nrows() != mean.len() || sigma.ncols() != mean.len() {
            return Err(Error::DimensionMismatch {
                what: "prior covariance".into(),
                expected: mean.len(),
                got: sigma.nrows(),
            });
        }
        if mean.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("prior mean".into()));
        }
        let lower = linalg::lower_cholesky(&sigma, "prior covariance")?;
        Ok(GaussianPrior { mean: DVector::from_vec(mean), sigma, lower })
    }

    /// `N(mean, variance · I)`.
    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Result<Self> {
        let d = mean.len();
        Self::new(mean, DMatrix::identity(d, d) * variance)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn log_density(&self, theta: &[f64]) -> f64 {
        let x = DVector::from_column_slice(theta) - &self.mean;
        linalg::normal_log_density(&self.lower, &x)
    }

    pub fn precision(&self) -> DMatrix<f64> {
        nalgebra::Cholesky::new(self.sigma.clone()).expect("checked at construction").inverse()
    }

    /// Marginal over the listed coordinates.
    pub fn marginal(&self, idx: &[usize]) -> Result<Self> {
        let mean = idx.iter().map(|&k| self.mean[k]).collect();
        let sigma = DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.sigma[(idx[a], idx[b])]);
        Self::new(mean, sigma)
    }

    pub fn to_spec(&self) -> PriorSpec {
        PriorSpec {
            mean: self.mean.iter().copied().collect(),
            sigma: (0..self.dim()).map(|i| self.sigma.row(i).iter().copied().collect()).collect(),
        }
    }

    pub fn from_spec(spec: &PriorSpec) -> Result<Self> {
        let d = spec.mean.len();
        if spec.sigma.len() != d || spec.sigma.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { what: "prior covariance".into(), expected: d, got: spec.sigma.len() });
        }
        Self::new(spec.mean.clone(), DMatrix::from_fn(d, d, |i, j| spec.sigma[i][j]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_covariances() {
        assert!(matches!(
            GaussianPrior::isotropic(vec![0.0, 0.0], -1.0),
            Err(Error::NotPositiveDefinite(_))
        ));
        assert!(matches!(
            GaussianPrior::new(vec![0.0; 3], DMatrix::identity(2, 2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn density_and_marginal() {
        let p = GaussianPrior::isotropic(vec![-4.0, 0.5, 0.5, 1.0], 4.0).unwrap();
        let lp = p.log_density(&[-4.0, 0.5, 0.5, 1.0]);
        let expect = -0.5 * (4.0 * (2.0 * std::f64::consts::PI).ln() + 4.0 * 4f64.ln());
        assert!((lp - expect).abs() < 1e-12);
        let m = p.marginal(&[0, 3]).unwrap();
        assert_eq!(m.mean().as_slice(), &[-4.0, 1.0]);
        assert_eq!(GaussianPrior::from_spec(&p.to_spec()).unwrap(), p);
    }
}
