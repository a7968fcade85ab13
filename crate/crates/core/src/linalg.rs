//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    m.is_square()
        && (0..m.nrows()).all(|i| {
            (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol * (1.0 + m[(i, j)].abs()))
        })
}

/// Lower Cholesky factor `L` with `L Lᵀ = m`.
pub fn lower_cholesky(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if !is_symmetric(m, 1e-9) || m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NotPositiveDefinite(what.into()));
    }
    nalgebra::Cholesky::new(m.clone())
        .map(|c| c.l())
        .ok_or_else(|| Error::NotPositiveDefinite(what.into()))
}

/// Upper Cholesky factor `U` with `Uᵀ U = m`.
pub fn upper_cholesky(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    Ok(lower_cholesky(m, what)?.transpose())
}

pub fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    lower_cholesky(m, what)?;
    Ok(nalgebra::Cholesky::new(m.clone()).unwrap().inverse())
}

/// Draws `L z` with `z` standard normal.
pub fn correlated_normal<R: Rng + ?Sized>(lower: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
    let z = DVector::from_fn(lower.nrows(), |_, _| rng.sample::<f64, _>(StandardNormal));
    lower * z
}

/// Log density of `N(0, L Lᵀ)` at `x`.
pub fn normal_log_density(lower: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    let d = x.len() as f64;
    let z = lower.solve_lower_triangular(x).expect("triangular factor is nonsingular");
    let log_det: f64 = lower.diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
    -0.5 * (d * (2.0 * std::f64::consts::PI).ln() + log_det + z.norm_squared())
}

/// Sample mean and covariance of row vectors.
pub fn mean_and_covariance(rows: &[Vec<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let d = rows.first().map_or(0, Vec::len);
    let m = rows.len() as f64;
    let mut mean = DVector::zeros(d);
    for r in rows {
        for k in 0..d {
            mean[k] += r[k];
        }
    }
    mean /= m;
    let mut cov = DMatrix::zeros(d, d);
    for r in rows {
        for a in 0..d {
            let da = r[a] - mean[a];
            for b in 0..=a {
                cov[(a, b)] += da * (r[b] - mean[b]);
            }
        }
    }
    let denom = (m - 1.0).max(1.0);
    for a in 0..d {
        for b in 0..=a {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    (mean, cov)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_factors_reconstruct() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0]);
        let u = upper_cholesky(&m, "m").unwrap();
        assert!((u.transpose() * &u - &m).abs().max() < 1e-12);
        assert!(u[(1, 0)] == 0.0 && u[(2, 0)] == 0.0 && u[(2, 1)] == 0.0);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(lower_cholesky(&bad, "bad").is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(lower_cholesky(&asym, "asym").is_err());
    }

    #[test]
    fn standard_normal_density_at_origin() {
        let l = DMatrix::identity(2, 2);
        let v = normal_log_density(&l, &DVector::zeros(2));
        assert!((v + (2.0 * std::f64::consts::PI).ln()).abs() < 1e-12);
    }
}
