//! Fréchet distance between Gaussian fits of two feature sets (the FID statistic).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurize::FeatureSet;

/// Largest tolerated `|m[i][j] - m[j][i]|`, relative to `max(1, max |m|)`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;
/// Negative residue of the squared distance still treated as rounding noise.
pub const NEGATIVE_NOISE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub n: usize,
}

impl GaussianStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Column means and the unbiased (n − 1) sample covariance, symmetrized.
pub fn gaussian_stats(features: &FeatureSet) -> Result<GaussianStats> {
    let n = features.len();
    if n < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 rows for a covariance, got {n}"
        )));
    }
    let d = features.dim();
    let mut mean = DVector::zeros(d);
    for row in features.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean /= n as f64;

    let mut centered = DMatrix::zeros(n, d);
    for (i, row) in features.rows().enumerate() {
        for j in 0..d {
            centered[(i, j)] = row[j] - mean[j];
        }
    }
    let mut cov = centered.transpose() * &centered / (n as f64 - 1.0);
    symmetrize(&mut cov);
    Ok(GaussianStats { mean, cov, n })
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::invalid(format!(
            "matrix is {}x{}, not square",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax().max(1.0);
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if worst > SYMMETRY_TOLERANCE * scale {
        return Err(Error::invalid(format!(
            "matrix is not symmetric (max deviation {worst:e})"
        )));
    }
    Ok(())
}

/// Principal square root of a symmetric positive semidefinite matrix.
/// Negative eigenvalues (rounding noise) are clipped to zero.
pub fn matrix_sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(m)?;
    let mut sym = m.clone();
    symmetrize(&mut sym);
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    let mut root = v * DMatrix::from_diagonal(&roots) * v.transpose();
    symmetrize(&mut root);
    Ok(root)
}

/// Squared Fréchet distance
/// `‖μa − μb‖² + Tr(Σa + Σb − 2 (Σa^½ Σb Σa^½)^½)`.
///
/// The congruence form has the same trace as `(Σa Σb)^½` and keeps every
/// eigenproblem symmetric.
pub fn frechet_distance(a: &GaussianStats, b: &GaussianStats) -> Result<f64> {
    if a.dim() != b.dim() || a.cov.nrows() != a.dim() || b.cov.nrows() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    let mean_term = (&a.mean - &b.mean).norm_squared();
    let sqrt_a = matrix_sqrt_psd(&a.cov)?;
    let mut inner = &sqrt_a * &b.cov * &sqrt_a;
    symmetrize(&mut inner);
    let cross = matrix_sqrt_psd(&inner)?;
    let trace_term = a.cov.trace() + b.cov.trace() - 2.0 * cross.trace();
    let d2 = mean_term + trace_term;
    if d2 >= 0.0 {
        return Ok(d2);
    }
    let scale = 1.0 + a.cov.trace().abs() + b.cov.trace().abs() + mean_term;
    if d2 >= -NEGATIVE_NOISE_FLOOR * scale {
        Ok(0.0)
    } else {
        Err(Error::Numerical(format!(
            "squared Fréchet distance came out as {d2}"
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrechetReport {
    pub fid: f64,
    pub dim: usize,
    pub n_a: usize,
    pub n_b: usize,
    pub mean_term: f64,
    pub trace_term: f64,
}

pub fn frechet_report(a: &FeatureSet, b: &FeatureSet) -> Result<FrechetReport> {
    let sa = gaussian_stats(a)?;
    let sb = gaussian_stats(b)?;
    let fid = frechet_distance(&sa, &sb)?;
    let mean_term = (&sa.mean - &sb.mean).norm_squared();
    Ok(FrechetReport {
        fid,
        dim: sa.dim(),
        n_a: sa.n,
        n_b: sb.n,
        mean_term,
        trace_term: fid - mean_term,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurize::FeatureOrigin;

    fn set(rows: Vec<Vec<f64>>) -> FeatureSet {
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        FeatureSet::new(ids, rows, FeatureOrigin::External).unwrap()
    }

    fn stats_1d(mean: f64, var: f64) -> GaussianStats {
        GaussianStats {
            mean: DVector::from_element(1, mean),
            cov: DMatrix::from_element(1, 1, var),
            n: 2,
        }
    }

    #[test]
    fn stats_by_hand() {
        let s = gaussian_stats(&set(vec![vec![0.0, 0.0], vec![2.0, 2.0]])).unwrap();
        assert_eq!(s.mean.as_slice(), [1.0, 1.0]);
        assert_eq!(s.cov, DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 2.0]));
    }

    #[test]
    fn identical_rows_zero_cov() {
        let s = gaussian_stats(&set(vec![vec![1.0, -3.0]; 5])).unwrap();
        assert!(s.cov.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_row_rejected() {
        assert!(gaussian_stats(&set(vec![vec![1.0]])).is_err());
    }

    #[test]
    fn sqrt_examples() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert!((matrix_sqrt_psd(&id).unwrap() - &id).amax() < 1e-14);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]));
        let r = matrix_sqrt_psd(&d).unwrap();
        assert!((r - DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]))).amax() < 1e-14);
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let r = matrix_sqrt_psd(&m).unwrap();
        assert!((&r * &r - &m).amax() < 1e-8);
    }

    #[test]
    fn asymmetric_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matrix_sqrt_psd(&m).is_err());
    }

    #[test]
    fn one_dimensional_closed_form() {
        let d2 = frechet_distance(&stats_1d(0.0, 1.0), &stats_1d(3.0, 4.0)).unwrap();
        assert!((d2 - 10.0).abs() < 1e-12);
    }

    #[test]
    fn identical_is_zero() {
        let s = gaussian_stats(&set(vec![vec![0.0, 1.0], vec![2.0, 0.5], vec![1.0, 1.0]])).unwrap();
        assert!(frechet_distance(&s, &s).unwrap().abs() < 1e-6);
    }

    #[test]
    fn dimension_mismatch() {
        let a = stats_1d(0.0, 1.0);
        let b = gaussian_stats(&set(vec![vec![0.0, 1.0], vec![2.0, 0.5]])).unwrap();
        assert!(matches!(
            frechet_distance(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
