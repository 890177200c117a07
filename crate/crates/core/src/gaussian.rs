//! Gaussian component parameters and density evaluation.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Chol, SymMat};

const LN_2PI: f64 = 1.837_877_066_409_345_4;

/// Covariance structure of a Gaussian component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Covariance {
    /// Full symmetric positive-definite matrix.
    Full(SymMat),
    /// Diagonal covariance (mean-field family).
    Diagonal(Vec<f64>),
    /// Spherical covariance σ²I frozen for the whole run (gradient-rule
    /// families keep their covariances fixed).
    FixedIso(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub mean: Vec<f64>,
    pub cov: Covariance,
}

impl GaussianParams {
    pub fn iso(mean: Vec<f64>, sigma2: f64) -> Self {
        let d = mean.len();
        GaussianParams {
            mean,
            cov: Covariance::Full(SymMat::scaled_identity(d, sigma2)),
        }
    }

    pub fn fixed_iso(mean: Vec<f64>, sigma2: f64) -> Self {
        GaussianParams {
            mean,
            cov: Covariance::FixedIso(sigma2),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Materialises the covariance as a dense symmetric matrix.
    pub fn cov_matrix(&self) -> SymMat {
        match &self.cov {
            Covariance::Full(m) => m.clone(),
            Covariance::Diagonal(d) => SymMat::from_diag(d),
            Covariance::FixedIso(s2) => SymMat::scaled_identity(self.mean.len(), *s2),
        }
    }

    /// Validates symmetry/positivity and returns a density evaluator.
    pub fn prepare(&self) -> Result<PreparedGaussian> {
        let d = self.dim();
        match &self.cov {
            Covariance::Full(m) => {
                if m.dim() != d {
                    return Err(Error::Config("covariance dimension mismatch".into()));
                }
                if m.max_asymmetry() > 1e-12 {
                    return Err(Error::NotPositiveDefinite("covariance asymmetric".into()));
                }
                let chol = m.cholesky()?;
                let log_norm = -0.5 * (d as f64) * LN_2PI - 0.5 * chol.log_det();
                Ok(PreparedGaussian {
                    mean: self.mean.clone(),
                    shape: PreparedShape::Full(chol),
                    log_norm,
                })
            }
            Covariance::Diagonal(v) => {
                if v.len() != d {
                    return Err(Error::Config("diagonal covariance length mismatch".into()));
                }
                if v.iter().any(|&s| !(s > 0.0)) {
                    return Err(Error::NotPositiveDefinite("diagonal entry <= 0".into()));
                }
                let log_det: f64 = v.iter().map(|s| s.ln()).sum();
                Ok(PreparedGaussian {
                    mean: self.mean.clone(),
                    shape: PreparedShape::Diagonal(v.clone()),
                    log_norm: -0.5 * (d as f64) * LN_2PI - 0.5 * log_det,
                })
            }
            Covariance::FixedIso(s2) => {
                if !(s2 > &0.0) {
                    return Err(Error::NotPositiveDefinite("sigma^2 <= 0".into()));
                }
                Ok(PreparedGaussian {
                    mean: self.mean.clone(),
                    shape: PreparedShape::Iso(*s2),
                    log_norm: -0.5 * (d as f64) * (LN_2PI + s2.ln()),
                })
            }
        }
    }
}

#[derive(Debug, Clone)]
enum PreparedShape {
    Full(Chol),
    Diagonal(Vec<f64>),
    Iso(f64),
}

/// Cached factorisation for repeated density evaluation and sampling.
#[derive(Debug, Clone)]
pub struct PreparedGaussian {
    mean: Vec<f64>,
    shape: PreparedShape,
    log_norm: f64,
}

impl PreparedGaussian {
    pub fn log_density(&self, y: &[f64]) -> f64 {
        let diff: Vec<f64> = y.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        let q = match &self.shape {
            PreparedShape::Full(chol) => chol.inv_quadform(&diff),
            PreparedShape::Diagonal(v) => diff.iter().zip(v).map(|(d, s)| d * d / s).sum(),
            PreparedShape::Iso(s2) => diff.iter().map(|d| d * d).sum::<f64>() / s2,
        };
        self.log_norm - 0.5 * q
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.mean.len();
        let eps: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let scaled = match &self.shape {
            PreparedShape::Full(chol) => chol.lower_matvec(&eps),
            PreparedShape::Diagonal(v) => eps.iter().zip(v).map(|(e, s)| e * s.sqrt()).collect(),
            PreparedShape::Iso(s2) => {
                let s = s2.sqrt();
                eps.iter().map(|e| e * s).collect()
            }
        };
        self.mean.iter().zip(&scaled).map(|(m, s)| m + s).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_matches_iso_density() {
        let full = GaussianParams::iso(vec![1.0, -2.0], 3.0).prepare().unwrap();
        let fixed = GaussianParams::fixed_iso(vec![1.0, -2.0], 3.0)
            .prepare()
            .unwrap();
        let diag = GaussianParams {
            mean: vec![1.0, -2.0],
            cov: Covariance::Diagonal(vec![3.0, 3.0]),
        }
        .prepare()
        .unwrap();
        for y in [[0.0, 0.0], [1.5, -1.0], [-3.0, 4.0]] {
            let a = full.log_density(&y);
            assert!((a - fixed.log_density(&y)).abs() < 1e-13);
            assert!((a - diag.log_density(&y)).abs() < 1e-13);
        }
    }

    #[test]
    fn standard_normal_at_zero() {
        let p = GaussianParams::iso(vec![0.0], 1.0).prepare().unwrap();
        assert!((p.log_density(&[0.0]).exp() - 0.398_942_280_4).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_covariance() {
        let p = GaussianParams {
            mean: vec![0.0, 0.0],
            cov: Covariance::Full(SymMat::from_rows(2, &[1.0, 2.0, 2.0, 1.0])),
        };
        assert!(p.prepare().is_err());
        let q = GaussianParams {
            mean: vec![0.0],
            cov: Covariance::Diagonal(vec![-1.0]),
        };
        assert!(q.prepare().is_err());
    }

    #[test]
    fn sampling_moments_roughly_match() {
        let mut cov = SymMat::identity(2);
        cov.set(0, 0, 2.0);
        cov.set(0, 1, 0.8);
        cov.set(1, 1, 1.5);
        let p = GaussianParams {
            mean: vec![1.0, -1.0],
            cov: Covariance::Full(cov),
        }
        .prepare()
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let mut mean = [0.0f64; 2];
        let mut c01 = 0.0;
        let samples: Vec<Vec<f64>> = (0..n).map(|_| p.sample(&mut rng)).collect();
        for s in &samples {
            mean[0] += s[0];
            mean[1] += s[1];
        }
        mean[0] /= n as f64;
        mean[1] /= n as f64;
        for s in &samples {
            c01 += (s[0] - mean[0]) * (s[1] - mean[1]);
        }
        c01 /= n as f64;
        assert!((mean[0] - 1.0).abs() < 0.02);
        assert!((mean[1] + 1.0).abs() < 0.02);
        assert!((c01 - 0.8).abs() < 0.03);
    }
}
