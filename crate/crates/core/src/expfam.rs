//! Exponential-family abstraction and the argmax-based parameter solver.
//!
//! A family is described by its natural statistic S, log-partition A,
//! the gradient map ∇A and its (partial) inverse, plus the user-facing
//! parameter map. The solver moves the mean parameter along the segment
//! γ·ŝ + (1−γ)·∇A(ζ) and inverts ∇A; a point outside the solvable image
//! surfaces as [`Error::Image`] so drivers can shrink γ and retry.

use crate::error::{Error, Result};
use crate::gaussian::{Covariance, GaussianParams};
use crate::linalg::{dot, SymMat};

const LN_2PI: f64 = 1.837_877_066_409_345_4;

pub trait ExpFamily {
    /// Natural (canonical) parameter.
    type Natural: Clone + std::fmt::Debug;
    /// Element of the statistic space E (mean parameters live here too).
    type Mean: Clone + std::fmt::Debug;

    fn dim_param(&self) -> usize;
    fn suff_stat(&self, y: &[f64]) -> Self::Mean;
    fn log_partition(&self, zeta: &Self::Natural) -> f64;
    fn grad_log_partition(&self, zeta: &Self::Natural) -> Self::Mean;
    /// Inverts ∇A; errors when `s` lies outside the image set.
    fn grad_log_partition_inv(&self, s: &Self::Mean) -> Result<Self::Natural>;
    fn base_log_density(&self, y: &[f64]) -> f64;
    /// ⟨ζ, s⟩ in the E inner product.
    fn pairing(&self, zeta: &Self::Natural, s: &Self::Mean) -> f64;
    /// a·s1 + b·s2.
    fn mean_lincomb(&self, a: f64, s1: &Self::Mean, b: f64, s2: &Self::Mean) -> Self::Mean;

    fn log_density(&self, zeta: &Self::Natural, y: &[f64]) -> f64 {
        self.base_log_density(y) + self.pairing(zeta, &self.suff_stat(y)) - self.log_partition(zeta)
    }
}

/// Solves the regularised argmax update in canonical coordinates:
/// the unique ζ* with ∇A(ζ*) = γ·ŝ + (1−γ)·∇A(ζ).
///
/// γ relates to the regularisation weight b through γ = I/(I + b) where I
/// is the responsibility mass; γ → 0 keeps the current parameter, γ = 1
/// moves all the way to the matched statistic.
pub fn solve_argmax_update<F: ExpFamily>(
    family: &F,
    current: &F::Natural,
    stat_hat: &F::Mean,
    gamma: f64,
) -> Result<F::Natural> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Config(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let anchor = family.grad_log_partition(current);
    let s_star = family.mean_lincomb(gamma, stat_hat, 1.0 - gamma, &anchor);
    family.grad_log_partition_inv(&s_star)
}

/// ∇g(ζ) = ∇A(ζ) − ŝ for the surrogate g(ζ) = −∫ φ̂ log(k(ζ,·)/k(ζ₀,·)) dν,
/// where ŝ = ∫ S φ̂ dν.
pub fn grad_g_canonical<F: ExpFamily>(family: &F, zeta: &F::Natural, stat_hat: &F::Mean) -> F::Mean {
    let grad_a = family.grad_log_partition(zeta);
    family.mean_lincomb(1.0, &grad_a, -1.0, stat_hat)
}

/// Responsibility-weighted moment estimates feeding the Gaussian update.
///
/// `cov` is the centred second moment Σ̂; it only has to be positive
/// definite when a γ = 1 step is requested.
#[derive(Debug, Clone)]
pub struct MomentEstimate {
    /// Estimate of the unnormalised responsibility mass ∫ φ dν.
    pub mass: f64,
    pub mean: Vec<f64>,
    pub cov: SymMat,
}

/// Closed-form Gaussian mean/covariance update:
/// m′ = γ m̂ + (1−γ) m,
/// Σ′ = γ Σ̂ + (1−γ) Σ + γ(1−γ)(m̂−m)(m̂−m)ᵀ.
///
/// The result is symmetrised and Cholesky-checked; a single diagonal
/// jitter of 1e-9·tr(Σ′)/d is attempted before reporting [`Error::Image`]
/// (the signal for the driver to halve γ).
pub fn gaussian_update(
    params: &GaussianParams,
    moments: &MomentEstimate,
    gamma: f64,
) -> Result<GaussianParams> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Config(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let d = params.dim();
    if moments.mean.len() != d {
        return Err(Error::Config("moment dimension mismatch".into()));
    }
    let new_mean: Vec<f64> = params
        .mean
        .iter()
        .zip(&moments.mean)
        .map(|(m, mh)| gamma * mh + (1.0 - gamma) * m)
        .collect();
    let new_cov = match &params.cov {
        Covariance::FixedIso(s2) => Covariance::FixedIso(*s2),
        Covariance::Diagonal(v) => {
            let mut out = Vec::with_capacity(d);
            for i in 0..d {
                let dm = moments.mean[i] - params.mean[i];
                let s = gamma * moments.cov.get(i, i) + (1.0 - gamma) * v[i]
                    + gamma * (1.0 - gamma) * dm * dm;
                if !(s > 0.0) {
                    return Err(Error::Image(format!("diagonal variance {s} at coord {i}")));
                }
                out.push(s);
            }
            Covariance::Diagonal(out)
        }
        Covariance::Full(sigma) => {
            let mut out = SymMat::zeros(d);
            out.add_assign_scaled(&moments.cov, gamma);
            out.add_assign_scaled(sigma, 1.0 - gamma);
            let dm: Vec<f64> = moments
                .mean
                .iter()
                .zip(&params.mean)
                .map(|(a, b)| a - b)
                .collect();
            out.add_outer(&dm, gamma * (1.0 - gamma));
            if out.cholesky().is_err() {
                let jitter = 1e-9 * out.trace() / d as f64;
                for i in 0..d {
                    let v = out.get(i, i) + jitter;
                    out.set(i, i, v);
                }
                if out.cholesky().is_err() {
                    return Err(Error::Image(
                        "updated covariance not positive definite after jitter".into(),
                    ));
                }
            }
            Covariance::Full(out)
        }
    };
    Ok(GaussianParams {
        mean: new_mean,
        cov: new_cov,
    })
}

/// Full-covariance Gaussian in canonical coordinates
/// ζ = (Σ⁻¹m, Σ⁻¹) with S(y) = (y, −yyᵀ/2) and h ≡ 1.
#[derive(Debug, Clone)]
pub struct GaussianFull {
    pub dim: usize,
}

/// Natural parameter of [`GaussianFull`].
#[derive(Debug, Clone)]
pub struct GaussNat {
    pub lin: Vec<f64>,
    pub prec: SymMat,
}

/// Statistic-space element of [`GaussianFull`]: (E[y], E[−yyᵀ/2]).
#[derive(Debug, Clone)]
pub struct GaussStat {
    pub lin: Vec<f64>,
    pub quad: SymMat,
}

impl GaussianFull {
    /// Maps the moment parameterisation to natural coordinates.
    pub fn to_natural(&self, params: &GaussianParams) -> Result<GaussNat> {
        let cov = params.cov_matrix();
        let prec = cov.inverse()?;
        let lin = prec.matvec(&params.mean);
        Ok(GaussNat { lin, prec })
    }

    /// Maps natural coordinates back to the moment parameterisation.
    pub fn to_params(&self, zeta: &GaussNat) -> Result<GaussianParams> {
        let cov = zeta.prec.inverse()?;
        let mean = cov.matvec(&zeta.lin);
        Ok(GaussianParams {
            mean,
            cov: Covariance::Full(cov),
        })
    }

    /// Packs (m̂, Σ̂) moments into the statistic space.
    pub fn stat_from_moments(&self, mean: &[f64], cov: &SymMat) -> GaussStat {
        let mut quad = SymMat::zeros(self.dim);
        quad.add_assign_scaled(cov, -0.5);
        quad.add_outer(mean, -0.5);
        GaussStat {
            lin: mean.to_vec(),
            quad,
        }
    }
}

impl ExpFamily for GaussianFull {
    type Natural = GaussNat;
    type Mean = GaussStat;

    fn dim_param(&self) -> usize {
        self.dim + self.dim * (self.dim + 1) / 2
    }

    fn suff_stat(&self, y: &[f64]) -> GaussStat {
        let mut quad = SymMat::zeros(self.dim);
        quad.add_outer(y, -0.5);
        GaussStat {
            lin: y.to_vec(),
            quad,
        }
    }

    fn log_partition(&self, zeta: &GaussNat) -> f64 {
        let cov = zeta.prec.inverse().expect("precision must be PD");
        let m = cov.matvec(&zeta.lin);
        let chol = zeta.prec.cholesky().expect("precision must be PD");
        0.5 * dot(&zeta.lin, &m) - 0.5 * chol.log_det() + 0.5 * self.dim as f64 * LN_2PI
    }

    fn grad_log_partition(&self, zeta: &GaussNat) -> GaussStat {
        let cov = zeta.prec.inverse().expect("precision must be PD");
        let mean = cov.matvec(&zeta.lin);
        self.stat_from_moments(&mean, &cov)
    }

    fn grad_log_partition_inv(&self, s: &GaussStat) -> Result<GaussNat> {
        // E[yyᵀ] = −2·quad; Σ = E[yyᵀ] − mmᵀ must be PD.
        let mut cov = SymMat::zeros(self.dim);
        cov.add_assign_scaled(&s.quad, -2.0);
        cov.add_outer(&s.lin, -1.0);
        let prec = cov
            .inverse()
            .map_err(|_| Error::Image("implied covariance not positive definite".into()))?;
        let lin = prec.matvec(&s.lin);
        Ok(GaussNat { lin, prec })
    }

    fn base_log_density(&self, _y: &[f64]) -> f64 {
        0.0
    }

    fn pairing(&self, zeta: &GaussNat, s: &GaussStat) -> f64 {
        let mut acc = dot(&zeta.lin, &s.lin);
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += zeta.prec.get(i, j) * s.quad.get(i, j);
            }
        }
        acc
    }

    fn mean_lincomb(&self, a: f64, s1: &GaussStat, b: f64, s2: &GaussStat) -> GaussStat {
        let lin = s1
            .lin
            .iter()
            .zip(&s2.lin)
            .map(|(x, y)| a * x + b * y)
            .collect();
        let mut quad = SymMat::zeros(self.dim);
        quad.add_assign_scaled(&s1.quad, a);
        quad.add_assign_scaled(&s2.quad, b);
        GaussStat { lin, quad }
    }
}

/// Product of univariate Gaussians in canonical coordinates
/// (m_i/σ_i², 1/σ_i²)_i; the joint argmax factorises per coordinate.
#[derive(Debug, Clone)]
pub struct GaussianDiag {
    pub dim: usize,
}

impl ExpFamily for GaussianDiag {
    /// (lin_i, prec_i) interleaved as (lin, prec) vectors.
    type Natural = (Vec<f64>, Vec<f64>);
    /// (E[y_i], E[−y_i²/2]).
    type Mean = (Vec<f64>, Vec<f64>);

    fn dim_param(&self) -> usize {
        2 * self.dim
    }

    fn suff_stat(&self, y: &[f64]) -> Self::Mean {
        (y.to_vec(), y.iter().map(|v| -0.5 * v * v).collect())
    }

    fn log_partition(&self, zeta: &Self::Natural) -> f64 {
        let (lin, prec) = zeta;
        (0..self.dim)
            .map(|i| 0.5 * lin[i] * lin[i] / prec[i] - 0.5 * prec[i].ln() + 0.5 * LN_2PI)
            .sum()
    }

    fn grad_log_partition(&self, zeta: &Self::Natural) -> Self::Mean {
        let (lin, prec) = zeta;
        let mean: Vec<f64> = (0..self.dim).map(|i| lin[i] / prec[i]).collect();
        let quad: Vec<f64> = (0..self.dim)
            .map(|i| -0.5 * (1.0 / prec[i] + mean[i] * mean[i]))
            .collect();
        (mean, quad)
    }

    fn grad_log_partition_inv(&self, s: &Self::Mean) -> Result<Self::Natural> {
        let (mean, quad) = s;
        let mut lin = Vec::with_capacity(self.dim);
        let mut prec = Vec::with_capacity(self.dim);
        for i in 0..self.dim {
            let var = -2.0 * quad[i] - mean[i] * mean[i];
            if !(var > 0.0) {
                return Err(Error::Image(format!("implied variance {var} at coord {i}")));
            }
            prec.push(1.0 / var);
            lin.push(mean[i] / var);
        }
        Ok((lin, prec))
    }

    fn base_log_density(&self, _y: &[f64]) -> f64 {
        0.0
    }

    fn pairing(&self, zeta: &Self::Natural, s: &Self::Mean) -> f64 {
        dot(&zeta.0, &s.0) + dot(&zeta.1, &s.1)
    }

    fn mean_lincomb(&self, a: f64, s1: &Self::Mean, b: f64, s2: &Self::Mean) -> Self::Mean {
        let comb = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(u, v)| a * u + b * v).collect();
        (comb(&s1.0, &s2.0), comb(&s1.1, &s2.1))
    }
}

/// Gaussian with a known covariance matrix: θ is the mean, ζ = Σ⁻¹θ,
/// S(y) = y and A(ζ) = ½ ζᵀΣζ.
#[derive(Debug, Clone)]
pub struct GaussianFixedCov {
    cov: SymMat,
    prec: SymMat,
    log_det: f64,
    /// Largest eigenvalue of Σ — smoothness index of the canonical surrogate.
    pub beta_canonical: f64,
    /// Largest eigenvalue of Σ⁻¹ — smoothness index in user coordinates.
    pub beta_noncanonical: f64,
}

impl GaussianFixedCov {
    pub fn new(cov: SymMat) -> Result<Self> {
        let chol = cov.cholesky()?;
        let log_det = chol.log_det();
        let prec = cov.inverse()?;
        let beta_canonical = cov.largest_eigenvalue();
        let beta_noncanonical = prec.largest_eigenvalue();
        Ok(GaussianFixedCov {
            cov,
            prec,
            log_det,
            beta_canonical,
            beta_noncanonical,
        })
    }

    pub fn cov(&self) -> &SymMat {
        &self.cov
    }

    pub fn natural_of_mean(&self, theta: &[f64]) -> Vec<f64> {
        self.prec.matvec(theta)
    }

    pub fn mean_of_natural(&self, zeta: &[f64]) -> Vec<f64> {
        self.cov.matvec(zeta)
    }
}

impl ExpFamily for GaussianFixedCov {
    type Natural = Vec<f64>;
    type Mean = Vec<f64>;

    fn dim_param(&self) -> usize {
        self.cov.dim()
    }

    fn suff_stat(&self, y: &[f64]) -> Vec<f64> {
        y.to_vec()
    }

    fn log_partition(&self, zeta: &Vec<f64>) -> f64 {
        0.5 * dot(zeta, &self.cov.matvec(zeta))
    }

    fn grad_log_partition(&self, zeta: &Vec<f64>) -> Vec<f64> {
        self.cov.matvec(zeta)
    }

    fn grad_log_partition_inv(&self, s: &Vec<f64>) -> Result<Vec<f64>> {
        Ok(self.prec.matvec(s))
    }

    fn base_log_density(&self, y: &[f64]) -> f64 {
        let q = dot(y, &self.prec.matvec(y));
        -0.5 * self.cov.dim() as f64 * LN_2PI - 0.5 * self.log_det - 0.5 * q
    }

    fn pairing(&self, zeta: &Vec<f64>, s: &Vec<f64>) -> f64 {
        dot(zeta, s)
    }

    fn mean_lincomb(&self, a: f64, s1: &Vec<f64>, b: f64, s2: &Vec<f64>) -> Vec<f64> {
        s1.iter().zip(s2).map(|(x, y)| a * x + b * y).collect()
    }
}

/// Gradient step on the canonical parameter, mapped back to the mean:
/// θ′ = θ − (γ/β₀) Σ (θ − m̂) with β₀ the largest eigenvalue of Σ.
pub fn gradient_step_canonical(
    family: &GaussianFixedCov,
    theta: &[f64],
    mean_hat: &[f64],
    gamma: f64,
) -> Vec<f64> {
    let step = gamma / family.beta_canonical;
    let diff: Vec<f64> = theta.iter().zip(mean_hat).map(|(t, m)| t - m).collect();
    let corr = family.cov().matvec(&diff);
    theta.iter().zip(&corr).map(|(t, c)| t - step * c).collect()
}

/// Gradient step directly on the mean parameter:
/// θ′ = θ − (γ/β) Σ⁻¹ (θ − m̂) with β the largest eigenvalue of Σ⁻¹.
pub fn gradient_step_noncanonical(
    family: &GaussianFixedCov,
    theta: &[f64],
    mean_hat: &[f64],
    gamma: f64,
) -> Vec<f64> {
    let step = gamma / family.beta_noncanonical;
    let diff: Vec<f64> = theta.iter().zip(mean_hat).map(|(t, m)| t - m).collect();
    let corr = family.prec.matvec(&diff);
    theta.iter().zip(&corr).map(|(t, c)| t - step * c).collect()
}
