//! Student's t components as Gaussian scale mixtures, with closed-form
//! mixing-variable integrals.
//!
//! A component t(y; m, Σ, a) is ∫ N(y; m, z⁻¹Σ) τ_a(dz) with τ_a the
//! Gamma(a/2, rate a/2) mixing distribution. All z-integrals needed by the
//! parameter update are available in closed form through [`g_tau`], so the
//! update only ever takes expectations over y.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{Covariance, GaussianParams};
use crate::linalg::{Chol, SymMat};
use crate::special::{digamma, ln_gamma, solve_dof_stationarity};

const LN_PI: f64 = 1.144_729_885_849_400_2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentTParams {
    pub mean: Vec<f64>,
    pub scale: SymMat,
    /// Degrees of freedom, a > 0.
    pub dof: f64,
}

impl StudentTParams {
    pub fn iso(mean: Vec<f64>, sigma2: f64, dof: f64) -> Self {
        let d = mean.len();
        StudentTParams {
            mean,
            scale: SymMat::scaled_identity(d, sigma2),
            dof,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn prepare(&self) -> Result<PreparedStudent> {
        if !(self.dof > 0.0) {
            return Err(Error::Domain(format!(
                "degrees of freedom must be positive, got {}",
                self.dof
            )));
        }
        if self.scale.max_asymmetry() > 1e-12 {
            return Err(Error::NotPositiveDefinite("scale matrix asymmetric".into()));
        }
        let chol = self.scale.cholesky()?;
        let d = self.dim() as f64;
        let a = self.dof;
        let log_norm = ln_gamma(0.5 * (a + d))
            - ln_gamma(0.5 * a)
            - 0.5 * d * (a.ln() + LN_PI)
            - 0.5 * chol.log_det();
        Ok(PreparedStudent {
            mean: self.mean.clone(),
            chol,
            dof: a,
            log_norm,
        })
    }
}

#[derive(Debug, Clone)]
pub struct PreparedStudent {
    mean: Vec<f64>,
    chol: Chol,
    dof: f64,
    log_norm: f64,
}

impl PreparedStudent {
    pub fn log_density(&self, y: &[f64]) -> f64 {
        let diff: Vec<f64> = y.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        let q = self.chol.inv_quadform(&diff);
        let d = self.mean.len() as f64;
        self.log_norm - 0.5 * (self.dof + d) * (q / self.dof).ln_1p()
    }

    /// Half the Mahalanobis form, the `q` feeding the mixing integrals.
    pub fn half_quadform(&self, y: &[f64]) -> f64 {
        let diff: Vec<f64> = y.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        0.5 * self.chol.inv_quadform(&diff)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        // z ~ Gamma(a/2, rate a/2), then y | z ~ N(m, Σ/z).
        let gamma = Gamma::new(0.5 * self.dof, 2.0 / self.dof).expect("valid dof");
        let z: f64 = gamma.sample(rng);
        let scale = 1.0 / z.sqrt();
        let eps: Vec<f64> = (0..self.mean.len())
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal) * scale)
            .collect();
        let corr = self.chol.lower_matvec(&eps);
        self.mean.iter().zip(&corr).map(|(m, c)| m + c).collect()
    }
}

/// Closed-form mixing integral g(u, v; a) = ∫ z^u e^{−vz} τ_a(dz) for the
/// Gamma(a/2, rate a/2) mixing law:
/// (a/2)^{a/2} Γ(a/2 + u) / ((a/2 + v)^{a/2 + u} Γ(a/2)), in log space.
pub fn g_tau(u: f64, v: f64, a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("g_tau requires a > 0, got {a}")));
    }
    let half = 0.5 * a;
    if !(half + u > 0.0) || !(half + v > 0.0) {
        return Err(Error::Domain(format!(
            "g_tau domain violated: a/2+u = {}, a/2+v = {}",
            half + u,
            half + v
        )));
    }
    let log_g =
        half * half.ln() + ln_gamma(half + u) - (half + u) * (half + v).ln() - ln_gamma(half);
    Ok(log_g.exp())
}

/// Conditional mean of the mixing variable given y:
/// E[z | y] = g(d/2 + 1, q) / g(d/2, q) = (a/2 + d/2)/(a/2 + q).
pub fn conditional_z_mean(q: f64, a: f64, d: usize) -> f64 {
    (0.5 * a + 0.5 * d as f64) / (0.5 * a + q)
}

/// Conditional mean of ln z given y under the Gamma posterior:
/// ψ(a/2 + d/2) − ln(a/2 + q).
pub fn conditional_log_z_mean(q: f64, a: f64, d: usize) -> f64 {
    digamma(0.5 * a + 0.5 * d as f64) - (0.5 * a + q).ln()
}

/// A normalised weighted point set over y: quadrature nodes with
/// responsibility-weighted quadrature weights, or self-normalised
/// importance-sampling draws. Weights must sum to 1.
#[derive(Debug, Clone)]
pub struct WeightedPoints<'a> {
    pub points: &'a [Vec<f64>],
    pub weights: &'a [f64],
}

impl WeightedPoints<'_> {
    fn expect(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.points
            .iter()
            .zip(self.weights)
            .map(|(y, w)| w * f(y))
            .sum()
    }
}

/// One maximisation-style update of a Student component.
///
/// `phi_hat` carries the normalised responsibility distribution over y;
/// the mixing variable is integrated out in closed form. The γ-mixture
/// blends the responsibility-driven statistics with the component's own,
/// so γ → 0 is a fixed point by construction.
pub fn student_update(
    component: &StudentTParams,
    phi_hat: &WeightedPoints<'_>,
    gamma: f64,
) -> Result<StudentTParams> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Config(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let d = component.dim();
    let prep = component.prepare()?;
    let a0 = component.dof;

    // z-weighted moments of the responsibility distribution.
    let w1 = phi_hat.expect(|y| conditional_z_mean(prep.half_quadform(y), a0, d));
    if !(w1 > 0.0) || !w1.is_finite() {
        return Err(Error::Domain(format!("degenerate z-mass {w1}")));
    }
    let mut wy = vec![0.0f64; d];
    let mut wyy = SymMat::zeros(d);
    for (y, w) in phi_hat.points.iter().zip(phi_hat.weights) {
        let zbar = conditional_z_mean(prep.half_quadform(y), a0, d);
        let c = w * zbar;
        for i in 0..d {
            wy[i] += c * y[i];
        }
        wyy.add_outer(y, c);
    }

    // Mean and scale from the γ-mixture of the responsibility statistics
    // and the component's own (whose z-weighted moments reproduce m, Σ):
    //   E[z]    = w1
    //   E[zy]   = γ·wy  + (1−γ)·w1·m
    //   E[zyyᵀ] = γ·wyy + (1−γ)·(w1·mmᵀ + Σ)
    // m′ = E[zy]/E[z], Σ′ = E[zyyᵀ] − E[zy]E[zy]ᵀ/E[z].
    let u: Vec<f64> = (0..d)
        .map(|i| gamma * wy[i] + (1.0 - gamma) * w1 * component.mean[i])
        .collect();
    let new_mean: Vec<f64> = u.iter().map(|x| x / w1).collect();
    let mut new_scale = SymMat::zeros(d);
    new_scale.add_assign_scaled(&wyy, gamma);
    new_scale.add_assign_scaled(&component.scale, 1.0 - gamma);
    new_scale.add_outer(&component.mean, (1.0 - gamma) * w1);
    new_scale.add_outer(&u, -1.0 / w1);
    if new_scale.cholesky().is_err() {
        return Err(Error::Image("updated scale matrix not positive definite".into()));
    }

    // Degrees of freedom from the stationarity of the mixing surrogate:
    // ln x + 1 − ψ(x) = E_φ[z − ln z], x = a/2.
    let mean_log_z = phi_hat.expect(|y| conditional_log_z_mean(prep.half_quadform(y), a0, d));
    let target = w1 - mean_log_z;
    let new_dof = 2.0 * solve_dof_stationarity(target.max(1.0 + 1e-12));

    Ok(StudentTParams {
        mean: new_mean,
        scale: new_scale,
        dof: new_dof,
    })
}

/// Gaussian-component view of a Student parameter set (used when a target
/// or proposal needs the scale matrix as a covariance).
pub fn gaussian_view(p: &StudentTParams) -> GaussianParams {
    GaussianParams {
        mean: p.mean.clone(),
        cov: Covariance::Full(p.scale.clone()),
    }
}
