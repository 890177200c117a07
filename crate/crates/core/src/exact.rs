//! Quadrature-backed iteration engine.
//!
//! Replaces the Monte Carlo estimators with deterministic grid integrals
//! so the monotonicity guarantees become directly testable. The update
//! rules themselves are the same functions the sampled driver uses; only
//! the statistics feeding them differ.

use crate::divergence::{psi_alpha_from_values, AlphaValue};
use crate::error::{Error, Result};
use crate::expfam::MomentEstimate;
use crate::linalg::SymMat;
use crate::mixture::{
    power_descent_step, update_weights, MixtureState, PreparedMixture,
};
use crate::quad::QuadratureGrid;
use crate::stats::log_sum_exp;
use crate::targets::Target;
use crate::updates::{mg_update, rgd_update_means, student_step, ComponentMoments};

/// Quadrature view of one target: node values of log p are cached at
/// construction (counted once against the target's evaluation budget).
#[derive(Debug, Clone)]
pub struct ExactEngine {
    grid: QuadratureGrid,
    log_p: Vec<f64>,
    alpha: AlphaValue,
}

/// Per-component quadrature statistics: the mass I_j = ∫ φ_j dν, the
/// normalised moments, and the normalised node weights for Student steps.
#[derive(Debug, Clone)]
pub struct ExactStats {
    pub masses: Vec<f64>,
    pub moments: ComponentMoments,
    pub node_weights: Vec<Vec<f64>>,
}

impl ExactEngine {
    pub fn new(target: &Target, grid: QuadratureGrid, alpha: AlphaValue) -> Result<Self> {
        let log_p: Vec<f64> = (0..grid.len())
            .map(|i| target.log_density(grid.node(i)))
            .collect();
        if log_p.iter().any(|v| v.is_nan()) {
            return Err(Error::Quadrature("target log-density NaN on grid".into()));
        }
        let mass_terms: Vec<f64> = (0..grid.len())
            .filter(|&i| log_p[i] > f64::NEG_INFINITY)
            .map(|i| grid.log_weight(i) + log_p[i])
            .collect();
        let mass = log_sum_exp(&mass_terms).exp();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::Quadrature(format!(
                "target mass on grid must be positive and finite, got {mass}"
            )));
        }
        Ok(ExactEngine { grid, log_p, alpha })
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn alpha(&self) -> AlphaValue {
        self.alpha
    }

    fn log_mix_on_grid(&self, prep: &PreparedMixture) -> Vec<f64> {
        (0..self.grid.len())
            .map(|i| prep.log_mixture_density(self.grid.node(i)))
            .collect()
    }

    /// Ψ_α(μk; p) on this grid.
    pub fn psi(&self, state: &MixtureState) -> Result<f64> {
        let prep = state.prepare()?;
        let log_q = self.log_mix_on_grid(&prep);
        psi_alpha_from_values(self.alpha, &self.grid, &log_q, &self.log_p)
    }

    /// The bound value (1/(1−α)) log ∫ (μk)^α p^{1−α} dν on this grid.
    pub fn vr_bound(&self, state: &MixtureState) -> Result<f64> {
        let prep = state.prepare()?;
        let a = self.alpha.get();
        let terms: Vec<f64> = (0..self.grid.len())
            .filter(|&i| self.log_p[i] > f64::NEG_INFINITY)
            .map(|i| {
                self.grid.log_weight(i)
                    + a * prep.log_mixture_density(self.grid.node(i))
                    + (1.0 - a) * self.log_p[i]
            })
            .collect();
        Ok(log_sum_exp(&terms) / (1.0 - a))
    }

    /// Per-component responsibility masses and normalised moments.
    pub fn component_stats(&self, state: &MixtureState) -> Result<ExactStats> {
        let prep = state.prepare()?;
        let j = state.len();
        let d = state.dim();
        let n = self.grid.len();
        let log_mix = self.log_mix_on_grid(&prep);
        let a = self.alpha.get();
        let mut masses = Vec::with_capacity(j);
        let mut moments: ComponentMoments = Vec::with_capacity(j);
        let mut node_weights = Vec::with_capacity(j);
        for c in 0..j {
            let log_phi_w: Vec<f64> = (0..n)
                .map(|i| {
                    if self.log_p[i] == f64::NEG_INFINITY {
                        f64::NEG_INFINITY
                    } else {
                        self.grid.log_weight(i)
                            + prep.comps[c].log_density(self.grid.node(i))
                            + (a - 1.0) * (log_mix[i] - self.log_p[i])
                    }
                })
                .collect();
            let lse = log_sum_exp(&log_phi_w);
            let mass = lse.exp();
            if !(mass > 0.0) || !mass.is_finite() {
                return Err(Error::Quadrature(format!(
                    "component {c} responsibility mass degenerate: {mass}"
                )));
            }
            let w: Vec<f64> = log_phi_w.iter().map(|l| (l - lse).exp()).collect();
            let mut mean = vec![0.0; d];
            for (wi, i) in w.iter().zip(0..n) {
                for (mu, yi) in mean.iter_mut().zip(self.grid.node(i)) {
                    *mu += wi * yi;
                }
            }
            let mut cov = SymMat::zeros(d);
            for (wi, i) in w.iter().zip(0..n) {
                let diff: Vec<f64> = self
                    .grid
                    .node(i)
                    .iter()
                    .zip(&mean)
                    .map(|(a, b)| a - b)
                    .collect();
                cov.add_outer(&diff, *wi);
            }
            masses.push(mass);
            moments.push(Some(MomentEstimate { mass, mean, cov }));
            node_weights.push(w);
        }
        Ok(ExactStats {
            masses,
            moments,
            node_weights,
        })
    }

    /// One full maximisation-rule iteration: component updates from exact
    /// moments, then the weight update from exact masses.
    pub fn mg_step(
        &self,
        state: &MixtureState,
        gamma: f64,
        eta: f64,
        kappa: f64,
    ) -> Result<MixtureState> {
        let stats = self.component_stats(state)?;
        let (comps, _diag) = mg_update(state, &stats.moments, gamma)?;
        let weights = update_weights(state.weights(), &stats.masses, eta, kappa, self.alpha)?;
        MixtureState::new(weights, comps)
    }

    /// One gradient-rule iteration (means only, fixed covariances).
    pub fn rgd_step(
        &self,
        state: &MixtureState,
        gamma: f64,
        eta: f64,
        kappa: f64,
    ) -> Result<MixtureState> {
        let stats = self.component_stats(state)?;
        let (comps, _diag) = rgd_update_means(state, &stats.moments, gamma)?;
        let weights = update_weights(state.weights(), &stats.masses, eta, kappa, self.alpha)?;
        MixtureState::new(weights, comps)
    }

    /// One Student-mixture iteration.
    pub fn student_mg_step(
        &self,
        state: &MixtureState,
        gamma: f64,
        eta: f64,
        kappa: f64,
    ) -> Result<MixtureState> {
        let stats = self.component_stats(state)?;
        let points: Vec<Vec<f64>> = (0..self.grid.len())
            .map(|i| self.grid.node(i).to_vec())
            .collect();
        let resp: Vec<Option<(Vec<Vec<f64>>, Vec<f64>)>> = stats
            .node_weights
            .iter()
            .map(|w| Some((points.clone(), w.clone())))
            .collect();
        let (comps, _diag) = student_step(state, &resp, gamma)?;
        let weights = update_weights(state.weights(), &stats.masses, eta, kappa, self.alpha)?;
        MixtureState::new(weights, comps)
    }

    /// Quadrature values of b(θ_j) = ∫ k_j (1/(α−1)) [(μk/p)^{α−1} − 1] dν,
    /// the per-component drift feeding the measure-space transition.
    pub fn b_values(&self, state: &MixtureState) -> Result<Vec<f64>> {
        let prep = state.prepare()?;
        let log_mix = self.log_mix_on_grid(&prep);
        let a = self.alpha.get();
        let n = self.grid.len();
        let mut out = Vec::with_capacity(state.len());
        for c in 0..state.len() {
            let mut acc = 0.0;
            for i in 0..n {
                if self.log_p[i] == f64::NEG_INFINITY {
                    continue;
                }
                let lk = prep.comps[c].log_density(self.grid.node(i));
                let ratio_pow = ((a - 1.0) * (log_mix[i] - self.log_p[i])).exp();
                acc += self.grid.weight(i) * lk.exp() * (ratio_pow - 1.0) / (a - 1.0);
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// One frozen-Θ transition of the measure-space update on the weights.
    pub fn power_step(
        &self,
        state: &MixtureState,
        eta: f64,
        kappa: f64,
    ) -> Result<MixtureState> {
        let b = self.b_values(state)?;
        let weights = power_descent_step(state.weights(), &b, eta, kappa, self.alpha)?;
        state.with_weights(weights)
    }

    /// Gap between this grid's Ψ value and a reference grid's, a cheap
    /// self-check that the order is adequate.
    pub fn psi_gap(&self, other: &ExactEngine, state: &MixtureState) -> Result<f64> {
        Ok((self.psi(state)? - other.psi(state)?).abs())
    }
}
