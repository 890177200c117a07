//! Component-parameter update rules for mixtures: the maximisation (MG)
//! update and the gradient (RGD) means update, plus the Student variant
//! dispatch.

use crate::error::{Error, Result};
use crate::expfam::{gaussian_update, MomentEstimate};
use crate::mixture::{Component, MixtureState};
use crate::student::{student_update, WeightedPoints};

/// Per-component estimates feeding an update; `None` marks a component
/// whose statistics were unavailable this iteration (all-sample underflow).
pub type ComponentMoments = Vec<Option<MomentEstimate>>;

#[derive(Debug, Clone, Default)]
pub struct UpdateDiagnostics {
    /// Components skipped because their statistics were unavailable.
    pub skipped: usize,
    /// Total γ-halvings needed to re-enter the solvable image.
    pub gamma_halvings: usize,
}

/// Maximisation update of all Gaussian components: each one moves to the
/// γ-blend of its own parameters and the responsibility moments. On an
/// image failure (non-PD covariance) the step for that component is
/// retried with halved γ, up to 20 times.
pub fn mg_update(
    state: &MixtureState,
    moments: &[Option<MomentEstimate>],
    gamma: f64,
) -> Result<(Vec<Component>, UpdateDiagnostics)> {
    mg_update_per_component(state, moments, &vec![gamma; state.len()])
}

/// [`mg_update`] with one step size per component. The common-γ form is
/// the stock configuration; per-component steps stay available since any
/// γ_j ∈ (0, 1] preserves the descent guarantee.
pub fn mg_update_per_component(
    state: &MixtureState,
    moments: &[Option<MomentEstimate>],
    gammas: &[f64],
) -> Result<(Vec<Component>, UpdateDiagnostics)> {
    if moments.len() != state.len() || gammas.len() != state.len() {
        return Err(Error::Config("moments/gammas length mismatch".into()));
    }
    let mut diag = UpdateDiagnostics::default();
    let mut out = Vec::with_capacity(state.len());
    for ((comp, mom), &gamma) in state.components().iter().zip(moments).zip(gammas) {
        let Component::Gaussian(params) = comp else {
            return Err(Error::Config(
                "mg_update applies to Gaussian components; use student_step for Student mixtures"
                    .into(),
            ));
        };
        let Some(mom) = mom else {
            diag.skipped += 1;
            out.push(comp.clone());
            continue;
        };
        let mut g = gamma;
        let mut updated = None;
        for _ in 0..=20 {
            match gaussian_update(params, mom, g) {
                Ok(p) => {
                    updated = Some(p);
                    break;
                }
                Err(Error::Image(_)) => {
                    g *= 0.5;
                    diag.gamma_halvings += 1;
                }
                Err(e) => return Err(e),
            }
        }
        match updated {
            Some(p) => out.push(Component::Gaussian(p)),
            None => {
                // Even the shrunken steps failed; keep the component.
                diag.skipped += 1;
                out.push(comp.clone());
            }
        }
    }
    Ok((out, diag))
}

/// Gradient-rule means update with fixed covariances:
/// m_j ← m_j + γ λ_j I_j (m̂_j − m_j) / Σ_ℓ λ_ℓ I_ℓ.
///
/// Covariances (and any degrees of freedom) are untouched. Returns the
/// updated component list; a vanishing denominator skips the whole step.
pub fn rgd_update_means(
    state: &MixtureState,
    moments: &[Option<MomentEstimate>],
    gamma: f64,
) -> Result<(Vec<Component>, UpdateDiagnostics)> {
    if moments.len() != state.len() {
        return Err(Error::Config("moments length mismatch".into()));
    }
    if !(gamma >= 0.0 && gamma <= 1.0) {
        return Err(Error::Config(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    let mut diag = UpdateDiagnostics::default();
    let denom: f64 = state
        .weights()
        .iter()
        .zip(moments)
        .map(|(w, m)| m.as_ref().map_or(0.0, |m| w * m.mass))
        .sum();
    if !(denom > 0.0) || !denom.is_finite() {
        diag.skipped = state.len();
        return Ok((state.components().to_vec(), diag));
    }
    let mut out = Vec::with_capacity(state.len());
    for ((comp, mom), w) in state.components().iter().zip(moments).zip(state.weights()) {
        let Component::Gaussian(params) = comp else {
            return Err(Error::Config("rgd_update_means applies to Gaussian components".into()));
        };
        let Some(mom) = mom else {
            diag.skipped += 1;
            out.push(comp.clone());
            continue;
        };
        let step = gamma * w * mom.mass / denom;
        let mut p = params.clone();
        for (m, mh) in p.mean.iter_mut().zip(&mom.mean) {
            *m += step * (mh - *m);
        }
        out.push(Component::Gaussian(p));
    }
    Ok((out, diag))
}

/// Student-mixture parameter step: every component is updated through the
/// closed-form mixing integrals from its normalised responsibility
/// distribution over y.
pub fn student_step(
    state: &MixtureState,
    responsibilities: &[Option<(Vec<Vec<f64>>, Vec<f64>)>],
    gamma: f64,
) -> Result<(Vec<Component>, UpdateDiagnostics)> {
    if responsibilities.len() != state.len() {
        return Err(Error::Config("responsibilities length mismatch".into()));
    }
    let mut diag = UpdateDiagnostics::default();
    let mut out = Vec::with_capacity(state.len());
    for (comp, resp) in state.components().iter().zip(responsibilities) {
        let Component::Student(params) = comp else {
            return Err(Error::Config("student_step applies to Student components".into()));
        };
        let Some((points, weights)) = resp else {
            diag.skipped += 1;
            out.push(comp.clone());
            continue;
        };
        let wp = WeightedPoints {
            points,
            weights,
        };
        match student_update(params, &wp, gamma) {
            Ok(p) => out.push(Component::Student(p)),
            Err(Error::Image(_)) | Err(Error::Domain(_)) => {
                diag.skipped += 1;
                out.push(comp.clone());
            }
            Err(e) => return Err(e),
        }
    }
    Ok((out, diag))
}
