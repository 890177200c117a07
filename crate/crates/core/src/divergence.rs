//! The divergence generator f_α, the objective Ψ_α against an
//! unnormalised target, and its Monte Carlo / quadrature estimators.

use crate::error::{Error, Result};
use crate::quad::QuadratureGrid;
use crate::stats::log_sum_exp;
use crate::targets::Target;

/// Validated divergence order. α = 1 is excluded outright; the monotone
/// update machinery additionally requires α ∈ [0, 1), which callers check
/// through [`AlphaValue::require_monotone`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AlphaValue(f64);

impl AlphaValue {
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::Domain(format!("alpha must be finite, got {alpha}")));
        }
        if alpha == 1.0 {
            return Err(Error::AlphaIsOne);
        }
        Ok(AlphaValue(alpha))
    }

    pub fn get(&self) -> f64 {
        self.0
    }

    pub fn is_monotone_range(&self) -> bool {
        (0.0..1.0).contains(&self.0)
    }

    pub fn require_monotone(&self) -> Result<()> {
        if self.is_monotone_range() {
            Ok(())
        } else {
            Err(Error::AlphaOutsideMonotoneRange(self.0))
        }
    }
}

/// f_α(u): −log u at α = 0, (u^α − 1)/(α(α − 1)) otherwise.
///
/// The α → 1 limit is u log u; α = 1 itself is unreachable through
/// [`AlphaValue`].
pub fn f_alpha(alpha: AlphaValue, u: f64) -> Result<f64> {
    if !(u > 0.0) || !u.is_finite() {
        return Err(Error::Domain(format!("f_alpha requires u > 0, got {u}")));
    }
    let a = alpha.get();
    if a == 0.0 {
        Ok(-u.ln())
    } else {
        Ok((u.powf(a) - 1.0) / (a * (a - 1.0)))
    }
}

/// Quadrature evaluation of Ψ_α(q; p) = ∫ f_α(q/p) p dν.
///
/// `log_q` must be a normalised density over the grid's support; the mass
/// is checked to 1e-6 rather than silently renormalised. The density ratio
/// is handled in log space throughout.
pub fn psi_alpha_exact(
    alpha: AlphaValue,
    log_q: impl Fn(&[f64]) -> f64,
    target: &Target,
    grid: &QuadratureGrid,
) -> Result<f64> {
    let n = grid.len();
    let mut log_q_vals = Vec::with_capacity(n);
    let mut log_p_vals = Vec::with_capacity(n);
    for i in 0..n {
        let y = grid.node(i);
        log_q_vals.push(log_q(y));
        log_p_vals.push(target.log_density(y));
    }
    let q_mass = exp_lse_weighted(grid, &log_q_vals);
    if (q_mass - 1.0).abs() > 1e-6 {
        return Err(Error::Quadrature(format!(
            "q is not normalised on the grid: mass = {q_mass}"
        )));
    }
    psi_alpha_from_values(alpha, grid, &log_q_vals, &log_p_vals)
}

pub(crate) fn psi_alpha_from_values(
    alpha: AlphaValue,
    grid: &QuadratureGrid,
    log_q_vals: &[f64],
    log_p_vals: &[f64],
) -> Result<f64> {
    let p_mass = exp_lse_weighted(grid, log_p_vals);
    if !(p_mass > 0.0) || !p_mass.is_finite() {
        return Err(Error::Quadrature(format!(
            "target mass on grid must be positive and finite, got {p_mass}"
        )));
    }
    let a = alpha.get();
    if a == 0.0 {
        // −∫ p log(q/p); nodes with p = 0 contribute nothing.
        let mut acc = 0.0;
        for i in 0..grid.len() {
            let lp = log_p_vals[i];
            if lp == f64::NEG_INFINITY {
                continue;
            }
            acc -= grid.weight(i) * lp.exp() * (log_q_vals[i] - lp);
        }
        Ok(acc)
    } else {
        // (∫ q^α p^{1−α} − ∫ p) / (α(α−1)), both masses via log-sum-exp.
        let mut terms = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let lp = log_p_vals[i];
            if lp == f64::NEG_INFINITY {
                continue;
            }
            terms.push(grid.log_weight(i) + a * log_q_vals[i] + (1.0 - a) * lp);
        }
        let mixed = log_sum_exp(&terms).exp();
        Ok((mixed - p_mass) / (a * (a - 1.0)))
    }
}

fn exp_lse_weighted(grid: &QuadratureGrid, log_vals: &[f64]) -> f64 {
    let terms: Vec<f64> = (0..grid.len())
        .filter(|&i| log_vals[i] != f64::NEG_INFINITY)
        .map(|i| grid.log_weight(i) + log_vals[i])
        .collect();
    log_sum_exp(&terms).exp()
}

/// Quadrature evaluation of the variational bound
/// L_α = (1/(1−α)) log ∫ q^α p^{1−α} dν, used by the Ψ↔bound identity tests.
pub fn vr_bound_exact(
    alpha: AlphaValue,
    log_q: impl Fn(&[f64]) -> f64,
    target: &Target,
    grid: &QuadratureGrid,
) -> Result<f64> {
    let a = alpha.get();
    let mut terms = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let y = grid.node(i);
        let lp = target.log_density(y);
        if lp == f64::NEG_INFINITY {
            continue;
        }
        terms.push(grid.log_weight(i) + a * log_q(y) + (1.0 - a) * lp);
    }
    Ok(log_sum_exp(&terms) / (1.0 - a))
}

/// Self-normalised Monte Carlo estimate of the variational bound from
/// samples Y_m ~ q:
/// (1/(1−α)) [logsumexp_m((1−α)(log p − log q)) − log M].
pub fn vr_bound_mc(alpha: AlphaValue, log_q_values: &[f64], log_p_values: &[f64]) -> Result<f64> {
    if log_q_values.is_empty() || log_q_values.len() != log_p_values.len() {
        return Err(Error::Domain(
            "vr_bound_mc needs a non-empty, equal-length sample set".into(),
        ));
    }
    if log_q_values.iter().chain(log_p_values).any(|v| !v.is_finite()) {
        return Err(Error::Domain("vr_bound_mc inputs must be finite".into()));
    }
    let a = alpha.get();
    let terms: Vec<f64> = log_q_values
        .iter()
        .zip(log_p_values)
        .map(|(lq, lp)| (1.0 - a) * (lp - lq))
        .collect();
    let m = terms.len() as f64;
    Ok((log_sum_exp(&terms) - m.ln()) / (1.0 - a))
}

/// Importance-corrected variant for samples drawn from a proposal that is
/// not q itself: (1/(1−α))[logsumexp_m(α log q + (1−α) log p − log prop) − log M].
/// Coincides with [`vr_bound_mc`] when the proposal equals q.
pub fn vr_bound_mc_proposal(
    alpha: AlphaValue,
    log_q_values: &[f64],
    log_p_values: &[f64],
    log_proposal_values: &[f64],
) -> Result<f64> {
    if log_q_values.is_empty()
        || log_q_values.len() != log_p_values.len()
        || log_q_values.len() != log_proposal_values.len()
    {
        return Err(Error::Domain(
            "vr_bound_mc_proposal needs non-empty, equal-length inputs".into(),
        ));
    }
    let a = alpha.get();
    let terms: Vec<f64> = (0..log_q_values.len())
        .map(|i| a * log_q_values[i] + (1.0 - a) * log_p_values[i] - log_proposal_values[i])
        .collect();
    let m = terms.len() as f64;
    Ok((log_sum_exp(&terms) - m.ln()) / (1.0 - a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{build_gauss_hermite, build_grid, GridKind};
    use crate::targets::{builtin_target, TargetKind};

    const LN_2PI: f64 = 1.837_877_066_409_345_4;

    fn alpha(a: f64) -> AlphaValue {
        AlphaValue::new(a).unwrap()
    }

    #[test]
    fn alpha_one_rejected() {
        assert_eq!(AlphaValue::new(1.0), Err(Error::AlphaIsOne));
        assert!(AlphaValue::new(-1.0).unwrap().require_monotone().is_err());
        assert!(AlphaValue::new(0.5).unwrap().require_monotone().is_ok());
    }

    #[test]
    fn f_alpha_examples() {
        assert_eq!(f_alpha(alpha(0.0), 1.0).unwrap(), 0.0);
        assert_eq!(f_alpha(alpha(0.5), 1.0).unwrap(), 0.0);
        // (2^0.2 − 1)/(0.2 · (−0.8))
        let v = f_alpha(alpha(0.2), 2.0).unwrap();
        assert!((v + 0.929_364_72).abs() < 1e-6, "v={v}");
        assert!(f_alpha(alpha(0.2), 0.0).is_err());
        assert!(f_alpha(alpha(0.2), -1.0).is_err());
    }

    #[test]
    fn psi_of_identical_densities_is_zero() {
        let t = builtin_target(TargetKind::Ewgmm, 1, 1.0).unwrap();
        let g = build_gauss_hermite(1, 128, &[0.0], 3.0).unwrap();
        let tq = t.clone();
        for a in [0.0, 0.2, 0.5] {
            let psi = psi_alpha_exact(alpha(a), |y| tq.log_density(y), &t, &g).unwrap();
            assert!(psi.abs() < 1e-10, "alpha={a} psi={psi}");
        }
    }

    #[test]
    fn psi_of_scaled_target_matches_closed_form() {
        // q = p/c: Ψ_α = c f_α(1/c).
        let g = build_gauss_hermite(1, 128, &[0.0], 3.0).unwrap();
        for &c in &[0.5, 1.0, 2.0] {
            let t = builtin_target(TargetKind::Ewgmm, 1, c).unwrap();
            let tq = t.clone();
            let lnc = c.ln();
            for a in [0.0, 0.2, 0.5] {
                let psi =
                    psi_alpha_exact(alpha(a), |y| tq.log_density(y) - lnc, &t, &g).unwrap();
                let expect = c * f_alpha(alpha(a), 1.0 / c).unwrap();
                assert!((psi - expect).abs() < 1e-8, "c={c} a={a} psi={psi} vs {expect}");
            }
        }
        // α = 0, c = 2 gives 2 log 2.
        let t = builtin_target(TargetKind::Ewgmm, 1, 2.0).unwrap();
        let tq = t.clone();
        let psi = psi_alpha_exact(alpha(0.0), |y| tq.log_density(y) - 2.0f64.ln(), &t, &g).unwrap();
        assert!((psi - 2.0 * 2.0f64.ln()).abs() < 1e-8);
    }

    #[test]
    fn psi_hellinger_closed_form() {
        // α = 1/2, q = N(0,1), p = N(1,1): Ψ = −4(e^{−1/8} − 1).
        let t = Target::from_fn(1, "n(1,1)", |y| -0.5 * (y[0] - 1.0) * (y[0] - 1.0) - 0.5 * LN_2PI);
        let g = build_grid(GridKind::GaussHermiteTensor, 1, 128).unwrap();
        let psi = psi_alpha_exact(alpha(0.5), |y| -0.5 * y[0] * y[0] - 0.5 * LN_2PI, &t, &g).unwrap();
        let expect = -4.0 * ((-0.125f64).exp() - 1.0);
        assert!((psi - expect).abs() < 1e-10, "psi={psi} expect={expect}");
    }

    #[test]
    fn psi_requires_normalised_q() {
        let t = builtin_target(TargetKind::Ewgmm, 1, 1.0).unwrap();
        let g = build_gauss_hermite(1, 128, &[0.0], 3.0).unwrap();
        let tq = t.clone();
        // q = 2p is far from normalised.
        let res = psi_alpha_exact(alpha(0.5), |y| tq.log_density(y) + 2.0f64.ln(), &t, &g);
        assert!(matches!(res, Err(Error::Quadrature(_))));
    }

    #[test]
    fn psi_vr_identity_for_normalised_target() {
        // Ψ_α = (exp((1−α) L_α) − 1)/(α(α−1)) when ∫p = 1.
        let t = builtin_target(TargetKind::Ewgmm, 1, 1.0).unwrap();
        let g = build_gauss_hermite(1, 160, &[0.0], 3.0).unwrap();
        let lq = |y: &[f64]| -0.5 * (y[0] - 0.5) * (y[0] - 0.5) / 4.0 - 0.5 * (4.0f64).ln() - 0.5 * LN_2PI;
        for a in [0.2, 0.5, 0.8] {
            let psi = psi_alpha_exact(alpha(a), lq, &t, &g).unwrap();
            let bound = vr_bound_exact(alpha(a), lq, &t, &g).unwrap();
            let from_bound = (((1.0 - a) * bound).exp() - 1.0) / (a * (a - 1.0));
            assert!((psi - from_bound).abs() < 1e-8, "a={a}: {psi} vs {from_bound}");
        }
    }

    #[test]
    fn vr_bound_mc_examples() {
        // q = p/c pointwise: the estimator returns log c for any sample set.
        let lq = [0.3, -1.0, 2.0];
        let lp: Vec<f64> = lq.iter().map(|v| v + 2.0f64.ln()).collect();
        let v = vr_bound_mc(alpha(0.2), &lq, &lp).unwrap();
        assert!((v - 2.0f64.ln()).abs() < 1e-12);

        // M = 1 with log q = log p gives 0.
        let v = vr_bound_mc(alpha(0.5), &[1.2], &[1.2]).unwrap();
        assert_eq!(v, 0.0);

        // Two samples with ratios p/q = {1, e} at α = 0.2:
        // (1/0.8) ln((1 + e^{0.8})/2) — frozen from the formula itself.
        let v = vr_bound_mc(alpha(0.2), &[0.0, 0.0], &[0.0, 1.0]).unwrap();
        let expect = (1.0f64 + 0.8f64.exp()).ln() - 2.0f64.ln();
        let expect = expect / 0.8;
        assert!((v - expect).abs() < 1e-12);
        assert!((v - 0.597_441_9).abs() < 1e-6, "v={v}");
    }

    #[test]
    fn vr_bound_mc_rejects_bad_inputs() {
        assert!(vr_bound_mc(alpha(0.5), &[], &[]).is_err());
        assert!(vr_bound_mc(alpha(0.5), &[1.0], &[f64::NAN]).is_err());
        assert!(vr_bound_mc(alpha(0.5), &[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn vr_bound_shift_covariance() {
        // Adding δ to every log p shifts the estimate by exactly δ.
        let lq = [0.5, -0.3, 1.7, 0.0];
        let lp = [0.1, 0.2, -0.8, 1.4];
        let delta = 3.25;
        let base = vr_bound_mc(alpha(0.3), &lq, &lp).unwrap();
        let shifted: Vec<f64> = lp.iter().map(|v| v + delta).collect();
        let moved = vr_bound_mc(alpha(0.3), &lq, &shifted).unwrap();
        assert!((moved - base - delta).abs() < 1e-12);
    }

    #[test]
    fn vr_proposal_variant_reduces_to_plain() {
        let lq = [0.5, -0.3, 1.7];
        let lp = [0.1, 0.2, -0.8];
        let a = alpha(0.4);
        let plain = vr_bound_mc(a, &lq, &lp).unwrap();
        let general = vr_bound_mc_proposal(a, &lq, &lp, &lq).unwrap();
        assert!((plain - general).abs() < 1e-14);
    }
}
