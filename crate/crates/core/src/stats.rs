//! Log-space accumulation helpers.

/// log Σ exp(x_i), tolerating −∞ entries. Empty input gives −∞.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let mx = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.iter().map(|x| (x - mx).exp()).sum();
    mx + sum.ln()
}

/// Two-argument log-sum-exp.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if a > b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// Effective sample size (Σw)² / Σw² from log-weights; 0 when all weights
/// vanish.
pub fn ess_from_log_weights(log_w: &[f64]) -> f64 {
    let lse1 = log_sum_exp(log_w);
    if lse1 == f64::NEG_INFINITY {
        return 0.0;
    }
    let doubled: Vec<f64> = log_w.iter().map(|w| 2.0 * w).collect();
    let lse2 = log_sum_exp(&doubled);
    (2.0 * lse1 - lse2).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_matches_naive_in_safe_range() {
        let xs = [0.5f64, 2.0, -1.0];
        let naive = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - naive).abs() < 1e-14);
    }

    #[test]
    fn lse_survives_extremes() {
        let v = log_sum_exp(&[1234.0, 1232.0]);
        assert!((v - (1232.0 + (2f64.exp() + 1.0).ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert!((log_add_exp(-800.0, -800.0) - (-800.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn ess_bounds() {
        // Equal weights: ESS = n. One dominant weight: ESS near 1.
        let eq = [0.0, 0.0, 0.0, 0.0];
        assert!((ess_from_log_weights(&eq) - 4.0).abs() < 1e-12);
        let dom = [0.0, -50.0, -50.0];
        assert!((ess_from_log_weights(&dom) - 1.0).abs() < 1e-10);
        assert_eq!(ess_from_log_weights(&[f64::NEG_INFINITY; 3]), 0.0);
    }
}
