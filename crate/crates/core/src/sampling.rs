//! Importance-sampling proposals, seeded streams, and the shared-sample
//! unbiased estimators.
//!
//! One batch per iteration feeds the weight update, the component updates
//! and the bound estimate, so the per-iteration sampling and
//! target-evaluation costs are both Θ(M).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::divergence::AlphaValue;
use crate::error::{Error, Result};
use crate::expfam::MomentEstimate;
use crate::linalg::SymMat;
use crate::mixture::MixtureState;
use crate::stats::{ess_from_log_weights, log_sum_exp};
use crate::targets::Target;

/// Exponents below this are treated as total underflow (exp gives 0.0).
const UNDERFLOW_LOG: f64 = -745.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SamplerKind {
    /// Component indices drawn from the current mixture weights; the
    /// proposal density is the mixture itself.
    IsN,
    /// Component indices drawn uniformly; the proposal density is the
    /// uniform-weight mixture.
    IsUnif,
}

impl SamplerKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "is_n" | "is-n" => Ok(SamplerKind::IsN),
            "is_unif" | "is-unif" => Ok(SamplerKind::IsUnif),
            other => Err(Error::Config(format!("unknown sampler '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SamplerKind::IsN => "is_n",
            SamplerKind::IsUnif => "is_unif",
        }
    }
}

/// Identifies the deterministic stream a batch was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    pub master_seed: u64,
    pub trial: u64,
    pub iteration: u64,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Splittable counter-based stream: identical (seed, trial, iteration)
/// always yields an identical generator, independent of call order or
/// thread schedule.
pub fn rng_stream(master_seed: u64, trial: u64, iteration: u64) -> ChaCha8Rng {
    let mut state = master_seed;
    let a = splitmix64(&mut state);
    state ^= trial.wrapping_mul(0xA24B_AED4_963E_E407);
    let b = splitmix64(&mut state);
    state ^= iteration.wrapping_mul(0x9FB2_1C65_1E98_DF25);
    let c = splitmix64(&mut state);
    let d = splitmix64(&mut state);
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&a.to_le_bytes());
    key[8..16].copy_from_slice(&b.to_le_bytes());
    key[16..24].copy_from_slice(&c.to_le_bytes());
    key[24..32].copy_from_slice(&d.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// A batch of proposal draws with the proposal's own log density at each
/// point. `log_q` always records the full mixture proposal: μk for IS-n,
/// the uniform-weight mixture for IS-unif. The index-conditional component
/// density would bias the shared estimator and is deliberately not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub points: Vec<Vec<f64>>,
    pub log_q: Vec<f64>,
    pub component_indices: Vec<usize>,
    pub seed_record: StreamKey,
    pub sampler: SamplerKind,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Draws M points from the chosen proposal built on `state`.
pub fn draw_samples(
    state: &MixtureState,
    kind: SamplerKind,
    m: usize,
    key: StreamKey,
) -> Result<SampleBatch> {
    if m == 0 {
        return Err(Error::Config("batch size M must be >= 1".into()));
    }
    let prep = state.prepare()?;
    let mut rng = rng_stream(key.master_seed, key.trial, key.iteration);
    let j = state.len();
    let weights = state.weights();
    let mut cdf = Vec::with_capacity(j);
    let mut acc = 0.0;
    for &w in weights {
        acc += w;
        cdf.push(acc);
    }
    let mut points = Vec::with_capacity(m);
    let mut component_indices = Vec::with_capacity(m);
    for _ in 0..m {
        let idx = match kind {
            SamplerKind::IsN => {
                let u: f64 = rng.random();
                cdf.iter().position(|&c| u < c).unwrap_or(j - 1)
            }
            SamplerKind::IsUnif => rng.random_range(0..j),
        };
        points.push(prep.comps[idx].sample(&mut rng));
        component_indices.push(idx);
    }
    let log_q: Vec<f64> = points
        .iter()
        .map(|y| match kind {
            SamplerKind::IsN => prep.log_mixture_density(y),
            SamplerKind::IsUnif => prep.log_uniform_mixture_density(y),
        })
        .collect();
    if log_q.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("proposal log-density not finite at a draw".into()));
    }
    Ok(SampleBatch {
        points,
        log_q,
        component_indices,
        seed_record: key,
        sampler: kind,
    })
}

/// Everything evaluated once per batch and reused by every estimator:
/// log p, per-component log k_j, and the current mixture log density.
#[derive(Debug, Clone)]
pub struct BatchEvals {
    pub log_p: Vec<f64>,
    /// Row-major M × J component log densities.
    pub log_k: Vec<f64>,
    pub log_mix: Vec<f64>,
    pub n_components: usize,
}

impl BatchEvals {
    /// Evaluates the target once per point (M counted evaluations) and the
    /// component densities once per (point, component) pair.
    pub fn compute(batch: &SampleBatch, state: &MixtureState, target: &Target) -> Result<Self> {
        let prep = state.prepare()?;
        let j = state.len();
        let m = batch.len();
        let mut log_p = Vec::with_capacity(m);
        let mut log_k = Vec::with_capacity(m * j);
        let mut log_mix = Vec::with_capacity(m);
        let log_w: Vec<f64> = state.weights().iter().map(|w| w.ln()).collect();
        for y in &batch.points {
            log_p.push(target.log_density(y));
            let row_start = log_k.len();
            for c in &prep.comps {
                log_k.push(c.log_density(y));
            }
            let terms: Vec<f64> = (0..j).map(|c| log_w[c] + log_k[row_start + c]).collect();
            log_mix.push(log_sum_exp(&terms));
        }
        Ok(BatchEvals {
            log_p,
            log_k,
            log_mix,
            n_components: j,
        })
    }

    pub fn log_k_at(&self, point: usize, component: usize) -> f64 {
        self.log_k[point * self.n_components + component]
    }

    /// log φ̂_j(y_m) = log k_j − log q + (α−1)(log μk − log p); −∞ where
    /// the target vanishes (those points are excluded and counted).
    pub fn log_phi_hat(
        &self,
        batch: &SampleBatch,
        alpha: AlphaValue,
        component: usize,
        excluded: &mut usize,
    ) -> Vec<f64> {
        let a = alpha.get();
        (0..batch.len())
            .map(|m| {
                if self.log_p[m] == f64::NEG_INFINITY {
                    *excluded += 1;
                    f64::NEG_INFINITY
                } else {
                    self.log_k_at(m, component) - batch.log_q[m]
                        + (a - 1.0) * (self.log_mix[m] - self.log_p[m])
                }
            })
            .collect()
    }
}

/// Self-normalised per-component statistics from one shared batch.
#[derive(Debug, Clone)]
pub struct WeightedStats {
    /// Unbiased estimate Î_j = (1/M) Σ φ̂_j of the responsibility mass;
    /// `None` when every sample underflowed for that component.
    pub moments: Vec<Option<MomentEstimate>>,
    /// Self-normalised responsibility weights per component (for Student
    /// updates), aligned with the batch points.
    pub norm_weights: Vec<Option<Vec<f64>>>,
    /// Effective sample size per component.
    pub ess: Vec<f64>,
    /// Points excluded because the target density vanished there.
    pub excluded_points: usize,
}

impl WeightedStats {
    pub fn masses(&self) -> Vec<Option<f64>> {
        self.moments
            .iter()
            .map(|m| m.as_ref().map(|m| m.mass))
            .collect()
    }

    pub fn min_ess(&self) -> f64 {
        self.ess.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Computes [`WeightedStats`] from precomputed batch evaluations.
pub fn estimate_stats_from_evals(
    batch: &SampleBatch,
    evals: &BatchEvals,
    alpha: AlphaValue,
) -> WeightedStats {
    let j = evals.n_components;
    let m = batch.len();
    let d = batch.points[0].len();
    let mut moments = Vec::with_capacity(j);
    let mut norm_weights = Vec::with_capacity(j);
    let mut ess = Vec::with_capacity(j);
    let mut excluded = 0usize;
    for c in 0..j {
        let mut excl = 0usize;
        let log_phi = evals.log_phi_hat(batch, alpha, c, &mut excl);
        if c == 0 {
            excluded = excl;
        }
        let lse = log_sum_exp(&log_phi);
        if lse < UNDERFLOW_LOG || lse == f64::NEG_INFINITY {
            moments.push(None);
            norm_weights.push(None);
            ess.push(0.0);
            continue;
        }
        let mass = (lse - (m as f64).ln()).exp();
        let w: Vec<f64> = log_phi.iter().map(|l| (l - lse).exp()).collect();
        let mut mean = vec![0.0; d];
        for (wi, y) in w.iter().zip(&batch.points) {
            for (mu, yi) in mean.iter_mut().zip(y) {
                *mu += wi * yi;
            }
        }
        let mut cov = SymMat::zeros(d);
        for (wi, y) in w.iter().zip(&batch.points) {
            let diff: Vec<f64> = y.iter().zip(&mean).map(|(a, b)| a - b).collect();
            cov.add_outer(&diff, *wi);
        }
        ess.push(ess_from_log_weights(&log_phi));
        moments.push(Some(MomentEstimate { mass, mean, cov }));
        norm_weights.push(Some(w));
    }
    WeightedStats {
        moments,
        norm_weights,
        ess,
        excluded_points: excluded,
    }
}

/// Convenience wrapper: evaluates the batch (M counted target
/// evaluations) and reduces it. Drivers that also need the bound estimate
/// should call [`BatchEvals::compute`] once and share it.
pub fn estimate_stats(
    batch: &SampleBatch,
    state: &MixtureState,
    target: &Target,
    alpha: AlphaValue,
) -> Result<WeightedStats> {
    let evals = BatchEvals::compute(batch, state, target)?;
    Ok(estimate_stats_from_evals(batch, &evals, alpha))
}
