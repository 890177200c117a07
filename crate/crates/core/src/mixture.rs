//! Mixture state, responsibilities, and the multiplicative weight updates.

use serde::{Deserialize, Serialize};

use crate::divergence::AlphaValue;
use crate::error::{Error, Result};
use crate::gaussian::{GaussianParams, PreparedGaussian};
use crate::stats::log_sum_exp;
use crate::student::{PreparedStudent, StudentTParams};
use crate::targets::Target;

/// Weights below this floor are clamped and the vector renormalised, so
/// the state stays in the strictly positive simplex.
pub const WEIGHT_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Component {
    Gaussian(GaussianParams),
    Student(StudentTParams),
}

impl Component {
    pub fn dim(&self) -> usize {
        match self {
            Component::Gaussian(g) => g.dim(),
            Component::Student(s) => s.dim(),
        }
    }

    pub fn mean(&self) -> &[f64] {
        match self {
            Component::Gaussian(g) => &g.mean,
            Component::Student(s) => &s.mean,
        }
    }

    pub fn prepare(&self) -> Result<PreparedComponent> {
        match self {
            Component::Gaussian(g) => Ok(PreparedComponent::Gaussian(g.prepare()?)),
            Component::Student(s) => Ok(PreparedComponent::Student(s.prepare()?)),
        }
    }
}

#[derive(Debug, Clone)]
pub enum PreparedComponent {
    Gaussian(PreparedGaussian),
    Student(PreparedStudent),
}

impl PreparedComponent {
    pub fn log_density(&self, y: &[f64]) -> f64 {
        match self {
            PreparedComponent::Gaussian(g) => g.log_density(y),
            PreparedComponent::Student(s) => s.log_density(y),
        }
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            PreparedComponent::Gaussian(g) => g.sample(rng),
            PreparedComponent::Student(s) => s.sample(rng),
        }
    }
}

/// Simplex weights λ plus per-component parameters Θ.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureState {
    weights: Vec<f64>,
    components: Vec<Component>,
}

impl MixtureState {
    pub fn new(weights: Vec<f64>, components: Vec<Component>) -> Result<Self> {
        if components.is_empty() || weights.len() != components.len() {
            return Err(Error::Config(
                "mixture needs J >= 1 components with matching weights".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("weights must sum to 1, got {sum}")));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::Config("weights must be strictly positive".into()));
        }
        let d = components[0].dim();
        if components.iter().any(|c| c.dim() != d) {
            return Err(Error::Config("components must share one dimension".into()));
        }
        Ok(MixtureState {
            weights,
            components,
        })
    }

    pub fn uniform(components: Vec<Component>) -> Result<Self> {
        let j = components.len();
        MixtureState::new(vec![1.0 / j as f64; j], components)
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        MixtureState::new(weights, self.components.clone())
    }

    pub fn with_components(&self, components: Vec<Component>) -> Result<Self> {
        MixtureState::new(self.weights.clone(), components)
    }

    /// Mixture mean Σ_j λ_j m_j.
    pub fn mixture_mean(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d];
        for (w, c) in self.weights.iter().zip(&self.components) {
            for (o, m) in out.iter_mut().zip(c.mean()) {
                *o += w * m;
            }
        }
        out
    }

    pub fn prepare(&self) -> Result<PreparedMixture> {
        let comps = self
            .components
            .iter()
            .map(Component::prepare)
            .collect::<Result<Vec<_>>>()?;
        Ok(PreparedMixture {
            log_weights: self.weights.iter().map(|w| w.ln()).collect(),
            comps,
        })
    }
}

/// Frozen per-iteration evaluator for the mixture density.
#[derive(Debug, Clone)]
pub struct PreparedMixture {
    pub log_weights: Vec<f64>,
    pub comps: Vec<PreparedComponent>,
}

impl PreparedMixture {
    pub fn len(&self) -> usize {
        self.comps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comps.is_empty()
    }

    /// log Σ_j λ_j k_j(y) via log-sum-exp.
    pub fn log_mixture_density(&self, y: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .comps
            .iter()
            .zip(&self.log_weights)
            .map(|(c, lw)| lw + c.log_density(y))
            .collect();
        log_sum_exp(&terms)
    }

    /// Per-component log densities at y.
    pub fn component_log_densities(&self, y: &[f64]) -> Vec<f64> {
        self.comps.iter().map(|c| c.log_density(y)).collect()
    }

    /// log of the uniform-weight proposal J⁻¹ Σ_j k_j(y).
    pub fn log_uniform_mixture_density(&self, y: &[f64]) -> f64 {
        let j = self.comps.len() as f64;
        let terms: Vec<f64> = self.comps.iter().map(|c| c.log_density(y)).collect();
        log_sum_exp(&terms) - j.ln()
    }
}

/// log φ_j(y) = log k_j(y) + (α−1)(log μk(y) − log p(y)).
///
/// Returns [`Error::ZeroTargetDensity`] when p(y) = 0 so callers can
/// exclude the point and count the exclusion.
pub fn log_responsibility(
    prepared: &PreparedMixture,
    target: &Target,
    y: &[f64],
    j: usize,
    alpha: AlphaValue,
) -> Result<f64> {
    let lp = target.log_density(y);
    if lp == f64::NEG_INFINITY {
        return Err(Error::ZeroTargetDensity);
    }
    let lmix = prepared.log_mixture_density(y);
    Ok(prepared.comps[j].log_density(y) + (alpha.get() - 1.0) * (lmix - lp))
}

fn normalise_with_floor(log_unnorm: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(log_unnorm);
    let mut w: Vec<f64> = log_unnorm.iter().map(|l| (l - lse).exp()).collect();
    let mut floored = 0usize;
    for v in &mut w {
        if *v < WEIGHT_FLOOR {
            *v = WEIGHT_FLOOR;
            floored += 1;
        }
    }
    if floored > 0 {
        log::debug!("weight floor applied to {floored} component(s)");
    }
    let sum: f64 = w.iter().sum();
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Multiplicative weight update
/// λ′_j ∝ λ_j [I_j + (α−1)κ]^η with I_j = ∫ φ_j dν.
///
/// η = 0 freezes the weights. Brackets must be strictly positive.
pub fn update_weights(
    weights: &[f64],
    integrals: &[f64],
    eta: f64,
    kappa: f64,
    alpha: AlphaValue,
) -> Result<Vec<f64>> {
    if weights.len() != integrals.len() {
        return Err(Error::Config("weights/integrals length mismatch".into()));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Config(format!("eta must lie in [0, 1], got {eta}")));
    }
    let a = alpha.get();
    if (a - 1.0) * kappa < 0.0 {
        return Err(Error::Config(format!(
            "(alpha-1)*kappa must be >= 0, got alpha={a}, kappa={kappa}"
        )));
    }
    if eta == 0.0 {
        return Ok(weights.to_vec());
    }
    let mut log_unnorm = Vec::with_capacity(weights.len());
    for (j, (&w, &i_j)) in weights.iter().zip(integrals).enumerate() {
        let bracket = i_j + (a - 1.0) * kappa;
        if !(bracket > 0.0) || !bracket.is_finite() {
            return Err(Error::NonpositiveBracket {
                component: j,
                value: bracket,
            });
        }
        log_unnorm.push(w.ln() + eta * bracket.ln());
    }
    Ok(normalise_with_floor(&log_unnorm))
}

/// Admissible step-size interval (0, hi] for the measure-space transition
/// at a given α.
pub fn power_descent_eta_max(alpha: AlphaValue) -> f64 {
    let a = alpha.get();
    if a <= -1.0 {
        (a - 1.0) / a
    } else if a < 0.0 {
        1.0 - a
    } else {
        1.0
    }
}

/// One multiplicative transition on the simplex,
/// λ′_j ∝ λ_j [(α−1)(b_j + κ) + 1]^{η/(1−α)}.
///
/// Matches [`update_weights`] under b_j = (I_j − 1)/(α−1) and
/// η_weights = η/(1−α). Step sizes outside the admissible range for the
/// given α are reported as a warning, not an error.
pub fn power_descent_step(
    weights: &[f64],
    b_values: &[f64],
    eta: f64,
    kappa: f64,
    alpha: AlphaValue,
) -> Result<Vec<f64>> {
    if weights.len() != b_values.len() {
        return Err(Error::Config("weights/b_values length mismatch".into()));
    }
    let a = alpha.get();
    if (a - 1.0) * kappa < 0.0 {
        return Err(Error::Config(format!(
            "(alpha-1)*kappa must be >= 0, got alpha={a}, kappa={kappa}"
        )));
    }
    if !(eta > 0.0) {
        return Err(Error::Config(format!("eta must be positive, got {eta}")));
    }
    let hi = power_descent_eta_max(alpha);
    if eta > hi {
        log::warn!("power-descent eta {eta} exceeds the admissible bound {hi} for alpha {a}");
    }
    let expo = eta / (1.0 - a);
    let mut log_unnorm = Vec::with_capacity(weights.len());
    for (j, (&w, &b)) in weights.iter().zip(b_values).enumerate() {
        let bracket = (a - 1.0) * (b + kappa) + 1.0;
        if !(bracket > 0.0) || !bracket.is_finite() {
            return Err(Error::NonpositiveBracket {
                component: j,
                value: bracket,
            });
        }
        log_unnorm.push(w.ln() + expo * bracket.ln());
    }
    Ok(normalise_with_floor(&log_unnorm))
}

/// Versioned checkpoint document for a mixture state.
#[derive(Debug, Serialize, Deserialize)]
struct StateDoc {
    version: u32,
    family: String,
    weights: Vec<f64>,
    components: Vec<Component>,
}

pub fn family_tag(state: &MixtureState) -> &'static str {
    let mut gaussian = false;
    let mut fixed = true;
    let mut student = false;
    for c in state.components() {
        match c {
            Component::Gaussian(g) => {
                gaussian = true;
                if !matches!(g.cov, crate::gaussian::Covariance::FixedIso(_)) {
                    fixed = false;
                }
            }
            Component::Student(_) => student = true,
        }
    }
    match (gaussian, student) {
        (true, false) if fixed => "gaussian-fixed-sigma2",
        (true, false) => "gaussian-full",
        (false, true) => "student-t",
        _ => "mixed",
    }
}

pub fn serialize_state(state: &MixtureState) -> String {
    let doc = StateDoc {
        version: 1,
        family: family_tag(state).to_string(),
        weights: state.weights().to_vec(),
        components: state.components().to_vec(),
    };
    serde_json::to_string_pretty(&doc).expect("state serialises")
}

pub fn deserialize_state(text: &str) -> Result<MixtureState> {
    let doc: StateDoc =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("state JSON: {e}")))?;
    if doc.version != 1 {
        return Err(Error::Parse(format!(
            "unsupported state version {}",
            doc.version
        )));
    }
    MixtureState::new(doc.weights, doc.components)
}
