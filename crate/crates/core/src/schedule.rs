//! Per-iteration hyperparameter schedules.

use serde::{Deserialize, Serialize};

use crate::divergence::AlphaValue;
use crate::error::{Error, Result};
use crate::sampling::SamplerKind;

/// A constant or an explicit per-iteration array. Adaptive schedules are
/// out of scope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Schedule {
    Const(f64),
    PerIteration(Vec<f64>),
}

impl Schedule {
    pub fn at(&self, iteration: usize) -> f64 {
        match self {
            Schedule::Const(v) => *v,
            Schedule::PerIteration(vs) => vs[iteration.min(vs.len().saturating_sub(1))],
        }
    }

    fn check(&self, name: &str, ok: impl Fn(f64) -> bool) -> Result<()> {
        let all = match self {
            Schedule::Const(v) => ok(*v),
            Schedule::PerIteration(vs) => !vs.is_empty() && vs.iter().all(|v| ok(*v)),
        };
        if all {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid {name} schedule: {self:?}")))
        }
    }
}

/// Hyperparameters of one run: α, the weight step η, the shift κ, the
/// parameter step γ, the sampler, and the batch/iteration budget.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleConfig {
    pub alpha: AlphaValue,
    pub eta: Schedule,
    pub kappa: Schedule,
    pub gamma: Schedule,
    pub sampler: SamplerKind,
    pub samples_per_iter: usize,
    pub iterations: usize,
}

impl ScheduleConfig {
    /// Validates the monotone-driver ranges: α ∈ [0, 1), η ∈ [0, 1]
    /// (η = 0 freezes the weights), (α−1)κ ≥ 0, γ ∈ (0, 1].
    pub fn validate(&self) -> Result<()> {
        self.alpha.require_monotone()?;
        self.eta.check("eta", |v| (0.0..=1.0).contains(&v))?;
        let a = self.alpha.get();
        self.kappa.check("kappa", |v| (a - 1.0) * v >= 0.0)?;
        self.gamma.check("gamma", |v| v > 0.0 && v <= 1.0)?;
        if self.samples_per_iter == 0 || self.iterations == 0 {
            return Err(Error::Config("M and N must be >= 1".into()));
        }
        Ok(())
    }
}
