//! Experiment configuration: a TOML file mirrors these fields and CLI
//! flags override the file values.

use serde::Deserialize;
use std::path::Path;

use alphamix_core::{
    AlphaValue, Error, Result, SamplerKind, Schedule, ScheduleConfig, Target, TargetKind,
};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    /// Built-in kind: "ewgmm" | "imbalanced_gmm" | "ewsmm".
    pub kind: Option<String>,
    /// Path to a grid-target CSV (alternative to `kind`).
    pub path: Option<String>,
    pub dim: Option<usize>,
    #[serde(default = "default_c")]
    pub c: f64,
}

fn default_c() -> f64 {
    2.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    /// Variance of the centred normal that draws the initial means.
    #[serde(default = "default_mean_prior_var")]
    pub mean_prior_var: f64,
    /// Initial (or fixed) component variance σ².
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    /// Initial degrees of freedom for Student mixtures.
    #[serde(default = "default_dof")]
    pub dof: f64,
}

fn default_mean_prior_var() -> f64 {
    10.0
}
fn default_sigma2() -> f64 {
    1.0
}
fn default_dof() -> f64 {
    10.0
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec {
            mean_prior_var: default_mean_prior_var(),
            sigma2: default_sigma2(),
            dof: default_dof(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MetricsSpec {
    /// Compute the exact Ψ trace by quadrature (d <= 3 only).
    #[serde(default)]
    pub exact: bool,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_grid_halfwidth")]
    pub grid_halfwidth: f64,
}

fn default_grid_points() -> usize {
    2000
}
fn default_grid_halfwidth() -> f64 {
    25.0
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub etas: Vec<f64>,
    #[serde(default)]
    pub gammas: Vec<f64>,
    #[serde(default)]
    pub components: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    GaussianFull,
    GaussianFixedSigma2,
    StudentT,
}

impl Family {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gaussian-full" => Ok(Family::GaussianFull),
            "gaussian-fixed-sigma2" => Ok(Family::GaussianFixedSigma2),
            "student-t" => Ok(Family::StudentT),
            other => Err(Error::Config(format!("unknown family '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::GaussianFull => "gaussian-full",
            Family::GaussianFixedSigma2 => "gaussian-fixed-sigma2",
            Family::StudentT => "student-t",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateRule {
    /// Maximisation update (means + covariances for the full family).
    Mg,
    /// Gradient means update at fixed covariance.
    Rgd,
}

impl UpdateRule {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mg" => Ok(UpdateRule::Mg),
            "rgd" => Ok(UpdateRule::Rgd),
            other => Err(Error::Config(format!("unknown update rule '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            UpdateRule::Mg => "mg",
            UpdateRule::Rgd => "rgd",
        }
    }
}

/// Raw deserialized file; see [`ExperimentConfig`] for the validated form.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub target: TargetSpec,
    pub family: String,
    pub rule: String,
    pub sampler: String,
    pub components: usize,
    pub samples_per_iter: usize,
    /// Either a total budget N·M...
    pub budget: Option<usize>,
    /// ...or the iteration count N directly.
    pub iterations: Option<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    pub alpha: f64,
    pub eta: toml::Value,
    #[serde(default)]
    pub kappa: Option<toml::Value>,
    pub gamma: toml::Value,
    #[serde(default)]
    pub init: Option<InitSpec>,
    #[serde(default)]
    pub metrics: Option<MetricsSpec>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

fn default_trials() -> usize {
    30
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub target: TargetSpec,
    pub family: Family,
    pub rule: UpdateRule,
    pub components: usize,
    pub schedule: ScheduleConfig,
    pub trials: usize,
    pub seed: u64,
    pub init: InitSpec,
    pub metrics: MetricsSpec,
    pub sweep: SweepSpec,
}

fn schedule_from_toml(v: &toml::Value, name: &str) -> Result<Schedule> {
    match v {
        toml::Value::Float(f) => Ok(Schedule::Const(*f)),
        toml::Value::Integer(i) => Ok(Schedule::Const(*i as f64)),
        toml::Value::Array(items) => {
            let mut out = Vec::with_capacity(items.len());
            for item in items {
                match item {
                    toml::Value::Float(f) => out.push(*f),
                    toml::Value::Integer(i) => out.push(*i as f64),
                    _ => return Err(Error::Config(format!("{name}: non-numeric entry"))),
                }
            }
            if out.is_empty() {
                return Err(Error::Config(format!("{name}: empty schedule")));
            }
            Ok(Schedule::PerIteration(out))
        }
        _ => Err(Error::Config(format!("{name}: expected number or array"))),
    }
}

impl ExperimentConfig {
    pub fn from_raw(raw: RawConfig) -> Result<Self> {
        let family = Family::parse(&raw.family)?;
        let rule = UpdateRule::parse(&raw.rule)?;
        if rule == UpdateRule::Rgd && family != Family::GaussianFixedSigma2 {
            return Err(Error::Config(
                "the rgd rule requires family = \"gaussian-fixed-sigma2\"".into(),
            ));
        }
        if rule == UpdateRule::Rgd && family == Family::StudentT {
            return Err(Error::Config("rgd does not support Student mixtures".into()));
        }
        let sampler = SamplerKind::parse(&raw.sampler)?;
        let m = raw.samples_per_iter;
        let iterations = match (raw.budget, raw.iterations) {
            (Some(b), None) => {
                if m == 0 || b % m != 0 {
                    return Err(Error::Config(format!(
                        "budget {b} must be an exact multiple of samples_per_iter {m}"
                    )));
                }
                b / m
            }
            (None, Some(n)) => n,
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either budget or iterations, not both".into()))
            }
            (None, None) => {
                return Err(Error::Config("one of budget or iterations is required".into()))
            }
        };
        let schedule = ScheduleConfig {
            alpha: AlphaValue::new(raw.alpha)?,
            eta: schedule_from_toml(&raw.eta, "eta")?,
            kappa: raw
                .kappa
                .as_ref()
                .map(|v| schedule_from_toml(v, "kappa"))
                .transpose()?
                .unwrap_or(Schedule::Const(0.0)),
            gamma: schedule_from_toml(&raw.gamma, "gamma")?,
            sampler,
            samples_per_iter: m,
            iterations,
        };
        schedule.validate()?;
        if raw.components == 0 {
            return Err(Error::Config("components must be >= 1".into()));
        }
        if raw.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        let config = ExperimentConfig {
            target: raw.target,
            family,
            rule,
            components: raw.components,
            schedule,
            trials: raw.trials,
            seed: raw.seed,
            init: raw.init.unwrap_or_default(),
            metrics: raw.metrics.unwrap_or_default(),
            sweep: raw.sweep.unwrap_or_default(),
        };
        config.build_target()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Config(format!("{}: {e}", path.as_ref().display())))?;
        let raw: RawConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("TOML: {e}")))?;
        ExperimentConfig::from_raw(raw)
    }

    pub fn build_target(&self) -> Result<Target> {
        match (&self.target.kind, &self.target.path) {
            (Some(kind), None) => {
                let d = self
                    .target
                    .dim
                    .ok_or_else(|| Error::Config("target.dim required for built-ins".into()))?;
                alphamix_core::builtin_target(TargetKind::parse(kind)?, d, self.target.c)
            }
            (None, Some(path)) => alphamix_core::load_grid_target(path),
            _ => Err(Error::Config(
                "target needs exactly one of kind or path".into(),
            )),
        }
    }

    pub fn target_label(&self) -> String {
        match (&self.target.kind, &self.target.path) {
            (Some(kind), _) => kind.clone(),
            (_, Some(path)) => path.clone(),
            _ => "?".into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_toml() -> String {
        r#"
            family = "gaussian-full"
            rule = "mg"
            sampler = "is_n"
            components = 10
            samples_per_iter = 200
            budget = 20000
            trials = 10
            seed = 7
            alpha = 0.2
            eta = 0.0
            gamma = 0.5

            [target]
            kind = "ewgmm"
            dim = 16
            c = 2.0
        "#
        .to_string()
    }

    #[test]
    fn parses_budget_into_iterations() {
        let raw: RawConfig = toml::from_str(&base_toml()).unwrap();
        let cfg = ExperimentConfig::from_raw(raw).unwrap();
        assert_eq!(cfg.schedule.iterations, 100);
        assert_eq!(cfg.schedule.samples_per_iter, 200);
        assert_eq!(cfg.init.mean_prior_var, 10.0);
    }

    #[test]
    fn rejects_inexact_budget() {
        let toml_text = base_toml().replace("budget = 20000", "budget = 20001");
        let raw: RawConfig = toml::from_str(&toml_text).unwrap();
        assert!(ExperimentConfig::from_raw(raw).is_err());
    }

    #[test]
    fn rejects_rgd_with_full_family() {
        let toml_text = base_toml().replace("rule = \"mg\"", "rule = \"rgd\"");
        let raw: RawConfig = toml::from_str(&toml_text).unwrap();
        assert!(ExperimentConfig::from_raw(raw).is_err());
    }

    #[test]
    fn schedules_accept_arrays() {
        let toml_text = base_toml().replace("gamma = 0.5", "gamma = [0.5, 0.25]");
        let raw: RawConfig = toml::from_str(&toml_text).unwrap();
        let cfg = ExperimentConfig::from_raw(raw).unwrap();
        assert_eq!(cfg.schedule.gamma.at(1), 0.25);
        assert_eq!(cfg.schedule.gamma.at(50), 0.25);
    }

    #[test]
    fn rejects_unknown_fields() {
        let toml_text = base_toml() + "\nbogus = 1\n";
        assert!(toml::from_str::<RawConfig>(&toml_text).is_err());
    }
}
