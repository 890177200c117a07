//! Trial execution: initialisation, the per-iteration loop, and the
//! evaluation-budget bookkeeping.

use std::time::Instant;

use alphamix_core::stats::log_sum_exp;
use alphamix_core::{
    build_sinh, build_uniform, draw_samples, estimate_stats_from_evals, mg_update, rgd_update_means,
    rng_stream, student_step, update_weights, BatchEvals, Component, Error, ExactEngine,
    GaussianParams, MixtureState, Result, StreamKey, StudentTParams, Target,
};
use rand_distr::StandardNormal;

use crate::config::{ExperimentConfig, Family, UpdateRule};

/// Weight snapshots are stored every iteration only up to this many
/// components; larger mixtures keep first/last only.
const WEIGHT_SNAPSHOT_MAX_J: usize = 64;

#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iter: usize,
    pub vr_estimate: f64,
    pub psi_exact: Option<f64>,
    pub weights: Option<Vec<f64>>,
    pub ess_min: f64,
    pub skipped_components: usize,
    pub wall_secs: f64,
}

#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub trace: Vec<IterationRecord>,
    pub final_state: MixtureState,
    /// Target evaluations spent on updates (must equal N·M).
    pub update_evals: u64,
    /// Target evaluations spent on exact metrics (grid caching).
    pub metric_evals: u64,
}

/// Draws the initial mixture: means from a centred normal with variance
/// `mean_prior_var`, uniform weights, covariance σ²I (or the Student
/// scale/dof), using the trial's iteration-0 stream.
pub fn init_state(config: &ExperimentConfig, dim: usize, trial: u64) -> Result<MixtureState> {
    let mut rng = rng_stream(config.seed, trial, 0);
    let std = config.init.mean_prior_var.sqrt();
    let j = config.components;
    let mut comps = Vec::with_capacity(j);
    for _ in 0..j {
        let mean: Vec<f64> = (0..dim)
            .map(|_| std * rand::Rng::sample::<f64, _>(&mut rng, StandardNormal))
            .collect();
        let comp = match config.family {
            Family::GaussianFull => {
                Component::Gaussian(GaussianParams::iso(mean, config.init.sigma2))
            }
            Family::GaussianFixedSigma2 => {
                Component::Gaussian(GaussianParams::fixed_iso(mean, config.init.sigma2))
            }
            Family::StudentT => {
                Component::Student(StudentTParams::iso(mean, config.init.sigma2, config.init.dof))
            }
        };
        comps.push(comp);
    }
    MixtureState::uniform(comps)
}

/// Bound estimate from the shared batch. For the mixture proposal the
/// correction term cancels; for the uniform proposal the importance
/// correction keeps the estimator aimed at the current mixture. Points
/// where the target vanishes contribute zero mass.
fn vr_estimate_from_evals(alpha: f64, evals: &BatchEvals, log_prop: &[f64]) -> f64 {
    let terms: Vec<f64> = (0..evals.log_p.len())
        .map(|i| {
            if evals.log_p[i] == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                alpha * evals.log_mix[i] + (1.0 - alpha) * evals.log_p[i] - log_prop[i]
            }
        })
        .collect();
    (log_sum_exp(&terms) - (terms.len() as f64).ln()) / (1.0 - alpha)
}

/// Builds the exact-metric engine for low-dimensional targets: a wide
/// midpoint grid for light tails, a sinh-stretched grid for Student
/// targets in one dimension.
fn metric_engine(config: &ExperimentConfig, target: &Target) -> Result<Option<ExactEngine>> {
    if !config.metrics.exact {
        return Ok(None);
    }
    let d = target.dim();
    if d > 3 {
        return Err(Error::Config(
            "exact metrics require target dimension <= 3".into(),
        ));
    }
    let heavy_tail = matches!(config.target.kind.as_deref(), Some("ewsmm"));
    let grid = if heavy_tail && d == 1 {
        build_sinh(config.metrics.grid_points.max(2000), 4.0, 10.0)?
    } else {
        let hw = config.metrics.grid_halfwidth;
        build_uniform(d, config.metrics.grid_points, &vec![-hw; d], &vec![hw; d])?
    };
    Ok(Some(ExactEngine::new(target, grid, config.schedule.alpha)?))
}

/// Runs one trial: N iterations of draw → estimate → component update →
/// weight update → record. Deterministic given (config.seed, trial).
pub fn run_trial(config: &ExperimentConfig, target: &Target, trial: u64) -> Result<TrialOutput> {
    let dim = target.dim();
    let mut state = init_state(config, dim, trial)?;
    let evals_before = target.eval_count();
    let engine = metric_engine(config, target)?;
    let metric_evals = target.eval_count() - evals_before;

    let alpha = config.schedule.alpha;
    let n_iters = config.schedule.iterations;
    let m = config.schedule.samples_per_iter;
    let mut trace = Vec::with_capacity(n_iters);
    let snapshot_all = config.components <= WEIGHT_SNAPSHOT_MAX_J;

    for n in 1..=n_iters {
        let started = Instant::now();
        let eta = config.schedule.eta.at(n - 1);
        let kappa = config.schedule.kappa.at(n - 1);
        let gamma = config.schedule.gamma.at(n - 1);

        let batch = draw_samples(
            &state,
            config.schedule.sampler,
            m,
            StreamKey {
                master_seed: config.seed,
                trial,
                iteration: n as u64,
            },
        )?;
        let evals = BatchEvals::compute(&batch, &state, target)?;
        let stats = estimate_stats_from_evals(&batch, &evals, alpha);
        let vr = vr_estimate_from_evals(alpha.get(), &evals, &batch.log_q);

        let mut skipped;
        let comps = match (config.rule, config.family) {
            (UpdateRule::Mg, Family::StudentT) => {
                let resp: Vec<Option<(Vec<Vec<f64>>, Vec<f64>)>> = stats
                    .norm_weights
                    .iter()
                    .map(|w| w.as_ref().map(|w| (batch.points.clone(), w.clone())))
                    .collect();
                let (c, diag) = student_step(&state, &resp, gamma)?;
                skipped = diag.skipped;
                c
            }
            (UpdateRule::Mg, _) => {
                let (c, diag) = mg_update(&state, &stats.moments, gamma)?;
                skipped = diag.skipped;
                c
            }
            (UpdateRule::Rgd, _) => {
                let (c, diag) = rgd_update_means(&state, &stats.moments, gamma)?;
                skipped = diag.skipped;
                c
            }
        };

        // The weight update needs every component's mass; if any are
        // unavailable this iteration the weights stay put (skip path).
        let masses = stats.masses();
        let weights = if masses.iter().all(Option::is_some) {
            let masses: Vec<f64> = masses.into_iter().map(Option::unwrap).collect();
            update_weights(state.weights(), &masses, eta, kappa, alpha)?
        } else {
            skipped += 1;
            state.weights().to_vec()
        };
        state = MixtureState::new(weights, comps)?;

        let psi_exact = match &engine {
            Some(eng) => Some(eng.psi(&state)?),
            None => None,
        };
        let weights_snapshot = if snapshot_all || n == 1 || n == n_iters {
            Some(state.weights().to_vec())
        } else {
            None
        };
        trace.push(IterationRecord {
            iter: n,
            vr_estimate: vr,
            psi_exact,
            weights: weights_snapshot,
            ess_min: stats.min_ess(),
            skipped_components: skipped,
            wall_secs: started.elapsed().as_secs_f64(),
        });
    }

    let total = target.eval_count() - evals_before;
    Ok(TrialOutput {
        trace,
        final_state: state,
        update_evals: total - metric_evals,
        metric_evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RawConfig;

    fn config(toml_text: &str) -> ExperimentConfig {
        let raw: RawConfig = toml::from_str(toml_text).unwrap();
        ExperimentConfig::from_raw(raw).unwrap()
    }

    fn small_config() -> ExperimentConfig {
        config(
            r#"
            family = "gaussian-full"
            rule = "mg"
            sampler = "is_n"
            components = 3
            samples_per_iter = 50
            iterations = 20
            trials = 2
            seed = 11
            alpha = 0.2
            eta = 0.1
            gamma = 0.5

            [target]
            kind = "ewgmm"
            dim = 1
            c = 2.0

            [metrics]
            exact = true
            grid_points = 1000
            grid_halfwidth = 25.0
        "#,
        )
    }

    #[test]
    fn trial_is_deterministic_and_budgeted() {
        let cfg = small_config();
        let t1 = cfg.build_target().unwrap();
        let out1 = run_trial(&cfg, &t1, 0).unwrap();
        let t2 = cfg.build_target().unwrap();
        let out2 = run_trial(&cfg, &t2, 0).unwrap();
        assert_eq!(out1.trace.len(), 20);
        // Bit-identical traces for a fixed (seed, trial).
        for (a, b) in out1.trace.iter().zip(&out2.trace) {
            assert_eq!(a.vr_estimate.to_bits(), b.vr_estimate.to_bits());
            assert_eq!(a.psi_exact.map(f64::to_bits), b.psi_exact.map(f64::to_bits));
        }
        assert_eq!(
            out1.final_state.weights(),
            out2.final_state.weights()
        );
        // Update budget is exactly N·M; metric evals counted apart.
        assert_eq!(out1.update_evals, 20 * 50);
        assert_eq!(out1.metric_evals, 1000);
    }

    #[test]
    fn different_trials_differ() {
        let cfg = small_config();
        let t = cfg.build_target().unwrap();
        let a = run_trial(&cfg, &t, 0).unwrap();
        let b = run_trial(&cfg, &t, 1).unwrap();
        assert_ne!(
            a.final_state.components()[0],
            b.final_state.components()[0]
        );
    }

    #[test]
    fn student_family_runs() {
        let cfg = config(
            r#"
            family = "student-t"
            rule = "mg"
            sampler = "is_unif"
            components = 2
            samples_per_iter = 64
            iterations = 5
            trials = 1
            seed = 3
            alpha = 0.2
            eta = 0.1
            gamma = 0.5

            [target]
            kind = "ewsmm"
            dim = 1
            c = 2.0

            [init]
            dof = 5.0
        "#,
        );
        let t = cfg.build_target().unwrap();
        let out = run_trial(&cfg, &t, 0).unwrap();
        assert_eq!(out.trace.len(), 5);
        let Component::Student(s) = &out.final_state.components()[0] else {
            panic!("expected student component")
        };
        assert!(s.dof > 0.0);
    }
}
