//! Trial replication, aggregation, and CSV emission.

use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use alphamix_core::{serialize_state, Error, MixtureState, Result, Target};

use crate::config::ExperimentConfig;
use crate::driver::{run_trial, TrialOutput};

/// Natural log of the trial-averaged squared error of the mixture mean,
/// floored at −50 to keep reports finite.
pub fn log_mse(final_states: &[MixtureState], target: &Target) -> Result<f64> {
    let Some(true_mean) = target.true_mean.as_ref() else {
        return Err(Error::Config(format!(
            "target '{}' has no reference mean",
            target.label
        )));
    };
    if final_states.is_empty() {
        return Err(Error::Config("no trials to aggregate".into()));
    }
    let mut acc = 0.0;
    for state in final_states {
        let m = state.mixture_mean();
        let err: f64 = m
            .iter()
            .zip(true_mean)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        acc += err;
    }
    let mse = acc / final_states.len() as f64;
    Ok(mse.ln().max(-50.0))
}

/// Linear-interpolation percentile of an unsorted sample (q in [0, 1]).
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 >= sorted.len() {
        sorted[sorted.len() - 1]
    } else {
        sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
    }
}

#[derive(Debug, Clone)]
pub struct TraceRow {
    pub iter: usize,
    pub vr_mean: f64,
    pub vr_p10: f64,
    pub vr_p90: f64,
    pub psi_exact: Option<f64>,
    pub ess_min: f64,
}

#[derive(Debug)]
pub struct Report {
    pub rows: Vec<TraceRow>,
    pub logmse: f64,
    pub trials: Vec<TrialOutput>,
}

/// Runs every trial (in a worker pool when `threads > 1`), then aggregates
/// with a fixed trial order so output is schedule-independent.
pub fn replicate(config: &ExperimentConfig, threads: usize) -> Result<Report> {
    let trials = config.trials;
    let slots: Vec<Mutex<Option<Result<TrialOutput>>>> =
        (0..trials).map(|_| Mutex::new(None)).collect();
    let next = AtomicU64::new(0);
    let workers = threads.max(1).min(trials);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let t = next.fetch_add(1, Ordering::Relaxed) as usize;
                if t >= trials {
                    break;
                }
                // Each trial gets its own target clone; counters are
                // shared but per-trial audits happen in the driver tests.
                let out = config
                    .build_target()
                    .and_then(|target| run_trial(config, &target, t as u64));
                *slots[t].lock().unwrap() = Some(out);
            });
        }
    });
    let mut outputs = Vec::with_capacity(trials);
    for slot in slots {
        outputs.push(slot.into_inner().unwrap().expect("worker filled slot")?);
    }

    let n_iters = config.schedule.iterations;
    let mut rows = Vec::with_capacity(n_iters);
    for i in 0..n_iters {
        let vrs: Vec<f64> = outputs.iter().map(|o| o.trace[i].vr_estimate).collect();
        let vr_mean = vrs.iter().sum::<f64>() / vrs.len() as f64;
        let psis: Vec<f64> = outputs
            .iter()
            .filter_map(|o| o.trace[i].psi_exact)
            .collect();
        let psi_exact = if psis.is_empty() {
            None
        } else {
            Some(psis.iter().sum::<f64>() / psis.len() as f64)
        };
        let ess_min = outputs
            .iter()
            .map(|o| o.trace[i].ess_min)
            .fold(f64::INFINITY, f64::min);
        rows.push(TraceRow {
            iter: i + 1,
            vr_mean,
            vr_p10: percentile(&vrs, 0.10),
            vr_p90: percentile(&vrs, 0.90),
            psi_exact,
            ess_min,
        });
    }
    let states: Vec<MixtureState> = outputs.iter().map(|o| o.final_state.clone()).collect();
    let target = config.build_target()?;
    let logmse = if target.true_mean.is_some() {
        log_mse(&states, &target)?
    } else {
        f64::NAN
    };
    Ok(Report {
        rows,
        logmse,
        trials: outputs,
    })
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

pub fn write_trace_csv(report: &Report, path: &Path) -> Result<()> {
    let mut out = String::from("iter,vr_mean,vr_p10,vr_p90,psi_exact,ess_min\n");
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.iter,
            fmt(r.vr_mean),
            fmt(r.vr_p10),
            fmt(r.vr_p90),
            r.psi_exact.map(fmt).unwrap_or_default(),
            fmt(r.ess_min)
        ));
    }
    fs::write(path, out).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn write_summary_csv(config: &ExperimentConfig, report: &Report, path: &Path) -> Result<()> {
    let mut out = String::from("target,rule,sampler,J,gamma,eta,alpha,logmse,trials,seed\n");
    out.push_str(&format!(
        "{},{},{},{},{},{},{},{},{},{}\n",
        config.target_label(),
        config.rule.name(),
        config.schedule.sampler.name(),
        config.components,
        fmt(config.schedule.gamma.at(0)),
        fmt(config.schedule.eta.at(0)),
        fmt(config.schedule.alpha.get()),
        fmt(report.logmse),
        config.trials,
        config.seed
    ));
    fs::write(path, out).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Weight snapshots of trial 0 (one typical run), long format.
pub fn write_weights_csv(report: &Report, path: &Path) -> Result<()> {
    let mut out = String::from("iter,j,lambda\n");
    if let Some(first) = report.trials.first() {
        for rec in &first.trace {
            if let Some(w) = &rec.weights {
                for (j, v) in w.iter().enumerate() {
                    out.push_str(&format!("{},{},{}\n", rec.iter, j + 1, v));
                }
            }
        }
    }
    fs::write(path, out).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn write_states(report: &Report, dir: &Path) -> Result<()> {
    for (t, out) in report.trials.iter().enumerate() {
        let path = dir.join(format!("state_trial{t}.json"));
        fs::write(&path, serialize_state(&out.final_state))
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

/// Full run artefact: trace.csv, summary.csv, weights.csv, state files.
pub fn write_all(config: &ExperimentConfig, report: &Report, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?;
    write_trace_csv(report, &dir.join("trace.csv"))?;
    write_summary_csv(config, report, &dir.join("summary.csv"))?;
    write_weights_csv(report, &dir.join("weights.csv"))?;
    write_states(report, dir)
}
