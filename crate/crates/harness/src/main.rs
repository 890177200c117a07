use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use alphamix_core::{deserialize_state, AlphaValue, Error, ExactEngine};
use alphamix_harness::{replicate, write_all, ExperimentConfig};

#[derive(Parser)]
#[command(name = "alphamix", about = "Alpha-divergence mixture optimisation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML).
    config: PathBuf,
    /// Output directory for CSVs and state checkpoints.
    #[arg(long)]
    out: PathBuf,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Trial-count override.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads for trial replication.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment cell and write trace/summary/weights CSVs.
    Run(RunArgs),
    /// Run the cartesian product of the [sweep] lists; one directory per
    /// cell plus an index CSV.
    Sweep(RunArgs),
    /// Recompute metrics from a saved state checkpoint.
    Eval {
        /// State checkpoint (state_trial*.json).
        state: PathBuf,
        /// The experiment configuration the state came from.
        #[arg(long)]
        config: PathBuf,
    },
    /// Target utilities.
    Targets {
        #[command(subcommand)]
        action: TargetsAction,
    },
}

#[derive(Subcommand)]
enum TargetsAction {
    /// List the built-in target kinds.
    List,
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(trials) = args.trials {
        if trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        config.trials = trials;
    }
    Ok(config)
}

fn cmd_run(args: &RunArgs) -> Result<(), Error> {
    let config = load_config(args)?;
    let report = replicate(&config, args.threads)?;
    write_all(&config, &report, &args.out)?;
    println!(
        "wrote {} (iters={}, trials={}, logmse={})",
        args.out.display(),
        config.schedule.iterations,
        config.trials,
        report.logmse
    );
    Ok(())
}

fn cmd_sweep(args: &RunArgs) -> Result<(), Error> {
    let base = load_config(args)?;
    let etas = if base.sweep.etas.is_empty() {
        vec![base.schedule.eta.at(0)]
    } else {
        base.sweep.etas.clone()
    };
    let gammas = if base.sweep.gammas.is_empty() {
        vec![base.schedule.gamma.at(0)]
    } else {
        base.sweep.gammas.clone()
    };
    let js = if base.sweep.components.is_empty() {
        vec![base.components]
    } else {
        base.sweep.components.clone()
    };
    std::fs::create_dir_all(&args.out)
        .map_err(|e| Error::Config(format!("{}: {e}", args.out.display())))?;
    let mut index = String::from("cell,eta,gamma,J,logmse,dir\n");
    let mut cell = 0usize;
    for &eta in &etas {
        for &gamma in &gammas {
            for &j in &js {
                let mut config = base.clone();
                config.schedule.eta = alphamix_core::Schedule::Const(eta);
                config.schedule.gamma = alphamix_core::Schedule::Const(gamma);
                config.components = j;
                config.schedule.validate()?;
                let dir = args.out.join(format!("cell{cell:03}_eta{eta}_gamma{gamma}_J{j}"));
                let report = replicate(&config, args.threads)?;
                write_all(&config, &report, &dir)?;
                index.push_str(&format!(
                    "{cell},{eta},{gamma},{j},{},{}\n",
                    report.logmse,
                    dir.display()
                ));
                cell += 1;
            }
        }
    }
    let index_path = args.out.join("index.csv");
    std::fs::write(&index_path, index)
        .map_err(|e| Error::Config(format!("{}: {e}", index_path.display())))?;
    println!("wrote {} cells under {}", cell, args.out.display());
    Ok(())
}

fn cmd_eval(state_path: &PathBuf, config_path: &PathBuf) -> Result<(), Error> {
    let config = ExperimentConfig::load(config_path)?;
    let text = std::fs::read_to_string(state_path)
        .map_err(|e| Error::Config(format!("{}: {e}", state_path.display())))?;
    let state = deserialize_state(&text)?;
    let target = config.build_target()?;
    println!("family: {}", alphamix_core::family_tag(&state));
    println!("components: {}", state.len());
    let mean = state.mixture_mean();
    println!(
        "mixture_mean: [{}]",
        mean.iter()
            .map(|v| format!("{v:.6}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    if let Some(true_mean) = &target.true_mean {
        let err: f64 = mean
            .iter()
            .zip(true_mean)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        println!("squared_error: {err}");
        println!("log_squared_error: {}", err.ln().max(-50.0));
    }
    if target.dim() <= 3 {
        let d = target.dim();
        let hw = config.metrics.grid_halfwidth;
        let pts = config.metrics.grid_points;
        let grid = alphamix_core::build_uniform(d, pts, &vec![-hw; d], &vec![hw; d])?;
        let engine = ExactEngine::new(&target, grid, config.schedule.alpha)?;
        println!("psi_exact: {}", engine.psi(&state)?);
        println!("vr_exact: {}", engine.vr_bound(&state)?);
    }
    let alpha: AlphaValue = config.schedule.alpha;
    println!("alpha: {}", alpha.get());
    Ok(())
}

fn cmd_targets_list() {
    println!("ewgmm            c x [0.5 N(-2u, I) + 0.5 N(2u, I)]");
    println!("imbalanced_gmm   c x [0.35 N(-2u, I) + 0.25 N(2u, I) + 0.4 N(u, I)]");
    println!("ewsmm            c x [0.5 t(-2u, I, 2) + 0.5 t(2u, I, 2)]");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Eval { state, config } => cmd_eval(state, config),
        Command::Targets { action } => {
            match action {
                TargetsAction::List => cmd_targets_list(),
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ (Error::Config(_) | Error::Parse(_))) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("numeric failure: {e}");
            ExitCode::from(3)
        }
    }
}
