use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use social_inverse::harness::commands::{
    cmd_bound, cmd_experiment, cmd_generate_graph, cmd_invert, cmd_simulate, BoundArgs, InvertArgs,
};
use social_inverse::harness::{Experiment, ExperimentConfig, OUTPUT_DIR_ENV};
use social_inverse::{Error, InverseConfig};

#[derive(Parser)]
#[command(
    name = "social-inverse",
    version,
    about = "Social learning simulation and inverse recovery of agents' true states"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw an Erdos-Renyi graph with the averaging rule.
    GenerateGraph {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Simulate the first trial of a configuration and write its trace.
    Simulate {
        #[command(flatten)]
        common: ConfigArgs,
    },
    /// Run the inverse estimator on a trace or belief stream.
    Invert {
        /// Trace (.csv/.json) or public-belief stream (.jsonl).
        #[arg(long)]
        trace: PathBuf,
        /// Experiment config supplying ground truth and the majority state.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        #[command(flatten)]
        out: OutArg,
    },
    /// Tabulate the wrong-hypothesis probability bound.
    Bound {
        #[command(flatten)]
        common: ConfigArgs,
        /// Window sizes to tabulate (defaults to the config's M).
        #[arg(long = "sweep-M", value_delimiter = ',')]
        sweep_m: Vec<usize>,
        /// metrics.json of a finished experiment, for empirical frequencies.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Run Monte-Carlo trials and aggregate metrics.
    Experiment {
        #[command(flatten)]
        common: ConfigArgs,
    },
}

#[derive(Args)]
struct OutArg {
    /// Output directory.
    #[arg(long, env = OUTPUT_DIR_ENV)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Default)]
struct Overrides {
    /// Root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of Monte-Carlo trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Adaptation parameter δ in (0, 1).
    #[arg(long)]
    delta: Option<f64>,
    /// Simulated iterations per trial.
    #[arg(long)]
    iterations: Option<usize>,
    /// Estimator window size M.
    #[arg(long = "batch-M")]
    batch_m: Option<usize>,
    /// Estimator step size μ.
    #[arg(long)]
    step_mu: Option<f64>,
    /// Relative change of Â that stops the estimator (0 disables).
    #[arg(long)]
    tol: Option<f64>,
    /// Cap on belief matrices consumed by the estimator.
    #[arg(long)]
    max_iter: Option<usize>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(v) = self.seed {
            cfg.root_seed = v;
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = self.delta {
            cfg.delta = v;
        }
        if let Some(v) = self.iterations {
            cfg.iterations = v;
        }
        if let Some(v) = self.batch_m {
            cfg.inverse.batch_m = v;
        }
        if let Some(v) = self.step_mu {
            cfg.inverse.step_mu = v;
        }
        if let Some(v) = self.tol {
            cfg.inverse.tol = v;
        }
        if self.max_iter.is_some() {
            cfg.inverse.max_iter = self.max_iter;
        }
    }
}

fn load_experiment(path: &Path, overrides: &Overrides) -> anyhow::Result<Experiment> {
    let mut cfg = ExperimentConfig::load(path)?;
    overrides.apply(&mut cfg);
    Ok(cfg.resolve()?)
}

fn out_dir(arg: &OutArg, exp: Option<&Experiment>) -> PathBuf {
    arg.out
        .clone()
        .or_else(|| exp.and_then(|e| e.config.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn print<T: Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::GenerateGraph { n, p, seed, out } => {
            let dir = out_dir(&out, None);
            print(&cmd_generate_graph(n, p, seed, &dir)?)
        }
        Command::Simulate { common } => {
            let exp = load_experiment(&common.config, &common.overrides)?;
            let dir = out_dir(&common.out, Some(&exp));
            print(&cmd_simulate(&exp, &dir)?)
        }
        Command::Invert {
            trace,
            config,
            overrides,
            out,
        } => {
            let exp = config
                .as_deref()
                .map(|p| load_experiment(p, &overrides))
                .transpose()?;
            let mut inverse = match &exp {
                Some(e) => e.inverse_config(),
                None => InverseConfig::default(),
            };
            if let Some(v) = overrides.batch_m {
                inverse.batch_m = v;
            }
            if let Some(v) = overrides.step_mu {
                inverse.step_mu = v;
            }
            if let Some(v) = overrides.tol {
                inverse.tol = v;
            }
            if overrides.max_iter.is_some() {
                inverse.max_iter = overrides.max_iter;
            }
            let args = InvertArgs {
                input: trace.clone(),
                inverse,
                delta: overrides.delta,
                experiment: exp.as_ref(),
                out: out_dir(&out, exp.as_ref()),
            };
            let summary =
                cmd_invert(&args).with_context(|| format!("inverting {}", trace.display()))?;
            print(&summary)
        }
        Command::Bound {
            common,
            sweep_m,
            metrics,
        } => {
            let exp = load_experiment(&common.config, &common.overrides)?;
            let batch_ms = if sweep_m.is_empty() {
                vec![exp.config.inverse.batch_m]
            } else {
                sweep_m
            };
            let args = BoundArgs {
                experiment: &exp,
                batch_ms,
                metrics,
                out: out_dir(&common.out, Some(&exp)),
            };
            print(&cmd_bound(&args)?)
        }
        Command::Experiment { common } => {
            let exp = load_experiment(&common.config, &common.overrides)?;
            let dir = out_dir(&common.out, Some(&exp));
            let report = cmd_experiment(&exp, &dir)?;
            print(&serde_json::json!({
                "config_hash": report.config_hash,
                "root_seed": report.root_seed,
                "trials_requested": report.trials_requested,
                "trials_succeeded": report.trials_succeeded,
                "learning_accuracy": report.learning_accuracy,
                "detection_accuracy": report.detection_accuracy,
                "all_agents_correct": report.all_agents_correct,
                "output_dir": dir,
            }))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err.downcast_ref::<Error>().map_or(1, Error::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
