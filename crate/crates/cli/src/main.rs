use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use diffac::harness::{self, ExecutionMode, ExperimentConfig};
use diffac::tabular::{
    dual_ascent, random_family, solve_primal_lp, DualAscentConfig, RandomMdpSpec,
};

#[derive(Parser)]
#[command(
    name = "diffac",
    version,
    about = "Distributed multitask actor-critic experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Sync,
    Parallel,
}

#[derive(clap::Args)]
struct Overrides {
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "drop-prob")]
    drop_prob: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate every seed of an experiment.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Evaluate saved checkpoints on the configured tasks.
    Eval {
        checkpoint_dir: PathBuf,
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Solve a random tabular task family by LP and by dual ascent.
    TabularDemo {
        seed: u64,
        #[arg(long, default_value_t = 3)]
        tasks: usize,
        #[arg(long, default_value_t = 5)]
        states: usize,
        #[arg(long, default_value_t = 3)]
        actions: usize,
    },
    /// Parse and validate a config without running it.
    ValidateConfig { config: PathBuf },
}

fn load(path: &Path, o: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg =
        ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(s) = o.seed {
        cfg.seeds = vec![s];
    }
    if let Some(m) = o.mode {
        cfg.mode = match m {
            Mode::Sync => ExecutionMode::Sync,
            Mode::Parallel => ExecutionMode::Parallel,
        };
    }
    if let Some(out) = &o.out {
        cfg.output_dir = out.clone();
    }
    if let Some(p) = o.drop_prob {
        cfg.drop_probability = p;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cfg: &ExperimentConfig) -> Result<bool> {
    let summary = harness::run_experiment(cfg)?;
    let mut ok = true;
    for s in &summary.seeds {
        match (&s.error, s.final_mean_return) {
            (Some(e), _) => {
                ok = false;
                eprintln!(
                    "seed {}: failed after {} epochs: {e}",
                    s.seed, s.epochs_completed
                );
            }
            (None, r) => println!(
                "seed {}: {} epochs, final mean return {:.3}, deviation {}",
                s.seed,
                s.epochs_completed,
                r.unwrap_or(f64::NAN),
                s.deviation
                    .as_ref()
                    .map_or("n/a".into(), |d| format!("{:.3}%", d.percent)),
            ),
        }
    }
    println!("results in {}", summary.output_dir.display());
    Ok(ok)
}

fn eval(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    let tasks = cfg.tasks()?;
    for &seed in &cfg.seeds {
        let learners = harness::load_checkpoints(cfg, seed, dir).with_context(|| {
            format!("loading checkpoints for seed {seed} from {}", dir.display())
        })?;
        let refs: Vec<_> = learners.iter().collect();
        let res = harness::cross_task_eval(&refs, &tasks, cfg.eval_episodes, seed)?;
        println!(
            "{}",
            serde_json::to_string(&serde_json::json!({ "seed": seed, "result": res }))?
        );
    }
    Ok(())
}

fn tabular_demo(seed: u64, tasks: usize, states: usize, actions: usize) -> Result<()> {
    if tasks == 0 || states == 0 || actions == 0 {
        bail!("tasks, states and actions must be positive");
    }
    let family = random_family::<f64>(&RandomMdpSpec::new(states, actions), tasks, seed)?;
    let avg = diffac::tabular::average_kernel(&family)?;
    let lp = solve_primal_lp(&avg)?;
    let res = dual_ascent(&family, &DualAscentConfig::default())?;
    println!("primal objective   {:.6}", avg.objective(&lp));
    println!("dual objective     {:.6}", avg.objective(&res.values));
    println!(
        "iterations         {} (converged: {})",
        res.iterations, res.converged
    );
    println!("slackness residual {:.3e}", res.slackness_residual());
    for s in 0..states {
        let row: Vec<String> = res
            .policy
            .row(s)
            .iter()
            .map(|p| format!("{p:.3}"))
            .collect();
        println!("pi(.|{s}) = [{}]", row.join(", "));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, overrides } => load(config, overrides).and_then(|c| run(&c)),
        Command::Eval {
            checkpoint_dir,
            config,
            overrides,
        } => load(config, overrides)
            .and_then(|c| eval(checkpoint_dir, &c))
            .map(|_| true),
        Command::TabularDemo {
            seed,
            tasks,
            states,
            actions,
        } => tabular_demo(*seed, *tasks, *states, *actions).map(|_| true),
        Command::ValidateConfig { config } => load(
            config,
            &Overrides {
                seed: None,
                mode: None,
                out: None,
                drop_prob: None,
            },
        )
        .map(|c| {
            println!(
                "ok: {} seeds, {} tasks",
                c.seeds.len(),
                c.tasks().map(|t| t.len()).unwrap_or(0)
            );
            true
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
