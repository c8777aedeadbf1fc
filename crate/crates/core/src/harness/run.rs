use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::agents::networks_for;
use crate::agents::{run_parallel, Agent, EventLog, Learner, Role, System};
use crate::envs::EnvParams;
use crate::error::{Error, Result};
use crate::network::disagreement_norm;
use crate::nn::{decode_params, encode_params, ParamVector};

use super::config::{ExecutionMode, ExperimentConfig};
use super::eval::{mean, task_eval_seed};
use super::metrics::{
    aggregate, parameter_deviation, write_jsonl, CsvSink, Deviation, MetricsRecord, TimingRecord,
    METRICS_COLUMNS,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub completed: bool,
    pub error: Option<String>,
    pub epochs_completed: usize,
    /// Mean over tasks of the last evaluation.
    pub final_mean_return: Option<f64>,
    pub deviation: Option<Deviation>,
    pub episodes: u64,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub output_dir: PathBuf,
    pub seeds: Vec<SeedOutcome>,
}

pub fn metrics_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("metrics_seed{seed}.csv"))
}

pub fn checkpoint_dir(dir: &Path, seed: u64) -> PathBuf {
    dir.join("checkpoints").join(format!("seed{seed}"))
}

/// The policy evaluated on task `k`.
pub fn learner_for_task(role: Role, agents: &[Agent], k: usize) -> &Learner {
    match role {
        Role::Centralised => &agents[0].learner,
        _ => &agents[k].learner,
    }
}

/// Mean evaluation return on each task.
pub fn evaluate_agents(
    role: Role,
    agents: &[Agent],
    tasks: &[EnvParams],
    episodes: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    (0..tasks.len())
        .map(|k| {
            let l = learner_for_task(role, agents, k);
            let r = l.evaluate(&tasks[k], episodes, task_eval_seed(seed, k));
            r.map(|v| mean(&v)).map_err(|e| Error::Numerical {
                agent: k,
                what: e.to_string(),
            })
        })
        .collect()
}

pub fn stacked_params(agents: &[Agent]) -> Vec<ParamVector<f64>> {
    agents
        .iter()
        .map(|a| ParamVector::concat(&a.learner.actor_params, &a.learner.critic_params))
        .collect()
}

struct SeedWriter<'a> {
    cfg: &'a ExperimentConfig,
    seed: u64,
    tasks: Vec<EnvParams>,
    metrics: CsvSink<std::fs::File>,
    timing: CsvSink<std::fs::File>,
    records: Vec<MetricsRecord>,
    started: Instant,
    last_returns: Vec<f64>,
}

impl SeedWriter<'_> {
    fn epoch(&mut self, epoch: usize, agents: &[Agent]) -> Result<()> {
        let role = self.cfg.agent.role;
        let returns =
            evaluate_agents(role, agents, &self.tasks, self.cfg.eval_episodes, self.seed)?;
        let disagreement = disagreement_norm(&stacked_params(agents))?;
        let episodes = agents.iter().map(|a| a.episodes_completed()).sum();
        let steps = agents.iter().map(|a| a.steps_taken()).sum();
        let topology = match role {
            Role::Diffusion => format!("{:?}", self.cfg.topology.kind).to_lowercase(),
            _ => "none".into(),
        };
        for (k, &r) in returns.iter().enumerate() {
            let rec = MetricsRecord {
                seed: self.seed,
                epoch,
                agent: k,
                task: k,
                algorithm: format!("{:?}", self.cfg.agent.algorithm).to_lowercase(),
                role: format!("{role:?}").to_lowercase(),
                topology: topology.clone(),
                drop_probability: self.cfg.drop_probability,
                mean_return: r,
                disagreement,
                episodes,
                steps,
            };
            self.metrics.append(&rec)?;
            self.records.push(rec);
        }
        self.metrics.flush()?;
        self.timing.append(&TimingRecord {
            seed: self.seed,
            epoch,
            wall_clock_s: self.started.elapsed().as_secs_f64(),
        })?;
        self.timing.flush()?;
        self.last_returns = returns;
        Ok(())
    }
}

fn write_checkpoints(dir: &Path, agents: &[Agent]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for a in agents {
        std::fs::write(
            dir.join(format!("agent{}_actor.ddpv", a.id)),
            encode_params(&a.learner.actor_params),
        )?;
        std::fs::write(
            dir.join(format!("agent{}_critic.ddpv", a.id)),
            encode_params(&a.learner.critic_params),
        )?;
    }
    Ok(())
}

/// Trains and evaluates one seed, writing its files under `out`. Returns the
/// outcome, the metrics written, and the final system when training finished.
pub fn run_seed(
    cfg: &ExperimentConfig,
    seed: u64,
    out: &Path,
) -> Result<(SeedOutcome, Vec<MetricsRecord>, Option<System>)> {
    let tasks = cfg.tasks()?;
    let topology = cfg.topology(seed, tasks.len())?;
    if let Some(t) = &topology {
        std::fs::write(out.join(format!("topology_seed{seed}.txt")), t.to_text())?;
        std::fs::write(
            out.join(format!("weights_seed{seed}.txt")),
            crate::network::hastings_weights(t).to_text(),
        )?;
    }
    let system = System::new(
        tasks.clone(),
        cfg.agent_config(),
        &cfg.network,
        topology,
        cfg.failures()?,
        seed,
    )?;
    let rounds = cfg.rounds_per_epoch()?;

    let mut metrics = CsvSink::create(&metrics_path(out, seed))?;
    metrics.write_header(&METRICS_COLUMNS)?;
    let mut timing = CsvSink::create(&out.join(format!("timing_seed{seed}.csv")))?;
    timing.write_header(&["seed", "epoch", "wall_clock_s"])?;
    let mut log = if cfg.output.event_log {
        EventLog::new(Box::new(std::io::BufWriter::new(std::fs::File::create(
            out.join(format!("events_seed{seed}.jsonl")),
        )?)))
    } else {
        EventLog::disabled()
    };
    let mut w = SeedWriter {
        cfg,
        seed,
        tasks,
        metrics,
        timing,
        records: Vec::new(),
        started: Instant::now(),
        last_returns: Vec::new(),
    };

    let mut epochs_completed = 0;
    let result: Result<System> = (|| {
        w.epoch(0, &system.agents)?;
        match cfg.mode {
            ExecutionMode::Sync => {
                let mut system = system;
                for epoch in 1..=cfg.epochs {
                    system.run_rounds(rounds, &mut log)?;
                    w.epoch(epoch, &system.agents)?;
                    epochs_completed = epoch;
                }
                Ok(system)
            }
            ExecutionMode::Parallel => {
                run_parallel(system, cfg.epochs, rounds, |epoch, agents, events| {
                    for e in events {
                        log.record(e)?;
                    }
                    w.epoch(epoch, agents)?;
                    epochs_completed = epoch;
                    Ok(())
                })
            }
        }
    })();
    log.flush()?;

    let records = std::mem::take(&mut w.records);
    let final_mean_return = (!w.last_returns.is_empty()).then(|| mean(&w.last_returns));
    match result {
        Ok(system) => {
            if cfg.output.checkpoints {
                write_checkpoints(&checkpoint_dir(out, seed), &system.agents)?;
            }
            let deviation = match cfg.agent.role {
                Role::Centralised => None,
                _ if system.agents.len() < 2 => None,
                _ => Some(parameter_deviation(&stacked_params(&system.agents))?),
            };
            let outcome = SeedOutcome {
                seed,
                completed: true,
                error: None,
                epochs_completed,
                final_mean_return,
                deviation,
                episodes: system.total_episodes(),
                steps: system.total_steps(),
            };
            Ok((outcome, records, Some(system)))
        }
        Err(e @ Error::Numerical { .. }) => {
            let outcome = SeedOutcome {
                seed,
                completed: false,
                error: Some(e.to_string()),
                epochs_completed,
                final_mean_return,
                deviation: None,
                episodes: 0,
                steps: 0,
            };
            Ok((outcome, records, None))
        }
        Err(e) => Err(e),
    }
}

/// Runs every seed of `cfg` into `cfg.output_dir`: per-seed metrics and
/// timing CSVs, an aggregate over seeds, a summary, and checkpoints.
/// A numerical failure stops only the affected seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let out = cfg.output_dir.clone();
    std::fs::create_dir_all(&out)?;
    let probe = out.join(".write-test");
    std::fs::write(&probe, b"")?;
    std::fs::remove_file(&probe)?;
    std::fs::write(out.join("config.toml"), cfg.to_toml()?)?;

    let mut seeds = Vec::new();
    let mut all = Vec::new();
    for &seed in &cfg.seeds {
        let (outcome, records, _) = run_seed(cfg, seed, &out)?;
        all.extend(records);
        seeds.push(outcome);
    }
    write_jsonl(&out.join("aggregate.jsonl"), &aggregate(&all))?;
    let summary = RunSummary {
        name: cfg.name.clone(),
        output_dir: out.clone(),
        seeds,
    };
    std::fs::write(
        out.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(summary)
}

/// Rebuilds the learners saved by [`run_seed`] for `seed`, one per agent.
pub fn load_checkpoints(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<Vec<Learner>> {
    let dir = checkpoint_dir(out, seed);
    let n = match cfg.agent.role {
        Role::Centralised => 1,
        _ => cfg.tasks()?.len(),
    };
    let agent_cfg = cfg.agent_config();
    (0..n)
        .map(|k| {
            let (actor, critic) = networks_for(cfg.env.kind, &cfg.network)?;
            let mut l = Learner::new(actor, critic, &agent_cfg, 0);
            let read = |name: String| std::fs::read(dir.join(name));
            l.actor_params = decode_params(
                &read(format!("agent{k}_actor.ddpv"))?,
                l.actor.layout().clone(),
            )?;
            l.critic_params = decode_params(
                &read(format!("agent{k}_critic.ddpv"))?,
                l.critic.layout().clone(),
            )?;
            Ok(l)
        })
        .collect()
}
