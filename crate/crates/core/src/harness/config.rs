use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::{AgentConfig, Algorithm, NetworkConfig, Role};
use crate::envs::{sample_task_grid, EnvKind, EnvParams, GridSpec};
use crate::error::{Error, Result};
use crate::network::{build_topology, LinkFailureModel, Topology, TopologyKind};
use crate::optim::OptimiserConfig;
use crate::rng::{derive_seed, stream};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionMode {
    #[default]
    Sync,
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSection {
    pub kind: EnvKind,
    /// Task grid; ignored when `tasks` is given.
    #[serde(default)]
    pub grid: Option<GridSpec>,
    /// Explicit task list.
    #[serde(default)]
    pub tasks: Option<Vec<EnvParams>>,
    #[serde(default)]
    pub episode_max_steps: Option<usize>,
    /// Agents per task; each task is listed this many times in a row.
    #[serde(default = "one")]
    pub repeat: usize,
}

fn one() -> usize {
    1
}

/// Agent settings; unset fields take the algorithm and role defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    pub algorithm: Algorithm,
    pub role: Role,
    #[serde(default)]
    pub steps_per_update: Option<usize>,
    #[serde(default)]
    pub episodes_per_update: Option<usize>,
    #[serde(default)]
    pub entropy_coef: Option<f64>,
    #[serde(default)]
    pub discount: Option<f64>,
    #[serde(default)]
    pub staleness_limit: Option<usize>,
    #[serde(default)]
    pub average_moments: Option<bool>,
    #[serde(default)]
    pub shared_init: Option<bool>,
    #[serde(default)]
    pub specialised_copies: Option<usize>,
    #[serde(default)]
    pub actor_optimiser: Option<OptimiserConfig>,
    #[serde(default)]
    pub critic_optimiser: Option<OptimiserConfig>,
    /// A2C environment steps per worker per epoch; defaults to
    /// `episodes_per_update · episode_max_steps`.
    #[serde(default)]
    pub steps_per_epoch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub kind: TopologyKind,
    /// Target neighbourhood size including self, for random graphs.
    #[serde(default = "default_degree")]
    pub avg_degree: f64,
    /// Fixed graph seed; by default each run seed draws its own graph.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_degree() -> f64 {
    4.2
}

impl Default for TopologySection {
    fn default() -> Self {
        Self {
            kind: TopologyKind::Ring,
            avg_degree: default_degree(),
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "yes")]
    pub checkpoints: bool,
    #[serde(default)]
    pub event_log: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            checkpoints: true,
            event_log: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub seeds: Vec<u64>,
    pub epochs: usize,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default)]
    pub mode: ExecutionMode,
    #[serde(default)]
    pub output_dir: PathBuf,
    pub env: EnvSection,
    pub agent: AgentSection,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub topology: TopologySection,
    #[serde(default)]
    pub drop_probability: f64,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_eval_episodes() -> usize {
    10
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn tasks(&self) -> Result<Vec<EnvParams>> {
        let mut tasks = match (&self.env.tasks, &self.env.grid) {
            (Some(t), _) => t.clone(),
            (None, Some(g)) => sample_task_grid(self.env.kind, g)?,
            (None, None) => vec![self.env.kind.default_params()],
        };
        if self.env.repeat == 0 {
            return Err(Error::Config("env.repeat must be at least 1".into()));
        }
        tasks = tasks
            .into_iter()
            .flat_map(|t| std::iter::repeat_n(t, self.env.repeat))
            .collect();
        if let Some(steps) = self.env.episode_max_steps {
            tasks.iter_mut().for_each(|t| t.episode_max_steps = steps);
        }
        for t in &tasks {
            t.validate()?;
            if t.kind() != self.env.kind {
                return Err(Error::Config(format!(
                    "task of kind {} in a {} experiment",
                    t.kind().name(),
                    self.env.kind.name()
                )));
            }
        }
        Ok(tasks)
    }

    pub fn agent_config(&self) -> AgentConfig {
        let a = &self.agent;
        let d = AgentConfig::defaults(a.algorithm, a.role);
        AgentConfig {
            algorithm: a.algorithm,
            role: a.role,
            steps_per_update: a.steps_per_update.unwrap_or(d.steps_per_update),
            episodes_per_update: a.episodes_per_update.unwrap_or(d.episodes_per_update),
            entropy_coef: a.entropy_coef.unwrap_or(d.entropy_coef),
            actor_optimiser: a.actor_optimiser.clone().unwrap_or(d.actor_optimiser),
            critic_optimiser: a.critic_optimiser.clone().unwrap_or(d.critic_optimiser),
            discount: a.discount.unwrap_or(d.discount),
            staleness_limit: a.staleness_limit.unwrap_or(d.staleness_limit),
            average_moments: a.average_moments.unwrap_or(d.average_moments),
            shared_init: a.shared_init.unwrap_or(d.shared_init),
            specialised_copies: a.specialised_copies.unwrap_or(d.specialised_copies),
        }
    }

    /// Synchronous rounds per epoch.
    pub fn rounds_per_epoch(&self) -> Result<usize> {
        let tasks = self.tasks()?;
        let cfg = self.agent_config();
        let steps = self
            .agent
            .steps_per_epoch
            .unwrap_or(cfg.episodes_per_update * tasks[0].episode_max_steps);
        Ok(cfg.rounds_per_epoch(steps))
    }

    /// The agent graph of run `seed`, for the diffusion role with ≥ 2 agents.
    pub fn topology(&self, seed: u64, n: usize) -> Result<Option<Topology>> {
        if self.agent.role != Role::Diffusion || n < 2 {
            return Ok(None);
        }
        let graph_seed = self
            .topology
            .seed
            .unwrap_or_else(|| derive_seed(seed, stream::TOPOLOGY, 0));
        build_topology(self.topology.kind, n, self.topology.avg_degree, graph_seed).map(Some)
    }

    pub fn failures(&self) -> Result<Option<LinkFailureModel>> {
        if self.drop_probability == 0.0 {
            return Ok(None);
        }
        LinkFailureModel::new(self.drop_probability).map(Some)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.eval_episodes == 0 {
            return Err(Error::Config("eval_episodes must be at least 1".into()));
        }
        let tasks = self.tasks()?;
        if tasks.is_empty() {
            return Err(Error::Config("no tasks".into()));
        }
        self.agent_config().validate()?;
        self.failures()?;
        if self.agent.steps_per_epoch == Some(0) {
            return Err(Error::Config("steps_per_epoch must be at least 1".into()));
        }
        if self.mode == ExecutionMode::Parallel && self.agent_config().average_moments {
            return Err(Error::Config(
                "moment averaging is only available in sync mode".into(),
            ));
        }
        if self.agent.role == Role::Diffusion && tasks.len() >= 2 {
            self.topology(self.seeds[0], tasks.len())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
seeds = [0]
epochs = 2

[env]
kind = "pendulum"
grid = { grid = [3, 1] }

[agent]
algorithm = "siac"
role = "diffusion"
"#;

    #[test]
    fn defaults_resolve() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.eval_episodes, 10);
        assert_eq!(c.tasks().unwrap().len(), 3);
        assert_eq!(c.agent_config(), AgentConfig::siac(Role::Diffusion));
        assert_eq!(c.rounds_per_epoch().unwrap(), 1);
        assert_eq!(c.topology(0, 3).unwrap().unwrap().n_agents(), 3);
    }

    #[test]
    fn repeat_replicates_tasks() {
        let c = ExperimentConfig::from_toml(&MINIMAL.replace("[3, 1] }", "[1, 1] }\nrepeat = 5"))
            .unwrap();
        let tasks = c.tasks().unwrap();
        assert_eq!(tasks.len(), 5);
        assert!(tasks
            .iter()
            .all(|t| *t == EnvKind::Pendulum.default_params()));
    }

    #[test]
    fn round_trips_through_toml() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(
            ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap(),
            c
        );
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_toml(
            &MINIMAL.replace("schema_version = 1", "schema_version = 9")
        )
        .is_err());
        assert!(
            ExperimentConfig::from_toml(&MINIMAL.replace("seeds = [0]", "seeds = []")).is_err()
        );
        assert!(ExperimentConfig::from_toml(&format!("{MINIMAL}\nunknown_key = 3\n")).is_err());
        assert!(
            ExperimentConfig::from_toml(&MINIMAL.replace("[3, 1] }", "[3, 1] }\nrepeat = 0"))
                .is_err()
        );
        assert!(ExperimentConfig::from_toml(
            &MINIMAL.replace("epochs = 2", "epochs = 2\ndrop_probability = 1.0")
        )
        .is_err());
    }

    #[test]
    fn a2c_epochs_are_step_budgets() {
        let text = MINIMAL.replace("\"siac\"", "\"a2c\"");
        let c = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(c.rounds_per_epoch().unwrap(), (5 * 200usize).div_ceil(60));
    }
}
