//! Experiment configuration, orchestration and metrics.

mod config;
mod eval;
mod metrics;
mod run;

pub use config::{
    AgentSection, EnvSection, ExecutionMode, ExperimentConfig, OutputSection, TopologySection,
    SCHEMA_VERSION,
};
pub use eval::{cross_task_eval, task_eval_seed, zero_shot_eval, CrossTaskResult, ZeroShotRecord};
pub use metrics::{
    aggregate, confidence_interval, parameter_deviation, quantile, read_metrics, write_jsonl,
    AggregateRecord, CsvSink, Deviation, Interval, MetricsRecord, TimingRecord,
    DEVIATION_THRESHOLD, METRICS_COLUMNS,
};
pub use run::{
    checkpoint_dir, evaluate_agents, learner_for_task, load_checkpoints, metrics_path,
    run_experiment, run_seed, stacked_params, RunSummary, SeedOutcome,
};
