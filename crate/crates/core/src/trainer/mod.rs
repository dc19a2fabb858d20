//! Training orchestration: configuration, the co-training loop in its
//! three baseline modes, evaluation rollouts, and agent checkpoints.

mod checkpoint;
mod config;
mod eval;
mod run;
mod scripted;

pub use checkpoint::{AgentCheckpoint, SafetyFooter, BASELINE_NETS, SAFE_NETS};
pub use config::{BaselineMode, BudgetHorizon, TrainConfig};
pub use eval::{episode_seed, evaluate, ActorPolicy, EvalReport, Policy, RandomPolicy};
pub use run::{
    metrics_text, train, BaselinePolicy, Counters, MetricsRow, TrainOutcome, Trainer,
    METRICS_HEADER,
};
pub use scripted::{ScriptedController, SCRIPTED_NAMES};
