//! Environments emitting reward, cost, and the per-step safety indicator.
//!
//! The two continuous tasks are small analogues of a legged-locomotion task
//! (run fast along a corridor without exceeding a speed limit or leaving the
//! lane) and a tabletop push task (push an object to a goal without touching
//! an obstacle placed in the way). [`TabularCmdp`] is the explicit model used
//! by the oracle.

mod corridor;
mod pusher;
mod tabular;

pub use corridor::{CorridorConfig, CorridorEnv};
pub use pusher::{PusherConfig, PusherEnv, PusherLayout};
pub use tabular::{tabular_step, TabularCmdp, TabularTransition};

use crate::error::{Error, Result};

/// Outcome of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub cost: f64,
    /// 1.0 when the step incurred no cost, else 0.0.
    pub indicator: f64,
    pub terminal: bool,
}

/// Safety indicator: 1 for a cost-free step, 0 otherwise.
pub fn indicator(cost: f64) -> Result<f64> {
    if cost.is_nan() || cost < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "cost must be nonnegative, got {cost}"
        )));
    }
    Ok(if cost == 0.0 { 1.0 } else { 0.0 })
}

/// A continuous-control episode task.
///
/// Agents act in normalised coordinates; `step` takes *physical* actions,
/// which are `normalised ⊙ action_scale()`.
pub trait Environment {
    fn observation_dim(&self) -> usize;

    fn action_dim(&self) -> usize;

    fn action_scale(&self) -> Vec<f64>;

    fn horizon(&self) -> usize;

    /// Start a new episode; equal seeds give identical episodes.
    fn reset(&mut self, seed: u64) -> Vec<f64>;

    fn observation(&self) -> Vec<f64>;

    fn step(&mut self, action: &[f64]) -> Result<StepResult>;

    /// Whether the task goal has been reached, for tasks that have one.
    fn goal_reached(&self) -> Option<bool> {
        None
    }

    /// Step with an action in normalised `[-1, 1]` coordinates.
    fn step_normalized(&mut self, action: &[f64]) -> Result<StepResult> {
        let physical: Vec<f64> = action
            .iter()
            .zip(self.action_scale())
            .map(|(a, s)| a * s)
            .collect();
        self.step(&physical)
    }
}

/// Environment selection plus parameters, as read from a config file.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvConfig {
    Corridor(CorridorConfig),
    Pusher(PusherConfig),
}

impl EnvConfig {
    pub fn name(&self) -> &'static str {
        match self {
            EnvConfig::Corridor(_) => "corridor",
            EnvConfig::Pusher(_) => "pusher",
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "corridor" => Ok(EnvConfig::Corridor(CorridorConfig::default())),
            "pusher" => Ok(EnvConfig::Pusher(PusherConfig::default())),
            other => Err(Error::Config(format!(
                "unknown environment `{other}` (expected corridor or pusher)"
            ))),
        }
    }

    pub fn build(&self) -> Result<Box<dyn Environment + Send>> {
        Ok(match self {
            EnvConfig::Corridor(c) => Box::new(CorridorEnv::new(c.clone())?),
            EnvConfig::Pusher(c) => Box::new(PusherEnv::new(c.clone())?),
        })
    }

    pub fn horizon(&self) -> usize {
        match self {
            EnvConfig::Corridor(c) => c.horizon,
            EnvConfig::Pusher(c) => c.horizon,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indicator_semantics() {
        assert_eq!(indicator(0.0).unwrap(), 1.0);
        assert_eq!(indicator(0.7).unwrap(), 0.0);
        assert!(indicator(-1.0).is_err());
        assert!(indicator(f64::NAN).is_err());
    }
}
