//! Run configuration as flat `key=value` text.
//!
//! Every key has a default; unknown keys are rejected. [`TrainConfig::to_pairs`]
//! lists every key in a fixed order, and parsing that listing reproduces the
//! config exactly.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::agents::{AgentConfig, Horizon, SafetyBudget};
use crate::env::{CorridorConfig, EnvConfig, PusherConfig};
use crate::error::{Error, Result};

/// Where the baseline policy comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum BaselineMode {
    /// Trained alongside the safe agent.
    Learnable,
    /// Frozen actor loaded from a checkpoint file.
    Checkpoint(PathBuf),
    /// Hand-written controller by name.
    Scripted(String),
}

impl BaselineMode {
    /// Short label written to the `mode` metrics column.
    pub fn label(&self) -> &'static str {
        match self {
            BaselineMode::Learnable => "learnable",
            BaselineMode::Checkpoint(_) => "checkpoint",
            BaselineMode::Scripted(_) => "scripted",
        }
    }
}

impl fmt::Display for BaselineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaselineMode::Learnable => f.write_str("learnable"),
            BaselineMode::Checkpoint(p) => write!(f, "checkpoint:{}", p.display()),
            BaselineMode::Scripted(name) => write!(f, "scripted:{name}"),
        }
    }
}

impl FromStr for BaselineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "learnable" {
            return Ok(BaselineMode::Learnable);
        }
        match s.split_once(':') {
            Some(("checkpoint", p)) if !p.is_empty() => Ok(BaselineMode::Checkpoint(p.into())),
            Some(("scripted", n)) if !n.is_empty() => Ok(BaselineMode::Scripted(n.into())),
            _ => Err(Error::Config(format!(
                "baseline_mode must be learnable, checkpoint:<path> or scripted:<name>, got `{s}`"
            ))),
        }
    }
}

/// Horizon used in the safety threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetHorizon {
    /// The environment's episode length.
    Env,
    Fixed(Horizon),
}

impl fmt::Display for BudgetHorizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BudgetHorizon::Env => f.write_str("env"),
            BudgetHorizon::Fixed(h) => write!(f, "{h}"),
        }
    }
}

impl FromStr for BudgetHorizon {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "env" {
            Ok(BudgetHorizon::Env)
        } else {
            s.parse()
                .map(BudgetHorizon::Fixed)
                .map_err(|_| Error::Config(format!("budget_horizon must be env, inf or a positive integer, got `{s}`")))
        }
    }
}

/// Everything a training run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// `corridor` or `pusher`.
    pub env: String,
    pub corridor: CorridorConfig,
    pub pusher: PusherConfig,
    pub baseline_mode: BaselineMode,
    pub total_steps: u64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Uniform-random steps before the first update.
    pub warmup_steps: u64,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub eta_lambda: f64,
    pub tau: f64,
    /// Exploration noise standard deviation in normalised action units.
    pub sigma: f64,
    pub gamma: f64,
    pub gamma_bar: f64,
    pub delta: f64,
    pub budget_horizon: BudgetHorizon,
    pub seed: u64,
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub metrics_path: Option<PathBuf>,
    pub checkpoint_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            env: "corridor".into(),
            corridor: CorridorConfig::default(),
            pusher: PusherConfig::default(),
            baseline_mode: BaselineMode::Learnable,
            total_steps: 100_000,
            batch_size: 256,
            buffer_capacity: 1_000_000,
            warmup_steps: 1000,
            actor_hidden: vec![400, 300],
            critic_hidden: vec![400, 300],
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            eta_lambda: 1e-3,
            tau: 0.005,
            sigma: 0.1,
            gamma: 0.99,
            gamma_bar: 0.6,
            delta: 0.05,
            budget_horizon: BudgetHorizon::Env,
            seed: 0,
            eval_every: 5000,
            eval_episodes: 10,
            metrics_path: Some("metrics.csv".into()),
            checkpoint_path: Some("agents.ckpt".into()),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

fn parse_sizes(key: &str, value: &str) -> Result<Vec<usize>> {
    let sizes: Vec<usize> = value
        .split(',')
        .map(|s| parse(key, s.trim()))
        .collect::<Result<_>>()?;
    if sizes.contains(&0) {
        return Err(Error::Config(format!("`{key}` sizes must be positive")));
    }
    Ok(sizes)
}

fn parse_path(value: &str) -> Option<PathBuf> {
    (value != "none" && !value.is_empty()).then(|| value.into())
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or("none".into(), |p| p.display().to_string())
}

fn join(sizes: &[usize]) -> String {
    sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
}

impl TrainConfig {
    /// Apply one `key=value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let c = &mut self.corridor;
        let p = &mut self.pusher;
        match key.trim() {
            "env" => {
                EnvConfig::by_name(v)?;
                self.env = v.into();
            }
            "env.corridor.dt" => c.dt = parse(key, v)?,
            "env.corridor.y_bound" => c.y_bound = parse(key, v)?,
            "env.corridor.speed_limit" => c.speed_limit = parse(key, v)?,
            "env.corridor.accel_limit" => c.accel_limit = parse(key, v)?,
            "env.corridor.drag" => c.drag = parse(key, v)?,
            "env.corridor.horizon" => c.horizon = parse(key, v)?,
            "env.corridor.init_y_spread" => c.init_y_spread = parse(key, v)?,
            "env.corridor.x_obs_scale" => c.x_obs_scale = parse(key, v)?,
            "env.pusher.horizon" => p.horizon = parse(key, v)?,
            "env.pusher.step_limit" => p.step_limit = parse(key, v)?,
            "env.pusher.agent_radius" => p.agent_radius = parse(key, v)?,
            "env.pusher.object_radius" => p.object_radius = parse(key, v)?,
            "env.pusher.obstacle_radius" => p.obstacle_radius = parse(key, v)?,
            "env.pusher.goal_tolerance" => p.goal_tolerance = parse(key, v)?,
            "env.pusher.min_goal_distance" => p.min_goal_distance = parse(key, v)?,
            "env.pusher.max_goal_distance" => p.max_goal_distance = parse(key, v)?,
            "env.pusher.obstacle_fraction" => {
                p.obstacle_fraction = if v == "none" {
                    None
                } else {
                    let (lo, hi) = v.split_once(',').ok_or_else(|| {
                        Error::Config(format!("`{key}` expects `lo,hi` or `none`"))
                    })?;
                    Some((parse(key, lo.trim())?, parse(key, hi.trim())?))
                }
            }
            "env.pusher.agent_standoff" => p.agent_standoff = parse(key, v)?,
            "baseline_mode" => self.baseline_mode = v.parse()?,
            "total_steps" => self.total_steps = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "buffer_capacity" => self.buffer_capacity = parse(key, v)?,
            "warmup_steps" => self.warmup_steps = parse(key, v)?,
            "actor_hidden" => self.actor_hidden = parse_sizes(key, v)?,
            "critic_hidden" => self.critic_hidden = parse_sizes(key, v)?,
            "actor_lr" => self.actor_lr = parse(key, v)?,
            "critic_lr" => self.critic_lr = parse(key, v)?,
            "eta_lambda" => self.eta_lambda = parse(key, v)?,
            "tau" => self.tau = parse(key, v)?,
            "sigma" => self.sigma = parse(key, v)?,
            "gamma" => self.gamma = parse(key, v)?,
            "gamma_bar" => self.gamma_bar = parse(key, v)?,
            "delta" => self.delta = parse(key, v)?,
            "budget_horizon" => self.budget_horizon = v.parse()?,
            "seed" => self.seed = parse(key, v)?,
            "eval_every" => self.eval_every = parse(key, v)?,
            "eval_episodes" => self.eval_episodes = parse(key, v)?,
            "metrics_path" => self.metrics_path = parse_path(v),
            "checkpoint_path" => self.checkpoint_path = parse_path(v),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Every key with its current value, in a fixed order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let c = &self.corridor;
        let p = &self.pusher;
        vec![
            ("env", self.env.clone()),
            ("env.corridor.dt", c.dt.to_string()),
            ("env.corridor.y_bound", c.y_bound.to_string()),
            ("env.corridor.speed_limit", c.speed_limit.to_string()),
            ("env.corridor.accel_limit", c.accel_limit.to_string()),
            ("env.corridor.drag", c.drag.to_string()),
            ("env.corridor.horizon", c.horizon.to_string()),
            ("env.corridor.init_y_spread", c.init_y_spread.to_string()),
            ("env.corridor.x_obs_scale", c.x_obs_scale.to_string()),
            ("env.pusher.horizon", p.horizon.to_string()),
            ("env.pusher.step_limit", p.step_limit.to_string()),
            ("env.pusher.agent_radius", p.agent_radius.to_string()),
            ("env.pusher.object_radius", p.object_radius.to_string()),
            ("env.pusher.obstacle_radius", p.obstacle_radius.to_string()),
            ("env.pusher.goal_tolerance", p.goal_tolerance.to_string()),
            ("env.pusher.min_goal_distance", p.min_goal_distance.to_string()),
            ("env.pusher.max_goal_distance", p.max_goal_distance.to_string()),
            (
                "env.pusher.obstacle_fraction",
                p.obstacle_fraction
                    .map_or("none".into(), |(lo, hi)| format!("{lo},{hi}")),
            ),
            ("env.pusher.agent_standoff", p.agent_standoff.to_string()),
            ("baseline_mode", self.baseline_mode.to_string()),
            ("total_steps", self.total_steps.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("buffer_capacity", self.buffer_capacity.to_string()),
            ("warmup_steps", self.warmup_steps.to_string()),
            ("actor_hidden", join(&self.actor_hidden)),
            ("critic_hidden", join(&self.critic_hidden)),
            ("actor_lr", self.actor_lr.to_string()),
            ("critic_lr", self.critic_lr.to_string()),
            ("eta_lambda", self.eta_lambda.to_string()),
            ("tau", self.tau.to_string()),
            ("sigma", self.sigma.to_string()),
            ("gamma", self.gamma.to_string()),
            ("gamma_bar", self.gamma_bar.to_string()),
            ("delta", self.delta.to_string()),
            ("budget_horizon", self.budget_horizon.to_string()),
            ("seed", self.seed.to_string()),
            ("eval_every", self.eval_every.to_string()),
            ("eval_episodes", self.eval_episodes.to_string()),
            ("metrics_path", show_path(&self.metrics_path)),
            ("checkpoint_path", show_path(&self.checkpoint_path)),
        ]
    }

    /// Parse config text on top of the defaults. `seed_fallback` is used
    /// when the text has no `seed` key. The result is not validated.
    pub fn parse_text(text: &str, seed_fallback: Option<u64>) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        if let Some(s) = seed_fallback {
            cfg.seed = s;
        }
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got `{line}`", i + 1))
            })?;
            cfg.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, strip(e))))?;
        }
        Ok(cfg)
    }

    pub fn env_config(&self) -> Result<EnvConfig> {
        match self.env.as_str() {
            "corridor" => Ok(EnvConfig::Corridor(self.corridor.clone())),
            "pusher" => Ok(EnvConfig::Pusher(self.pusher.clone())),
            _ => EnvConfig::by_name(&self.env),
        }
    }

    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            actor_hidden: self.actor_hidden.clone(),
            critic_hidden: self.critic_hidden.clone(),
            actor_lr: self.actor_lr,
            critic_lr: self.critic_lr,
            tau: self.tau,
        }
    }

    pub fn budget(&self) -> Result<SafetyBudget> {
        let horizon = match self.budget_horizon {
            BudgetHorizon::Env => Horizon::Finite(self.env_config()?.horizon()),
            BudgetHorizon::Fixed(h) => h,
        };
        SafetyBudget::new(self.delta, self.gamma_bar, horizon)
            .map_err(|e| Error::Config(strip(e)))
    }

    /// Reject any configuration the trainer cannot run.
    pub fn validate(&self) -> Result<()> {
        let env = self.env_config()?;
        match &env {
            EnvConfig::Corridor(c) => c.validate()?,
            EnvConfig::Pusher(p) => p.validate()?,
        }
        let positive = [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("eta_lambda", self.eta_lambda),
            ("tau", self.tau),
            ("gamma", self.gamma),
        ];
        for (k, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("`{k}` must be positive, got {v}")));
            }
        }
        if self.tau > 1.0 {
            return Err(Error::Config("`tau` must not exceed 1".into()));
        }
        if self.gamma > 1.0 {
            return Err(Error::Config("`gamma` must not exceed 1".into()));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::Config(format!("`delta` must lie in [0, 1], got {}", self.delta)));
        }
        if !(0.0..1.0).contains(&self.gamma_bar) {
            return Err(Error::Config(format!(
                "`gamma_bar` must lie in [0, 1), got {}",
                self.gamma_bar
            )));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::Config("`sigma` must be nonnegative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("`batch_size` must be positive".into()));
        }
        if self.buffer_capacity == 0 {
            return Err(Error::Config("`buffer_capacity` must be positive".into()));
        }
        if self.eval_every == 0 || self.eval_episodes == 0 {
            return Err(Error::Config("`eval_every` and `eval_episodes` must be positive".into()));
        }
        if self.actor_hidden.is_empty() || self.critic_hidden.is_empty() {
            return Err(Error::Config("hidden layer lists must not be empty".into()));
        }
        if let BaselineMode::Scripted(name) = &self.baseline_mode {
            super::ScriptedController::new(name, &env)?;
        }
        self.budget()?;
        Ok(())
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Config(m) | Error::InvalidArgument(m) => m,
        other => other.to_string(),
    }
}
