use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::checkpoint::AgentCheckpoint;
use super::config::{BaselineMode, TrainConfig};
use super::eval::{evaluate, ActorPolicy, EvalReport, Policy};
use super::ScriptedController;
use crate::agents::{derive_seed, perturb, BaselineAgent, SafeAgent};
use crate::env::Environment;
use crate::error::Result;
use crate::nn::checkpoint::write_atomic;
use crate::nn::Mlp;
use crate::replay::{ReplayBuffer, Transition};

/// The policy whose behaviour the safe agent clones.
#[derive(Debug, Clone)]
pub enum BaselinePolicy {
    Learnable(BaselineAgent),
    Fixed(Mlp),
    Scripted(ScriptedController),
}

impl BaselinePolicy {
    /// Noise-free normalised action.
    pub fn act(&self, obs: &[f64]) -> Result<Vec<f64>> {
        match self {
            BaselinePolicy::Learnable(b) => b.actor.predict_one(obs),
            BaselinePolicy::Fixed(net) => net.predict_one(obs),
            BaselinePolicy::Scripted(c) => c.action_normalized(obs),
        }
    }

    pub fn act_batch(&self, states: &Array2<f64>) -> Result<Array2<f64>> {
        match self {
            BaselinePolicy::Learnable(b) => b.act_batch(states),
            BaselinePolicy::Fixed(net) => net.predict(states),
            BaselinePolicy::Scripted(c) => {
                let rows = states
                    .axis_iter(Axis(0))
                    .map(|s| c.action_normalized(&s.to_vec()))
                    .collect::<Result<Vec<_>>>()?;
                let width = rows.first().map_or(0, |r| r.len());
                Ok(Array2::from_shape_vec((rows.len(), width), rows.concat()).unwrap())
            }
        }
    }

    /// The actor network, when the baseline has one.
    pub fn actor(&self) -> Option<&Mlp> {
        match self {
            BaselinePolicy::Learnable(b) => Some(&b.actor),
            BaselinePolicy::Fixed(net) => Some(net),
            BaselinePolicy::Scripted(_) => None,
        }
    }

    fn as_policy(&self) -> Box<dyn Policy + '_> {
        match self {
            BaselinePolicy::Scripted(c) => Box::new(c.clone()),
            _ => Box::new(ActorPolicy(self.actor().unwrap())),
        }
    }
}

/// Bookkeeping used to check the loop's structural invariants.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Counters {
    pub env_steps: u64,
    pub buffer_pushes: u64,
    pub episodes_started: u64,
    /// Steps where the coin flip chose between the two actors.
    pub coin_flips: u64,
    pub baseline_selections: u64,
    pub baseline_updates: u64,
    pub safe_updates: u64,
}

/// One line of the metrics file.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub step: u64,
    pub mode: &'static str,
    pub baseline: EvalReport,
    pub safe: EvalReport,
    pub lambda: f64,
    /// Means over the updates since the previous row; `None` when there
    /// were none.
    pub q_bar: Option<f64>,
    pub bc_loss: Option<f64>,
    pub critic_loss_r: Option<f64>,
    pub critic_loss_i: Option<f64>,
}

pub const METRICS_HEADER: &str = "step,mode,episode_return_B,episode_return_S,episode_cost_B,episode_cost_S,violation_rate_S,lambda,q_bar,bc_loss,critic_loss_R,critic_loss_I,success_rate";

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.step,
            self.mode,
            self.baseline.mean_return,
            self.safe.mean_return,
            self.baseline.mean_cost,
            self.safe.mean_cost,
            self.safe.violation_rate,
            self.lambda,
            opt(self.q_bar),
            opt(self.bc_loss),
            opt(self.critic_loss_r),
            opt(self.critic_loss_i),
            opt(self.safe.success_rate),
        )
    }
}

/// Config lines (minus output paths), header, then one line per row.
pub fn metrics_text(config: &TrainConfig, rows: &[MetricsRow]) -> String {
    let mut out = String::new();
    for (k, v) in config.to_pairs() {
        if k == "metrics_path" || k == "checkpoint_path" {
            continue;
        }
        out.push_str(&format!("# {k}={v}\n"));
    }
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

#[derive(Debug, Default)]
struct Running {
    q_bar: f64,
    bc: f64,
    critic_i: f64,
    n_safe: u64,
    critic_r: f64,
    n_baseline: u64,
}

impl Running {
    fn mean(sum: f64, n: u64) -> Option<f64> {
        (n > 0).then(|| sum / n as f64)
    }
}

/// Training loop state.
pub struct Trainer {
    config: TrainConfig,
    env: Box<dyn Environment + Send>,
    eval_env: Box<dyn Environment + Send>,
    baseline: BaselinePolicy,
    safe: SafeAgent,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    counters: Counters,
    running: Running,
    needs_reset: bool,
    lambda_min: f64,
    eval_seed: u64,
}

impl Trainer {
    /// Validate the config and build agents; loads the baseline checkpoint
    /// in checkpoint mode. No environment step is taken.
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let env_cfg = config.env_config()?;
        let env = env_cfg.build()?;
        let eval_env = env_cfg.build()?;
        let (obs_dim, act_dim) = (env.observation_dim(), env.action_dim());
        let agent_cfg = config.agent_config();
        let baseline = match &config.baseline_mode {
            BaselineMode::Learnable => BaselinePolicy::Learnable(BaselineAgent::new(
                obs_dim,
                act_dim,
                &agent_cfg,
                config.gamma,
                config.seed,
            )?),
            BaselineMode::Checkpoint(path) => {
                let ck = AgentCheckpoint::load(path)?;
                BaselinePolicy::Fixed(ck.actor("actor_B", obs_dim, act_dim, &config.actor_hidden)?)
            }
            BaselineMode::Scripted(name) => {
                BaselinePolicy::Scripted(ScriptedController::new(name, &env_cfg)?)
            }
        };
        let safe = SafeAgent::new(
            obs_dim,
            act_dim,
            &agent_cfg,
            config.budget()?,
            config.eta_lambda,
            config.seed,
        )?;
        Ok(Trainer {
            buffer: ReplayBuffer::new(config.buffer_capacity)?,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 100)),
            eval_seed: derive_seed(config.seed, 200),
            config,
            env,
            eval_env,
            baseline,
            safe,
            counters: Counters::default(),
            running: Running::default(),
            needs_reset: true,
            lambda_min: 0.0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn baseline(&self) -> &BaselinePolicy {
        &self.baseline
    }

    pub fn safe(&self) -> &SafeAgent {
        &self.safe
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    /// Smallest multiplier value seen after any update.
    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn steps_taken(&self) -> u64 {
        self.counters.env_steps
    }

    /// One environment interaction followed by one round of updates.
    pub fn step(&mut self) -> Result<()> {
        let step = self.counters.env_steps;
        self.interact(step).and_then(|_| self.update()).map_err(|e| e.at_step(step))
    }

    fn interact(&mut self, step: u64) -> Result<()> {
        if self.needs_reset {
            let seed = derive_seed(self.config.seed, 1_000_000 + self.counters.episodes_started);
            self.env.reset(seed);
            self.counters.episodes_started += 1;
            self.needs_reset = false;
        }
        let obs = self.env.observation();
        let d = self.env.action_dim();
        let action = if step < self.config.warmup_steps {
            (0..d).map(|_| self.rng.random_range(-1.0..=1.0)).collect()
        } else {
            self.counters.coin_flips += 1;
            let upsilon: f64 = self.rng.random();
            let mean = if upsilon < 0.5 {
                self.counters.baseline_selections += 1;
                self.baseline.act(&obs)?
            } else {
                self.safe.actor.predict_one(&obs)?
            };
            perturb(&mean, self.config.sigma, &vec![-1.0; d], &vec![1.0; d], &mut self.rng)?
        };
        let r = self.env.step_normalized(&action)?;
        self.buffer.push(Transition {
            state: obs,
            action,
            reward: r.reward,
            indicator: r.indicator,
            next_state: r.next_state,
            terminal: r.terminal,
        })?;
        self.counters.buffer_pushes += 1;
        self.counters.env_steps += 1;
        self.needs_reset = r.terminal;
        Ok(())
    }

    fn update(&mut self) -> Result<()> {
        if self.counters.env_steps <= self.config.warmup_steps {
            return Ok(());
        }
        let batch = self.buffer.sample_batch(self.config.batch_size, &mut self.rng)?;
        if let BaselinePolicy::Learnable(agent) = &mut self.baseline {
            let stats = agent.update(&batch)?;
            self.counters.baseline_updates += 1;
            self.running.critic_r += 0.5 * (stats.critic_losses.0 + stats.critic_losses.1);
            self.running.n_baseline += 1;
        }
        let baseline_actions = self.baseline.act_batch(&batch.states)?;
        let stats = self.safe.update(&batch, &baseline_actions)?;
        self.counters.safe_updates += 1;
        self.lambda_min = self.lambda_min.min(stats.lambda);
        let r = &mut self.running;
        r.q_bar += stats.q_bar;
        r.bc += stats.bc_distance;
        r.critic_i += 0.5 * (stats.critic_losses.0 + stats.critic_losses.1);
        r.n_safe += 1;
        Ok(())
    }

    /// Noise-free evaluation of the safe actor.
    pub fn evaluate_safe(&mut self, episodes: usize, seed: u64) -> Result<EvalReport> {
        evaluate(&mut ActorPolicy(&self.safe.actor), self.eval_env.as_mut(), episodes, seed)
    }

    /// Noise-free evaluation of the baseline policy.
    pub fn evaluate_baseline(&mut self, episodes: usize, seed: u64) -> Result<EvalReport> {
        let mut p = self.baseline.as_policy();
        evaluate(p.as_mut(), self.eval_env.as_mut(), episodes, seed)
    }

    /// Evaluate both policies and drain the running update statistics.
    pub fn metrics_row(&mut self) -> Result<MetricsRow> {
        let n = self.config.eval_episodes;
        let seed = self.eval_seed;
        let baseline = self.evaluate_baseline(n, seed)?;
        let safe = self.evaluate_safe(n, seed)?;
        let r = std::mem::take(&mut self.running);
        Ok(MetricsRow {
            step: self.counters.env_steps,
            mode: self.config.baseline_mode.label(),
            baseline,
            safe,
            lambda: self.safe.lambda,
            q_bar: Running::mean(r.q_bar, r.n_safe),
            bc_loss: Running::mean(r.bc, r.n_safe),
            critic_loss_r: Running::mean(r.critic_r, r.n_baseline),
            critic_loss_i: Running::mean(r.critic_i, r.n_safe),
        })
    }

    /// Run to `total_steps`, emitting a metrics row at step 0 and every
    /// `eval_every` steps.
    pub fn run(&mut self, mut on_row: impl FnMut(&MetricsRow)) -> Result<Vec<MetricsRow>> {
        let mut rows = Vec::new();
        if self.counters.env_steps == 0 {
            let row = self.metrics_row()?;
            on_row(&row);
            rows.push(row);
        }
        while self.counters.env_steps < self.config.total_steps {
            self.step()?;
            if self.counters.env_steps.is_multiple_of(self.config.eval_every) {
                let row = self.metrics_row()?;
                on_row(&row);
                rows.push(row);
            }
        }
        Ok(rows)
    }

    /// Current agents in checkpoint form.
    pub fn checkpoint(&self) -> AgentCheckpoint {
        let mut ck = AgentCheckpoint::new();
        match &self.baseline {
            BaselinePolicy::Learnable(b) => ck.add_baseline(b),
            BaselinePolicy::Fixed(net) => ck.push("actor_B", net),
            BaselinePolicy::Scripted(_) => {}
        }
        ck.add_safe(&self.safe);
        ck
    }
}

/// Result of [`train`]: the final trainer state plus every metrics row.
pub struct TrainOutcome {
    pub trainer: Trainer,
    pub rows: Vec<MetricsRow>,
}

/// Run a full training job and write the metrics file and final
/// checkpoint. Nothing is written if the run fails.
pub fn train(config: TrainConfig, on_row: impl FnMut(&MetricsRow)) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(config)?;
    let rows = trainer.run(on_row)?;
    let cfg = trainer.config();
    if let Some(path) = &cfg.checkpoint_path {
        trainer.checkpoint().save(path)?;
    }
    if let Some(path) = &cfg.metrics_path {
        write_atomic(path, metrics_text(cfg, &rows).as_bytes())?;
    }
    Ok(TrainOutcome { trainer, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::BaselineMode;

    fn tiny(env: &str) -> TrainConfig {
        let mut cfg = TrainConfig::default();
        for (k, v) in [
            ("env", env),
            ("total_steps", "300"),
            ("warmup_steps", "50"),
            ("batch_size", "8"),
            ("buffer_capacity", "1000"),
            ("actor_hidden", "8"),
            ("critic_hidden", "8"),
            ("eval_every", "100"),
            ("eval_episodes", "1"),
            ("env.corridor.horizon", "60"),
            ("metrics_path", "none"),
            ("checkpoint_path", "none"),
        ] {
            cfg.set(k, v).unwrap();
        }
        cfg
    }

    #[test]
    fn zero_steps_writes_initial_checkpoint_only() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny("corridor");
        cfg.total_steps = 0;
        cfg.checkpoint_path = Some(dir.path().join("a.ckpt"));
        let out = train(cfg, |_| {}).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert_eq!(out.rows[0].step, 0);
        assert_eq!(out.trainer.counters(), &Counters::default());
        let ck = AgentCheckpoint::load(&dir.path().join("a.ckpt")).unwrap();
        assert_eq!(ck.get("actor_S"), Some(&out.trainer.safe().actor));
        assert_eq!(ck.footer.unwrap().lambda, 0.0);
    }

    #[test]
    fn counters_follow_loop_structure() {
        let out = train(tiny("corridor"), |_| {}).unwrap();
        let c = out.trainer.counters();
        assert_eq!(c.env_steps, 300);
        assert_eq!(c.buffer_pushes, 300);
        assert_eq!(out.trainer.buffer().total_pushes(), 300);
        assert_eq!(c.coin_flips, 250);
        assert_eq!(c.baseline_updates, 250);
        assert_eq!(c.safe_updates, 250);
        assert_eq!(c.episodes_started, 5);
        let steps: Vec<u64> = out.rows.iter().map(|r| r.step).collect();
        assert_eq!(steps, vec![0, 100, 200, 300]);
        assert!(out.rows.iter().all(|r| r.lambda >= 0.0));
        assert_eq!(out.rows[0].lambda, 0.0);
        assert!(out.trainer.lambda_min() >= 0.0);
    }

    #[test]
    fn same_seed_same_metrics() {
        let dir = tempfile::tempdir().unwrap();
        let run = |name: &str| {
            let mut cfg = tiny("pusher");
            cfg.metrics_path = Some(dir.path().join(name));
            train(cfg, |_| {}).unwrap();
            std::fs::read(dir.path().join(name)).unwrap()
        };
        let a = run("a.csv");
        assert!(a == run("b.csv"), "metrics differ between identical runs");
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("# env=pusher\n"));
        assert!(text.contains(&format!("\n{METRICS_HEADER}\n")));
    }

    #[test]
    fn fixed_baseline_is_untouched() {
        let dir = tempfile::tempdir().unwrap();
        let ckpt = dir.path().join("b.ckpt");
        let mut cfg = tiny("corridor");
        cfg.total_steps = 100;
        cfg.checkpoint_path = Some(ckpt.clone());
        train(cfg, |_| {}).unwrap();
        let before = AgentCheckpoint::load(&ckpt).unwrap().get("actor_B").unwrap().clone();

        let mut cfg = tiny("corridor");
        cfg.baseline_mode = BaselineMode::Checkpoint(ckpt);
        let out = train(cfg, |_| {}).unwrap();
        assert_eq!(out.trainer.counters().baseline_updates, 0);
        assert_eq!(out.trainer.counters().safe_updates, 250);
        assert_eq!(out.trainer.baseline().actor(), Some(&before));
        assert!(out.rows.iter().all(|r| r.critic_loss_r.is_none()));
    }

    #[test]
    fn scripted_baseline_skips_baseline_updates() {
        let mut cfg = tiny("pusher");
        cfg.baseline_mode = BaselineMode::Scripted("straight-line-push".into());
        let out = train(cfg, |_| {}).unwrap();
        assert_eq!(out.trainer.counters().baseline_updates, 0);
        assert!(out.rows.iter().all(|r| r.safe.success_rate.is_some()));
    }

    #[test]
    fn missing_checkpoint_fails_before_training() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny("corridor");
        cfg.baseline_mode = BaselineMode::Checkpoint(dir.path().join("missing.ckpt"));
        cfg.metrics_path = Some(dir.path().join("m.csv"));
        assert!(Trainer::new(cfg.clone()).is_err());
        assert!(train(cfg, |_| {}).is_err());
        assert!(!dir.path().join("m.csv").exists());
    }

    #[test]
    fn checkpoint_shape_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let ckpt = dir.path().join("b.ckpt");
        let mut cfg = tiny("corridor");
        cfg.total_steps = 0;
        cfg.checkpoint_path = Some(ckpt.clone());
        train(cfg, |_| {}).unwrap();
        let mut cfg = tiny("corridor");
        cfg.actor_hidden = vec![16, 16];
        cfg.baseline_mode = BaselineMode::Checkpoint(ckpt);
        assert!(matches!(Trainer::new(cfg), Err(crate::Error::ShapeMismatch(_))));
    }
}
