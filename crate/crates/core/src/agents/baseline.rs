use ndarray::Array2;

use super::critic::{dpg_actor_step, TwinCritics};
use super::ops::polyak_update;
use super::{derive_seed, AgentConfig};
use crate::error::{Error, Result};
use crate::nn::{Activation, Adam, Mlp};
use crate::replay::Batch;

/// Reward-maximising twin-critic deterministic policy gradient learner.
#[derive(Debug, Clone)]
pub struct BaselineAgent {
    pub actor: Mlp,
    pub actor_target: Mlp,
    actor_opt: Adam,
    pub critics: TwinCritics,
    pub gamma: f64,
    pub tau: f64,
}

/// Diagnostics from one baseline update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineStats {
    pub critic_losses: (f64, f64),
    pub actor_objective: f64,
}

impl BaselineAgent {
    pub fn new(
        obs_dim: usize,
        act_dim: usize,
        config: &AgentConfig,
        gamma: f64,
        seed: u64,
    ) -> Result<Self> {
        let actor = Mlp::new(
            &config.actor_sizes(obs_dim, act_dim),
            Activation::Tanh,
            derive_seed(seed, 1),
        )?;
        let critics = TwinCritics::new(
            &config.critic_sizes(obs_dim, act_dim),
            obs_dim,
            config.critic_lr,
            [derive_seed(seed, 2), derive_seed(seed, 3)],
        )?;
        Self::from_parts(actor, None, critics, config, gamma)
    }

    pub fn from_parts(
        actor: Mlp,
        actor_target: Option<Mlp>,
        critics: TwinCritics,
        config: &AgentConfig,
        gamma: f64,
    ) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidArgument(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        let actor_target = actor_target.unwrap_or_else(|| actor.clone());
        if !actor_target.same_shape(&actor) {
            return Err(Error::ShapeMismatch("baseline target actor shape".into()));
        }
        Ok(BaselineAgent {
            actor_opt: Adam::new(&actor, config.actor_lr),
            actor,
            actor_target,
            critics,
            gamma,
            tau: config.tau,
        })
    }

    /// Critic regression, one policy-gradient step, then target averaging.
    pub fn update(&mut self, batch: &Batch) -> Result<BaselineStats> {
        let next_actions = self.actor_target.predict(&batch.next_states)?;
        let y = self.critics.bootstrap_targets(
            &batch.rewards,
            self.gamma,
            &batch.next_states,
            &next_actions,
            &batch.terminals,
        )?;
        let critic_losses = self.critics.update(&batch.states, &batch.actions, &y)?;
        let actor_objective = dpg_actor_step(
            &mut self.actor,
            &mut self.actor_opt,
            &self.critics.online[0],
            &batch.states,
        )?;
        polyak_update(&mut self.actor_target, &self.actor, self.tau)?;
        self.critics.soft_update(self.tau)?;
        Ok(BaselineStats {
            critic_losses,
            actor_objective,
        })
    }

    pub fn act_batch(&self, states: &Array2<f64>) -> Result<Array2<f64>> {
        self.actor.predict(states)
    }
}
