use ndarray::Array2;

use super::budget::SafetyBudget;
use super::critic::{safe_actor_step, TwinCritics};
use super::ops::{lambda_update, polyak_update};
use super::{derive_seed, AgentConfig};
use crate::error::{Error, Result};
use crate::nn::{Activation, Adam, Mlp};
use crate::replay::Batch;

/// Risk-aware learner: imitates the baseline while a Lagrange multiplier
/// holds the mean safety-critic value of its actions above Γ.
#[derive(Debug, Clone)]
pub struct SafeAgent {
    pub actor: Mlp,
    pub actor_target: Mlp,
    actor_opt: Adam,
    /// Critics of the discounted safety-indicator value.
    pub critics: TwinCritics,
    pub lambda: f64,
    pub eta_lambda: f64,
    pub budget: SafetyBudget,
    pub tau: f64,
}

/// Diagnostics from one safe-agent update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafeStats {
    pub critic_losses: (f64, f64),
    /// Behaviour-cloning distance before the actor step.
    pub bc_distance: f64,
    /// Constraint estimate before the actor step.
    pub q_bar_pre: f64,
    /// Constraint estimate after the actor step; drives the multiplier.
    pub q_bar: f64,
    pub lambda: f64,
}

impl SafeAgent {
    pub fn new(
        obs_dim: usize,
        act_dim: usize,
        config: &AgentConfig,
        budget: SafetyBudget,
        eta_lambda: f64,
        seed: u64,
    ) -> Result<Self> {
        let actor = Mlp::new(
            &config.actor_sizes(obs_dim, act_dim),
            Activation::Tanh,
            derive_seed(seed, 11),
        )?;
        let critics = TwinCritics::new(
            &config.critic_sizes(obs_dim, act_dim),
            obs_dim,
            config.critic_lr,
            [derive_seed(seed, 12), derive_seed(seed, 13)],
        )?;
        Self::from_parts(actor, None, critics, config, budget, eta_lambda, 0.0)
    }

    pub fn from_parts(
        actor: Mlp,
        actor_target: Option<Mlp>,
        critics: TwinCritics,
        config: &AgentConfig,
        budget: SafetyBudget,
        eta_lambda: f64,
        lambda: f64,
    ) -> Result<Self> {
        if !(eta_lambda > 0.0 && eta_lambda.is_finite()) {
            return Err(Error::InvalidArgument("eta_lambda must be positive".into()));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument("lambda must be nonnegative".into()));
        }
        let actor_target = actor_target.unwrap_or_else(|| actor.clone());
        if !actor_target.same_shape(&actor) {
            return Err(Error::ShapeMismatch("safe target actor shape".into()));
        }
        Ok(SafeAgent {
            actor_opt: Adam::new(&actor, config.actor_lr),
            actor,
            actor_target,
            critics,
            lambda,
            eta_lambda,
            budget,
            tau: config.tau,
        })
    }

    /// `Q̄`: mean over `states` of `min(Q₁, Q₂)` at the safe actor's actions.
    pub fn constraint_estimate(&self, states: &Array2<f64>) -> Result<f64> {
        let actions = self.actor.predict(states)?;
        Ok(self.critics.min_q(states, &actions)?.mean().unwrap())
    }

    /// One primal step on the actor; returns pre-step `(D̄, Q̄)`.
    ///
    /// The gradient uses critic 1; the reported `Q̄` uses the twin minimum.
    pub fn actor_update(
        &mut self,
        baseline_actions: &Array2<f64>,
        states: &Array2<f64>,
    ) -> Result<(f64, f64)> {
        let q_bar_pre = self.constraint_estimate(states)?;
        let (d_bar, _) = safe_actor_step(
            &mut self.actor,
            &mut self.actor_opt,
            &self.critics.online[0],
            baseline_actions,
            self.lambda,
            states,
        )?;
        Ok((d_bar, q_bar_pre))
    }

    /// The full safe-policy correction for one sampled batch: indicator
    /// critic regression, actor step, constraint evaluation, multiplier
    /// step, target averaging.
    pub fn update(&mut self, batch: &Batch, baseline_actions: &Array2<f64>) -> Result<SafeStats> {
        let next_actions = self.actor_target.predict(&batch.next_states)?;
        let y = self.critics.bootstrap_targets(
            &batch.indicators,
            self.budget.gamma_bar,
            &batch.next_states,
            &next_actions,
            &batch.terminals,
        )?;
        let critic_losses = self.critics.update(&batch.states, &batch.actions, &y)?;
        let (bc_distance, q_bar_pre) = self.actor_update(baseline_actions, &batch.states)?;
        let q_bar = self.constraint_estimate(&batch.states)?;
        if !q_bar.is_finite() {
            return Err(Error::NonFinite("constraint estimate".into()));
        }
        self.lambda = lambda_update(
            self.lambda,
            self.budget.gamma_threshold,
            q_bar,
            self.eta_lambda,
        );
        polyak_update(&mut self.actor_target, &self.actor, self.tau)?;
        self.critics.soft_update(self.tau)?;
        Ok(SafeStats {
            critic_losses,
            bc_distance,
            q_bar_pre,
            q_bar,
            lambda: self.lambda,
        })
    }
}
