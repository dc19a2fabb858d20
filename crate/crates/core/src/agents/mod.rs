//! Baseline and safe agents plus the scalar update rules they share.

mod baseline;
mod budget;
mod critic;
mod ops;
mod safe;

pub use baseline::{BaselineAgent, BaselineStats};
pub use budget::{compute_gamma_threshold, Horizon, SafetyBudget};
pub use critic::{
    critic_update, dpg_actor_step, safe_actor_step, ActionValue, Critic, TwinCritics,
};
pub use ops::{
    apply_noise, bc_distance, critic_target, critic_targets, lambda_update, polyak_update,
    select_action,
};
pub use safe::{SafeAgent, SafeStats};

pub(crate) use ops::perturb;

/// Network sizes and step sizes shared by both agents.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Polyak coefficient for target networks.
    pub tau: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            actor_hidden: vec![400, 300],
            critic_hidden: vec![400, 300],
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            tau: 0.005,
        }
    }
}

impl AgentConfig {
    pub(crate) fn actor_sizes(&self, obs_dim: usize, act_dim: usize) -> Vec<usize> {
        let mut sizes = vec![obs_dim];
        sizes.extend(&self.actor_hidden);
        sizes.push(act_dim);
        sizes
    }

    pub(crate) fn critic_sizes(&self, obs_dim: usize, act_dim: usize) -> Vec<usize> {
        let mut sizes = vec![obs_dim + act_dim];
        sizes.extend(&self.critic_hidden);
        sizes.push(1);
        sizes
    }
}

/// Decorrelate per-network seeds derived from one run seed (splitmix64).
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
