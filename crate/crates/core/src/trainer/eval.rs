use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ScriptedController;
use crate::agents::derive_seed;
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::nn::Mlp;

/// Anything that maps an observation to a normalised action.
pub trait Policy {
    fn act(&mut self, obs: &[f64]) -> Result<Vec<f64>>;
}

/// Noise-free actor network.
pub struct ActorPolicy<'a>(pub &'a Mlp);

impl Policy for ActorPolicy<'_> {
    fn act(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        self.0.predict_one(obs)
    }
}

impl Policy for ScriptedController {
    fn act(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        self.action_normalized(obs)
    }
}

/// Uniform random actions in `[-1, 1]^d`.
pub struct RandomPolicy {
    pub action_dim: usize,
    pub rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(action_dim: usize, seed: u64) -> Self {
        RandomPolicy {
            action_dim,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Policy for RandomPolicy {
    fn act(&mut self, _obs: &[f64]) -> Result<Vec<f64>> {
        Ok((0..self.action_dim)
            .map(|_| self.rng.random_range(-1.0..=1.0))
            .collect())
    }
}

/// Aggregate rollout statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mean_return: f64,
    pub std_return: f64,
    /// Episode cost is the number of unsafe steps.
    pub mean_cost: f64,
    pub std_cost: f64,
    /// Unsafe steps over all steps.
    pub violation_rate: f64,
    /// Fraction of episodes reaching the goal with zero cost (goal tasks only).
    pub success_rate: Option<f64>,
    /// Fraction of episodes reaching the goal regardless of cost.
    pub goal_rate: Option<f64>,
    pub episodes: usize,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str =
        "episodes,mean_return,std_return,mean_cost,std_cost,violation_rate,success_rate";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.episodes,
            self.mean_return,
            self.std_return,
            self.mean_cost,
            self.std_cost,
            self.violation_rate,
            self.success_rate.map_or(String::new(), |s| s.to_string())
        )
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Seed of evaluation episode `i` for a given evaluation seed.
pub fn episode_seed(seed: u64, i: usize) -> u64 {
    derive_seed(seed, 0x5eed_0000 + i as u64)
}

/// Roll out `episodes` full episodes; actions are clipped to `[-1, 1]`.
pub fn evaluate(
    policy: &mut dyn Policy,
    env: &mut dyn Environment,
    episodes: usize,
    seed: u64,
) -> Result<EvalReport> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("episodes must be at least 1".into()));
    }
    let mut returns = Vec::with_capacity(episodes);
    let mut costs = Vec::with_capacity(episodes);
    let mut steps = 0usize;
    let mut successes = 0usize;
    let mut goals = 0usize;
    let mut has_goal = false;
    for i in 0..episodes {
        let mut obs = env.reset(episode_seed(seed, i));
        let (mut ret, mut cost) = (0.0, 0.0);
        loop {
            let a: Vec<f64> = policy.act(&obs)?.iter().map(|a| a.clamp(-1.0, 1.0)).collect();
            let r = env.step_normalized(&a)?;
            ret += r.reward;
            cost += 1.0 - r.indicator;
            steps += 1;
            obs = r.next_state;
            if r.terminal {
                break;
            }
        }
        if let Some(reached) = env.goal_reached() {
            has_goal = true;
            goals += reached as usize;
            successes += (reached && cost == 0.0) as usize;
        }
        returns.push(ret);
        costs.push(cost);
    }
    let (mean_return, std_return) = mean_std(&returns);
    let (mean_cost, std_cost) = mean_std(&costs);
    let n = episodes as f64;
    Ok(EvalReport {
        mean_return,
        std_return,
        mean_cost,
        std_cost,
        violation_rate: costs.iter().sum::<f64>() / steps as f64,
        success_rate: has_goal.then(|| successes as f64 / n),
        goal_rate: has_goal.then(|| goals as f64 / n),
        episodes,
    })
}
