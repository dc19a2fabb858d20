use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{indicator, Environment, StepResult};
use crate::error::{Error, Result};

/// Point mass running along +x inside a lane `|y| ≤ y_bound`.
///
/// Velocity follows `v ← v + (a − drag·v)·dt`, position `p ← p + v·dt`.
/// The linear drag gives full throttle a terminal speed of
/// `accel_limit / drag`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorridorConfig {
    pub dt: f64,
    pub y_bound: f64,
    pub speed_limit: f64,
    pub accel_limit: f64,
    pub drag: f64,
    pub horizon: usize,
    /// Half-width of the uniform draw for the initial lateral offset.
    pub init_y_spread: f64,
    /// Observation divides x by this, keeping inputs O(1) over an episode.
    pub x_obs_scale: f64,
}

impl Default for CorridorConfig {
    fn default() -> Self {
        CorridorConfig {
            dt: 0.05,
            y_bound: 1.0,
            speed_limit: 1.5,
            accel_limit: 1.0,
            drag: 0.5,
            horizon: 500,
            init_y_spread: 0.1,
            x_obs_scale: 25.0,
        }
    }
}

impl CorridorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt", self.dt),
            ("y_bound", self.y_bound),
            ("speed_limit", self.speed_limit),
            ("accel_limit", self.accel_limit),
            ("x_obs_scale", self.x_obs_scale),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("env.corridor.{name} must be positive")));
            }
        }
        if !(self.drag.is_finite() && self.drag >= 0.0) {
            return Err(Error::Config("env.corridor.drag must be nonnegative".into()));
        }
        if !(self.init_y_spread.is_finite() && self.init_y_spread >= 0.0) {
            return Err(Error::Config(
                "env.corridor.init_y_spread must be nonnegative".into(),
            ));
        }
        if self.horizon == 0 {
            return Err(Error::Config("env.corridor.horizon must be positive".into()));
        }
        Ok(())
    }

    /// Lane excess plus speed excess; zero exactly when the state is safe.
    pub fn cost(&self, y: f64, vx: f64, vy: f64) -> f64 {
        let speed = vx.hypot(vy);
        (y.abs() - self.y_bound).max(0.0) + (speed - self.speed_limit).max(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct CorridorEnv {
    config: CorridorConfig,
    /// (x, y, vx, vy)
    state: [f64; 4],
    t: usize,
    done: bool,
}

impl CorridorEnv {
    pub fn new(config: CorridorConfig) -> Result<Self> {
        config.validate()?;
        Ok(CorridorEnv {
            config,
            state: [0.0; 4],
            t: 0,
            done: false,
        })
    }

    pub fn config(&self) -> &CorridorConfig {
        &self.config
    }

    pub fn state(&self) -> [f64; 4] {
        self.state
    }

    /// Overwrite the physical state mid-episode.
    pub fn set_state(&mut self, state: [f64; 4]) {
        self.state = state;
    }

    pub fn elapsed(&self) -> usize {
        self.t
    }
}

impl Environment for CorridorEnv {
    fn observation_dim(&self) -> usize {
        4
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn action_scale(&self) -> Vec<f64> {
        vec![self.config.accel_limit; 2]
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = self.config.init_y_spread;
        let y = if s > 0.0 { rng.random_range(-s..=s) } else { 0.0 };
        self.state = [0.0, y, 0.0, 0.0];
        self.t = 0;
        self.done = false;
        self.observation()
    }

    fn observation(&self) -> Vec<f64> {
        let [x, y, vx, vy] = self.state;
        vec![x / self.config.x_obs_scale, y, vx, vy]
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.done {
            return Err(Error::EpisodeOver);
        }
        if action.len() != 2 {
            return Err(Error::ShapeMismatch(format!(
                "corridor action has 2 components, got {}",
                action.len()
            )));
        }
        if !action.iter().all(|a| a.is_finite()) {
            return Err(Error::NonFinite("corridor action".into()));
        }
        let c = &self.config;
        let ax = action[0].clamp(-c.accel_limit, c.accel_limit);
        let ay = action[1].clamp(-c.accel_limit, c.accel_limit);
        let [mut x, mut y, mut vx, mut vy] = self.state;
        vx += (ax - c.drag * vx) * c.dt;
        vy += (ay - c.drag * vy) * c.dt;
        x += vx * c.dt;
        y += vy * c.dt;
        self.state = [x, y, vx, vy];
        self.t += 1;

        let cost = c.cost(y, vx, vy);
        let terminal = self.t >= c.horizon;
        self.done = terminal;
        Ok(StepResult {
            next_state: self.observation(),
            reward: vx,
            cost,
            indicator: indicator(cost)?,
            terminal,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn at_rest_is_safe() {
        let mut env = CorridorEnv::new(CorridorConfig::default()).unwrap();
        env.reset(3);
        let r = env.step(&[0.0, 0.0]).unwrap();
        assert_eq!(r.reward, 0.0);
        assert_eq!(r.cost, 0.0);
        assert_eq!(r.indicator, 1.0);
    }

    #[test]
    fn speeding_costs_the_excess() {
        let cfg = CorridorConfig {
            drag: 0.0,
            ..CorridorConfig::default()
        };
        let mut env = CorridorEnv::new(cfg).unwrap();
        env.reset(0);
        env.set_state([0.0, 0.0, 2.0, 0.0]);
        let r = env.step(&[0.0, 0.0]).unwrap();
        assert_eq!(r.reward, 2.0);
        assert!((r.cost - 0.5).abs() < 1e-12);
        assert_eq!(r.indicator, 0.0);
    }

    #[test]
    fn lane_excess_cost() {
        let cfg = CorridorConfig::default();
        let cost = cfg.cost(cfg.y_bound + 0.1, 1.0, 0.0);
        assert!((cost - 0.1).abs() < 1e-12);
        assert_eq!(indicator(cost).unwrap(), 0.0);
    }

    #[test]
    fn terminates_exactly_at_horizon() {
        let cfg = CorridorConfig {
            horizon: 7,
            ..CorridorConfig::default()
        };
        let mut env = CorridorEnv::new(cfg).unwrap();
        env.reset(1);
        for t in 1..=7 {
            let r = env.step(&[0.3, -0.1]).unwrap();
            assert_eq!(r.terminal, t == 7);
        }
        assert!(matches!(env.step(&[0.0, 0.0]), Err(Error::EpisodeOver)));
    }

    #[test]
    fn actions_are_clipped() {
        let mut a = CorridorEnv::new(CorridorConfig::default()).unwrap();
        let mut b = a.clone();
        a.reset(2);
        b.reset(2);
        let ra = a.step(&[50.0, -9.0]).unwrap();
        let rb = b.step(&[1.0, -1.0]).unwrap();
        assert_eq!(ra, rb);
    }

    #[test]
    fn full_throttle_terminal_speed() {
        let mut env = CorridorEnv::new(CorridorConfig::default()).unwrap();
        env.reset(0);
        let mut last = None;
        while let Ok(r) = env.step(&[1.0, 0.0]) {
            last = Some(r);
        }
        let vx = env.state()[2];
        assert!((vx - 2.0).abs() < 1e-3, "vx {vx}");
        assert!(last.unwrap().terminal);
    }

    #[test]
    fn seeded_reset_reproducible() {
        let mut env = CorridorEnv::new(CorridorConfig::default()).unwrap();
        let a = env.reset(11);
        let b = env.reset(11);
        assert_eq!(a, b);
    }
}
