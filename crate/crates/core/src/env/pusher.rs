use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{indicator, Environment, StepResult};
use crate::error::{Error, Result};

type Vec2 = [f64; 2];

fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

fn add_scaled(a: Vec2, d: Vec2, s: f64) -> Vec2 {
    [a[0] + s * d[0], a[1] + s * d[1]]
}

fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

fn unit_or(a: Vec2, fallback: Vec2) -> Vec2 {
    let n = norm(a);
    if n > 1e-12 {
        [a[0] / n, a[1] / n]
    } else {
        fallback
    }
}

/// Slack below which two discs count as touching.
const CONTACT_EPS: f64 = 1e-9;

/// Planar push task on the unit square.
///
/// The end effector is a small disc moved by bounded position increments.
/// Contact with the object disc displaces the object along the contact
/// normal. The obstacle disc is fixed and rigid; touching it with either the
/// effector or the object costs 1 for that step.
#[derive(Debug, Clone, PartialEq)]
pub struct PusherConfig {
    pub horizon: usize,
    /// Per-component bound on the effector increment.
    pub step_limit: f64,
    pub agent_radius: f64,
    pub object_radius: f64,
    pub obstacle_radius: f64,
    /// Success when the object centre is within this distance of the goal.
    pub goal_tolerance: f64,
    /// Range of initial object-to-goal distances.
    pub min_goal_distance: f64,
    pub max_goal_distance: f64,
    /// Obstacle sits at this fraction along the object→goal segment, drawn
    /// uniformly from the range. `None` moves it out of the way.
    pub obstacle_fraction: Option<(f64, f64)>,
    /// Effector starts this far behind the object, opposite the goal.
    pub agent_standoff: f64,
}

impl Default for PusherConfig {
    fn default() -> Self {
        PusherConfig {
            horizon: 50,
            step_limit: 0.05,
            agent_radius: 0.02,
            object_radius: 0.05,
            obstacle_radius: 0.05,
            goal_tolerance: 0.05,
            min_goal_distance: 0.3,
            max_goal_distance: 0.5,
            obstacle_fraction: Some((0.45, 0.55)),
            agent_standoff: 0.1,
        }
    }
}

impl PusherConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("step_limit", self.step_limit),
            ("agent_radius", self.agent_radius),
            ("object_radius", self.object_radius),
            ("obstacle_radius", self.obstacle_radius),
            ("goal_tolerance", self.goal_tolerance),
            ("min_goal_distance", self.min_goal_distance),
            ("agent_standoff", self.agent_standoff),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("env.pusher.{name} must be positive")));
            }
        }
        if self.max_goal_distance < self.min_goal_distance || self.max_goal_distance > 0.7 {
            return Err(Error::Config(
                "env.pusher goal distance range must satisfy min ≤ max ≤ 0.7".into(),
            ));
        }
        if let Some((lo, hi)) = self.obstacle_fraction {
            if !(0.0 < lo && lo <= hi && hi < 1.0) {
                return Err(Error::Config(
                    "env.pusher.obstacle_fraction must lie inside (0, 1)".into(),
                ));
            }
        }
        if self.horizon == 0 {
            return Err(Error::Config("env.pusher.horizon must be positive".into()));
        }
        Ok(())
    }
}

/// Positions of everything on the table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PusherLayout {
    pub agent: Vec2,
    pub object: Vec2,
    pub obstacle: Vec2,
    pub goal: Vec2,
}

#[derive(Debug, Clone)]
pub struct PusherEnv {
    config: PusherConfig,
    layout: PusherLayout,
    object_velocity: Vec2,
    t: usize,
    done: bool,
}

impl PusherEnv {
    pub fn new(config: PusherConfig) -> Result<Self> {
        config.validate()?;
        Ok(PusherEnv {
            config,
            layout: PusherLayout {
                agent: [0.5, 0.2],
                object: [0.5, 0.3],
                obstacle: [0.9, 0.9],
                goal: [0.5, 0.7],
            },
            object_velocity: [0.0; 2],
            t: 0,
            done: false,
        })
    }

    pub fn config(&self) -> &PusherConfig {
        &self.config
    }

    pub fn layout(&self) -> PusherLayout {
        self.layout
    }

    /// Start an episode from an explicit layout.
    pub fn reset_with_layout(&mut self, layout: PusherLayout) -> Vec<f64> {
        self.layout = layout;
        self.object_velocity = [0.0; 2];
        self.t = 0;
        self.done = false;
        self.observation()
    }

    fn sample_layout(&self, rng: &mut ChaCha8Rng) -> PusherLayout {
        let c = &self.config;
        let margin = 0.15;
        loop {
            let object = [
                rng.random_range(margin..1.0 - margin),
                rng.random_range(margin..1.0 - margin),
            ];
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let dist = if c.max_goal_distance > c.min_goal_distance {
                rng.random_range(c.min_goal_distance..c.max_goal_distance)
            } else {
                c.min_goal_distance
            };
            let dir = [angle.cos(), angle.sin()];
            let goal = add_scaled(object, dir, dist);
            if goal.iter().any(|&g| !(margin..=1.0 - margin).contains(&g)) {
                continue;
            }
            let obstacle = match c.obstacle_fraction {
                Some((lo, hi)) => {
                    let f = if hi > lo { rng.random_range(lo..hi) } else { lo };
                    add_scaled(object, dir, f * dist)
                }
                None => {
                    // Park it in the corner farthest from the push line.
                    let corners = [[0.02, 0.02], [0.98, 0.02], [0.02, 0.98], [0.98, 0.98]];
                    let mid = add_scaled(object, dir, 0.5 * dist);
                    corners
                        .into_iter()
                        .max_by(|a, b| norm(sub(*a, mid)).total_cmp(&norm(sub(*b, mid))))
                        .unwrap()
                }
            };
            let jitter = rng.random_range(-0.03..0.03);
            let perp = [-dir[1], dir[0]];
            let agent = add_scaled(add_scaled(object, dir, -c.agent_standoff), perp, jitter);
            return PusherLayout {
                agent,
                object,
                obstacle,
                goal,
            };
        }
    }

    fn touching_obstacle(&self) -> bool {
        let c = &self.config;
        let l = &self.layout;
        norm(sub(l.object, l.obstacle)) <= c.object_radius + c.obstacle_radius + CONTACT_EPS
            || norm(sub(l.agent, l.obstacle)) <= c.agent_radius + c.obstacle_radius + CONTACT_EPS
    }

    fn at_goal(&self) -> bool {
        norm(sub(self.layout.object, self.layout.goal)) <= self.config.goal_tolerance
    }

    /// Resolve contacts after the effector moved by `delta`.
    fn resolve(&mut self, delta: Vec2) {
        let c = self.config.clone();
        let l = &mut self.layout;
        let ao = c.agent_radius + c.object_radius;
        let ob = c.object_radius + c.obstacle_radius;
        let ab = c.agent_radius + c.obstacle_radius;
        let clamp = |p: Vec2, r: f64| [p[0].clamp(r, 1.0 - r), p[1].clamp(r, 1.0 - r)];

        l.agent = clamp(add_scaled(l.agent, delta, 1.0), c.agent_radius);
        if norm(sub(l.object, l.agent)) < ao {
            let n = unit_or(sub(l.object, l.agent), unit_or(delta, [1.0, 0.0]));
            l.object = clamp(add_scaled(l.agent, n, ao), c.object_radius);
        }
        if norm(sub(l.object, l.obstacle)) < ob {
            let n = unit_or(sub(l.object, l.obstacle), [1.0, 0.0]);
            l.object = add_scaled(l.obstacle, n, ob);
        }
        if norm(sub(l.agent, l.object)) < ao {
            let n = unit_or(sub(l.agent, l.object), [-delta[0], -delta[1]]);
            l.agent = add_scaled(l.object, n, ao);
        }
        if norm(sub(l.agent, l.obstacle)) < ab {
            let n = unit_or(sub(l.agent, l.obstacle), [1.0, 0.0]);
            l.agent = add_scaled(l.obstacle, n, ab);
        }
    }
}

impl Environment for PusherEnv {
    /// Effector, object, obstacle, goal (8), object velocity in step units
    /// (2), and object-relative offsets of effector, goal, and obstacle (6).
    fn observation_dim(&self) -> usize {
        16
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn action_scale(&self) -> Vec<f64> {
        vec![self.config.step_limit; 2]
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = self.sample_layout(&mut rng);
        self.reset_with_layout(layout)
    }

    fn observation(&self) -> Vec<f64> {
        let l = &self.layout;
        let rel = 1.0 / (4.0 * self.config.object_radius);
        let v = 1.0 / self.config.step_limit;
        let oa = sub(l.object, l.agent);
        let go = sub(l.goal, l.object);
        let bo = sub(l.obstacle, l.object);
        vec![
            l.agent[0],
            l.agent[1],
            l.object[0],
            l.object[1],
            l.obstacle[0],
            l.obstacle[1],
            l.goal[0],
            l.goal[1],
            self.object_velocity[0] * v,
            self.object_velocity[1] * v,
            oa[0] * rel,
            oa[1] * rel,
            go[0] * rel,
            go[1] * rel,
            bo[0] * rel,
            bo[1] * rel,
        ]
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.done {
            return Err(Error::EpisodeOver);
        }
        if action.len() != 2 {
            return Err(Error::ShapeMismatch(format!(
                "pusher action has 2 components, got {}",
                action.len()
            )));
        }
        if !action.iter().all(|a| a.is_finite()) {
            return Err(Error::NonFinite("pusher action".into()));
        }
        let lim = self.config.step_limit;
        let delta = [action[0].clamp(-lim, lim), action[1].clamp(-lim, lim)];
        let before = self.layout.object;
        self.resolve(delta);
        self.object_velocity = sub(self.layout.object, before);
        self.t += 1;

        let cost = if self.touching_obstacle() { 1.0 } else { 0.0 };
        let success = self.at_goal();
        let terminal = success || self.t >= self.config.horizon;
        self.done = terminal;
        Ok(StepResult {
            next_state: self.observation(),
            reward: if success { 0.0 } else { -1.0 },
            cost,
            indicator: indicator(cost)?,
            terminal,
        })
    }

    fn goal_reached(&self) -> Option<bool> {
        Some(self.at_goal())
    }
}
