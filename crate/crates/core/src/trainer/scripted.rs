use crate::env::{EnvConfig, PusherConfig};
use crate::error::{Error, Result};

/// Hand-written baseline controllers. They chase reward and ignore safety.
#[derive(Debug, Clone, PartialEq)]
pub enum ScriptedController {
    /// Zero action everywhere.
    Idle { action_dim: usize },
    /// Corridor: maximum forward acceleration, no lateral input.
    FullThrottleX { accel_limit: f64 },
    /// Pusher: line up behind the object, then push it straight at the goal.
    StraightLinePush(PusherConfig),
}

pub const SCRIPTED_NAMES: [&str; 3] = ["idle", "full-throttle-x", "straight-line-push"];

/// Extra clearance kept between effector and object while lining up.
const APPROACH_GAP: f64 = 0.01;
/// Lateral misalignment tolerated before pushing.
const ALIGN_TOL: f64 = 0.015;

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Scale `d` so neither component exceeds `limit`, keeping its direction.
fn fit(d: [f64; 2], limit: f64) -> [f64; 2] {
    let m = d[0].abs().max(d[1].abs());
    if m <= limit {
        d
    } else {
        [d[0] * limit / m, d[1] * limit / m]
    }
}

impl ScriptedController {
    pub fn new(name: &str, env: &EnvConfig) -> Result<Self> {
        match (name, env) {
            ("idle", EnvConfig::Corridor(_) | EnvConfig::Pusher(_)) => {
                Ok(ScriptedController::Idle { action_dim: 2 })
            }
            ("full-throttle-x", EnvConfig::Corridor(c)) => Ok(ScriptedController::FullThrottleX {
                accel_limit: c.accel_limit,
            }),
            ("straight-line-push", EnvConfig::Pusher(p)) => {
                Ok(ScriptedController::StraightLinePush(p.clone()))
            }
            _ => Err(Error::Config(format!(
                "unknown scripted controller `{name}` for env {} (known: {})",
                env.name(),
                SCRIPTED_NAMES.join(", ")
            ))),
        }
    }

    /// Physical action for an observation.
    pub fn action(&self, obs: &[f64]) -> Result<Vec<f64>> {
        match self {
            ScriptedController::Idle { action_dim } => Ok(vec![0.0; *action_dim]),
            ScriptedController::FullThrottleX { accel_limit } => Ok(vec![*accel_limit, 0.0]),
            ScriptedController::StraightLinePush(c) => {
                if obs.len() < 8 {
                    return Err(Error::ShapeMismatch("pusher observation too short".into()));
                }
                Ok(push_action(c, [obs[0], obs[1]], [obs[2], obs[3]], [obs[6], obs[7]]).to_vec())
            }
        }
    }

    /// Action in normalised `[-1, 1]` coordinates.
    pub fn action_normalized(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let scale = match self {
            ScriptedController::Idle { .. } => 1.0,
            ScriptedController::FullThrottleX { accel_limit } => *accel_limit,
            ScriptedController::StraightLinePush(c) => c.step_limit,
        };
        Ok(self.action(obs)?.iter().map(|a| a / scale).collect())
    }
}

fn push_action(c: &PusherConfig, agent: [f64; 2], object: [f64; 2], goal: [f64; 2]) -> [f64; 2] {
    let to_goal = [goal[0] - object[0], goal[1] - object[1]];
    let len = to_goal[0].hypot(to_goal[1]);
    if len < 1e-12 {
        return [0.0, 0.0];
    }
    let u = [to_goal[0] / len, to_goal[1] / len];
    let perp = [-u[1], u[0]];
    let contact = c.agent_radius + c.object_radius;
    let rel = [agent[0] - object[0], agent[1] - object[1]];
    let along = dot(rel, u);
    let lateral = dot(rel, perp);

    if along < -0.5 * contact && lateral.abs() < ALIGN_TOL {
        // Behind and lined up: push along u while trimming the offset.
        let d = [
            u[0] * c.step_limit - lateral * perp[0],
            u[1] * c.step_limit - lateral * perp[1],
        ];
        return fit(d, c.step_limit);
    }
    let stand = contact + APPROACH_GAP;
    let target = if along > -0.5 * contact && lateral.abs() < stand {
        // Beside or ahead of the object: step around it first.
        let side = if lateral >= 0.0 { 1.0 } else { -1.0 };
        [
            object[0] + side * stand * perp[0] - stand * u[0],
            object[1] + side * stand * perp[1] - stand * u[1],
        ]
    } else {
        [object[0] - stand * u[0], object[1] - stand * u[1]]
    };
    fit([target[0] - agent[0], target[1] - agent[1]], c.step_limit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{CorridorConfig, Environment, PusherEnv, PusherLayout};

    #[test]
    fn full_throttle_ignores_state() {
        let env = EnvConfig::Corridor(CorridorConfig::default());
        let c = ScriptedController::new("full-throttle-x", &env).unwrap();
        assert_eq!(c.action(&[0.3, -0.2, 1.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(c.action_normalized(&[0.0; 4]).unwrap(), vec![1.0, 0.0]);
        assert!(ScriptedController::new("straight-line-push", &env).is_err());
        assert!(ScriptedController::new("nope", &env).is_err());
    }

    #[test]
    fn push_along_goal_line_when_aligned() {
        let cfg = PusherConfig::default();
        let c = ScriptedController::StraightLinePush(cfg.clone());
        let a = push_action(&cfg, [0.2 - 0.07, 0.5], [0.2, 0.5], [0.6, 0.5]);
        assert_eq!(a, [cfg.step_limit, 0.0]);
        // Diagonal goal: increment parallel to object→goal.
        let obj = [0.3, 0.3];
        let off = 0.07 / 2f64.sqrt();
        let a = c
            .action(&[0.3 - off, 0.3 - off, obj[0], obj[1], 0.0, 0.0, 0.6, 0.6])
            .unwrap();
        assert!((a[0] - a[1]).abs() < 1e-12 && a[0] > 0.0);
    }

    #[test]
    fn detours_when_in_front() {
        let cfg = PusherConfig::default();
        let a = push_action(&cfg, [0.3, 0.5], [0.2, 0.5], [0.6, 0.5]);
        // Moves backwards (toward -x) and sideways rather than through the object.
        assert!(a[0] < 0.0 && a[1].abs() > 0.0);
    }

    #[test]
    fn reaches_goal_without_obstacle() {
        let cfg = PusherConfig {
            obstacle_fraction: None,
            ..PusherConfig::default()
        };
        let c = ScriptedController::StraightLinePush(cfg.clone());
        let mut env = PusherEnv::new(cfg).unwrap();
        let mut ok = 0;
        for seed in 0..20 {
            let mut obs = env.reset(seed);
            loop {
                let r = env.step(&c.action(&obs).unwrap()).unwrap();
                obs = r.next_state;
                if r.terminal {
                    break;
                }
            }
            ok += env.goal_reached().unwrap() as usize;
        }
        assert!(ok >= 18, "{ok}/20");
    }

    #[test]
    fn obstacle_in_path_is_touched() {
        let cfg = PusherConfig::default();
        let c = ScriptedController::StraightLinePush(cfg.clone());
        let mut env = PusherEnv::new(cfg).unwrap();
        let mut obs = env.reset_with_layout(PusherLayout {
            agent: [0.2, 0.5],
            object: [0.3, 0.5],
            obstacle: [0.5, 0.5],
            goal: [0.7, 0.5],
        });
        let mut cost = 0.0;
        loop {
            let r = env.step(&c.action(&obs).unwrap()).unwrap();
            cost += r.cost;
            obs = r.next_state;
            if r.terminal {
                break;
            }
        }
        assert!(cost > 10.0, "{cost}");
    }
}
