//! Roll out the scripted and random controllers in both environments and
//! print their return, cost and success statistics.
//!
//! ```text
//! cargo run --release --example environments -- [episodes]
//! ```

use dualsafe::env::EnvConfig;
use dualsafe::trainer::{evaluate, EvalReport, Policy, RandomPolicy, ScriptedController};

fn report(env: &str, name: &str, r: &EvalReport) {
    let success = r
        .success_rate
        .map_or_else(|| "-".to_string(), |s| format!("{s:.2}"));
    println!(
        "{env:<9}{name:<20}{:>10.2}{:>10.1}{:>11.3}{:>9}",
        r.mean_return, r.mean_cost, r.violation_rate, success
    );
}

fn main() -> dualsafe::Result<()> {
    let episodes: usize = std::env::args()
        .nth(1)
        .map_or(20, |s| s.parse().expect("episodes"));
    println!(
        "{:<9}{:<20}{:>10}{:>10}{:>11}{:>9}",
        "env", "policy", "return", "cost", "violation", "success"
    );
    for (env_name, scripted) in [
        ("corridor", ["idle", "full-throttle-x"]),
        ("pusher", ["idle", "straight-line-push"]),
    ] {
        let cfg = EnvConfig::by_name(env_name)?;
        let mut env = cfg.build()?;
        for name in scripted {
            let mut c = ScriptedController::new(name, &cfg)?;
            report(env_name, name, &evaluate(&mut c, env.as_mut(), episodes, 0)?);
        }
        let mut random: Box<dyn Policy> = Box::new(RandomPolicy::new(env.action_dim(), 1));
        report(env_name, "random", &evaluate(random.as_mut(), env.as_mut(), episodes, 0)?);
    }
    Ok(())
}
