//! Solve a tiny constrained MDP exactly and with the tabular primal-dual
//! scheme, then print both solutions.
//!
//! ```text
//! cargo run --example tabular_oracle -- data/cmdp/speedway.cmdp 0.1 0.5
//! ```

use dualsafe::agents::SafetyBudget;
use dualsafe::env::TabularCmdp;
use dualsafe::oracle::{constrained_optimum, tabular_primal_dual, PrimalDualConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/cmdp/speedway.cmdp").into());
    let delta: f64 = args.next().map_or(Ok(0.1), |s| s.parse())?;
    let gamma_bar: f64 = args.next().map_or(Ok(0.5), |s| s.parse())?;
    let discount = 0.9;

    let cmdp: TabularCmdp = std::fs::read_to_string(&path)?.parse()?;
    let budget = SafetyBudget::new(delta, gamma_bar, cmdp.horizon())?;
    let oracle = constrained_optimum(&cmdp, &budget, discount)?;
    println!("Gamma = {:.6}", oracle.gamma_threshold);
    let u = &oracle.unconstrained;
    println!(
        "unconstrained  {}  V_R={:.6}  V_I={:.6}",
        u.policy, u.reward_value, u.indicator_value
    );
    match &oracle.constrained {
        Some(c) => println!(
            "constrained    {}  V_R={:.6}  V_I={:.6}",
            c.policy, c.reward_value, c.indicator_value
        ),
        None => println!("constrained    infeasible"),
    }

    let pd = tabular_primal_dual(&cmdp, &budget, discount, &PrimalDualConfig::default())?;
    match &pd.recovered {
        Some(r) => println!(
            "primal-dual    {}  V_R={:.6}  V_I={:.6}",
            r.policy, r.reward_value, r.indicator_value
        ),
        None => println!("primal-dual    no feasible iterate"),
    }
    println!(
        "final lambda = {:.6} (diverging: {})",
        pd.lambda_trace.last().copied().unwrap_or(0.0),
        pd.lambda_diverging()
    );
    Ok(())
}
