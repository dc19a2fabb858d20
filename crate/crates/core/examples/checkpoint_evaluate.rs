//! Train briefly, save both agents, reload the safe actor and evaluate it.
//!
//! ```text
//! cargo run --release --example checkpoint_evaluate -- [steps]
//! ```

use dualsafe::trainer::{evaluate, train, ActorPolicy, AgentCheckpoint, EvalReport, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps = std::env::args().nth(1).unwrap_or_else(|| "5000".into());
    let dir = std::env::temp_dir().join(format!("dualsafe-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("agents.ckpt");

    let mut cfg = TrainConfig::parse_text(include_str!("../configs/corridor.cfg"), None)?;
    cfg.set("total_steps", &steps)?;
    cfg.metrics_path = None;
    cfg.checkpoint_path = Some(path.clone());
    let out = train(cfg.clone(), |_| {})?;
    println!("trained {} steps, lambda {:.3}", out.trainer.steps_taken(), out.trainer.safe().lambda);

    let ck = AgentCheckpoint::load(&path)?;
    let names: Vec<&str> = ck.networks.iter().map(|(n, _)| n.as_str()).collect();
    println!("checkpoint networks: {}", names.join(" "));
    println!("footer: {}", ck.footer.map(|f| f.to_line()).unwrap_or_default());

    let mut env = cfg.env_config()?.build()?;
    let actor = ck.actor("actor_S", env.observation_dim(), env.action_dim(), &cfg.actor_hidden)?;
    assert_eq!(&actor, &out.trainer.safe().actor);
    let report = evaluate(&mut ActorPolicy(&actor), env.as_mut(), 10, 0)?;
    println!("{}\n{}", EvalReport::CSV_HEADER, report.csv_row());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
