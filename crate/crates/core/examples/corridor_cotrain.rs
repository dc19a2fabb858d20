//! Co-train a reward-seeking baseline and a safe agent on the corridor.
//!
//! Extra `key=value` arguments override the config, e.g.
//!
//! ```text
//! cargo run --release --example corridor_cotrain -- total_steps=50000 seed=2
//! ```

use dualsafe::trainer::{train, TrainConfig, METRICS_HEADER};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = TrainConfig::parse_text(
        include_str!("../configs/corridor.cfg"),
        None,
    )?;
    cfg.metrics_path = None;
    cfg.checkpoint_path = None;
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').ok_or("arguments are key=value")?;
        cfg.set(k, v)?;
    }
    println!("{METRICS_HEADER}");
    let start = std::time::Instant::now();
    let out = train(cfg, |row| println!("{}", row.to_csv()))?;
    let c = out.trainer.counters();
    println!(
        "# {} steps in {:.1?}; baseline picked {} of {} coin flips",
        c.env_steps,
        start.elapsed(),
        c.baseline_selections,
        c.coin_flips
    );
    Ok(())
}
