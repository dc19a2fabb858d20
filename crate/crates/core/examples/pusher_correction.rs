//! Correct a fixed scripted pusher that drives the object through an
//! obstacle. The scripted baseline is never updated; the safe agent clones
//! it under the indicator-value constraint.
//!
//! ```text
//! cargo run --release --example pusher_correction -- total_steps=20000 seed=1
//! ```

use dualsafe::trainer::{train, TrainConfig, METRICS_HEADER};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = TrainConfig::parse_text(include_str!("../configs/pusher.cfg"), None)?;
    cfg.metrics_path = None;
    cfg.checkpoint_path = None;
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').ok_or("arguments are key=value")?;
        cfg.set(k, v)?;
    }
    println!("{METRICS_HEADER}");
    let start = std::time::Instant::now();
    let out = train(cfg, |row| println!("{}", row.to_csv()))?;
    let last = out.rows.last().expect("at least the initial row");
    println!(
        "# {:.1?}; scripted violation {:.3}, safe violation {:.3}, safe success {:.2}",
        start.elapsed(),
        last.baseline.violation_rate,
        last.safe.violation_rate,
        last.safe.success_rate.unwrap_or(0.0)
    );
    Ok(())
}
