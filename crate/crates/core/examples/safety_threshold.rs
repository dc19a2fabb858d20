//! Print the safety threshold Γ over a grid of δ, γ̄ and horizons.
//!
//! ```text
//! cargo run --example safety_threshold
//! ```

use dualsafe::agents::{compute_gamma_threshold, Horizon};

fn main() -> dualsafe::Result<()> {
    let horizons = [
        Horizon::Finite(1),
        Horizon::Finite(2),
        Horizon::Finite(50),
        Horizon::Finite(500),
        Horizon::Infinite,
    ];
    print!("{:>6} {:>6}", "delta", "g_bar");
    for h in horizons {
        print!(" {:>10}", format!("T={h}"));
    }
    println!();
    for delta in [0.0, 0.05, 0.5] {
        for gamma_bar in [0.0, 0.5, 0.6, 0.9, 0.99] {
            print!("{delta:>6} {gamma_bar:>6}");
            for h in horizons {
                print!(" {:>10.6}", compute_gamma_threshold(delta, gamma_bar, h)?);
            }
            println!();
        }
    }
    Ok(())
}
