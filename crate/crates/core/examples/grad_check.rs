//! Finite-difference check of the MLP backward pass.
//!
//! ```text
//! cargo run --release --example grad_check -- [count] [seed]
//! ```

use dualsafe::nn::{grad_check, grad_check_with_fault, random_grad_check_suite, Activation, Mlp};
use ndarray::array;

fn main() -> dualsafe::Result<()> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().map_or(100, |s| s.parse().expect("count"));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));

    let net = Mlp::new(&[4, 8, 8, 2], Activation::Tanh, 7)?;
    let x = array![[0.1, -0.4, 0.7, 0.2], [-0.9, 0.3, 0.0, 0.5]];
    println!("(4,8,8,2) tanh net:        {:.3e}", grad_check(&net, &x, 1e-5));
    println!("same net, flipped layer 0: {:.3e}", grad_check_with_fault(&net, &x, 1e-5, 0));

    let worst = random_grad_check_suite(seed, count, 1e-5, false);
    println!("worst over {count} random nets: {worst:.3e}");
    Ok(())
}
