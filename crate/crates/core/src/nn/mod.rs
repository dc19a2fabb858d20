//! Dense feed-forward networks with hand-written reverse-mode gradients.
//!
//! Everything trainable in the crate (actors and both critic pairs) is an
//! [`Mlp`]. Batches are row-major `batch × features` matrices; weights are
//! stored `fan_out × fan_in` so a layer computes `z = x Wᵀ + b`.

pub mod checkpoint;
mod grad_check;
mod mlp;
mod optim;

pub use grad_check::{grad_check, grad_check_with_fault, random_grad_check_suite};
pub use mlp::{Activation, ForwardCache, Gradients, Mlp};
pub use optim::{Adam, Optimizer, Sgd};
