//! Dual-agent safe reinforcement learning.
//!
//! A *baseline* agent maximises reward with a twin-critic deterministic policy
//! gradient learner (or is a frozen checkpoint / hand-written controller).
//! A *safe* agent imitates the baseline through an online behaviour-cloning
//! loss while a Lagrange multiplier enforces a lower bound on its discounted
//! safety-indicator value. Both agents share one replay buffer.
//!
//! The crate also ships two desk-scale continuous-control environments, a
//! tabular constrained MDP with an exhaustive-enumeration oracle, and a
//! line-oriented checkpoint format. See the `examples/` directory for one
//! runnable program per capability.

pub mod agents;
pub mod cli;
pub mod env;
pub mod error;
pub mod nn;
pub mod oracle;
pub mod replay;
pub mod trainer;

pub use error::{Error, Result};
