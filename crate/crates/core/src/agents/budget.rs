use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Episode length used by the safety threshold: a step count or unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Finite(usize),
    Infinite,
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Horizon::Finite(t) => write!(f, "{t}"),
            Horizon::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Horizon {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inf" | "infinite" => Ok(Horizon::Infinite),
            _ => match s.parse::<usize>() {
                Ok(t) if t >= 1 => Ok(Horizon::Finite(t)),
                _ => Err(Error::InvalidArgument(format!(
                    "horizon must be a positive integer or `inf`, got `{s}`"
                ))),
            },
        }
    }
}

/// Lower bound Γ on the replay-averaged discounted safety-indicator value
/// implied by requiring every step to be safe with probability `1 − delta`.
///
/// For a finite horizon `T` this averages the per-step bound
/// `(1−δ)(1−γ̄^{T−k})/(1−γ̄)` over `k = 0..T`, which sums to
/// `(1−δ)·[T(1−γ̄) − γ̄(1−γ̄^T)] / [T(1−γ̄)²]`; as `T → ∞` it tends to
/// `(1−δ)/(1−γ̄)`.
pub fn compute_gamma_threshold(delta: f64, gamma_bar: f64, horizon: Horizon) -> Result<f64> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidArgument(format!("delta must lie in [0, 1], got {delta}")));
    }
    if !(0.0..1.0).contains(&gamma_bar) {
        return Err(Error::InvalidArgument(format!(
            "gamma_bar must lie in [0, 1), got {gamma_bar}"
        )));
    }
    let one_minus = 1.0 - gamma_bar;
    Ok(match horizon {
        Horizon::Infinite => (1.0 - delta) / one_minus,
        Horizon::Finite(0) => {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()))
        }
        Horizon::Finite(t) => {
            let t_f = t as f64;
            let tail = gamma_bar * (1.0 - gamma_bar.powi(t.min(i32::MAX as usize) as i32));
            (1.0 - delta) * (t_f * one_minus - tail) / (t_f * one_minus * one_minus)
        }
    })
}

/// The safety constraint carried by the safe agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyBudget {
    pub delta: f64,
    pub gamma_bar: f64,
    pub horizon: Horizon,
    pub gamma_threshold: f64,
}

impl SafetyBudget {
    pub fn new(delta: f64, gamma_bar: f64, horizon: Horizon) -> Result<Self> {
        Ok(SafetyBudget {
            delta,
            gamma_bar,
            horizon,
            gamma_threshold: compute_gamma_threshold(delta, gamma_bar, horizon)?,
        })
    }
}
