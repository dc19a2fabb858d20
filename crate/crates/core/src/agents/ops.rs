use ndarray::{Array1, Array2, Zip};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::nn::Mlp;

/// Clipped double-Q bootstrap target for one transition.
///
/// Terminal transitions do not bootstrap.
pub fn critic_target(signal: f64, discount: f64, q1_next: f64, q2_next: f64, terminal: bool) -> f64 {
    if terminal {
        signal
    } else {
        signal + discount * q1_next.min(q2_next)
    }
}

/// Batched [`critic_target`].
pub fn critic_targets(
    signals: &Array1<f64>,
    discount: f64,
    q1_next: &Array1<f64>,
    q2_next: &Array1<f64>,
    terminals: &[bool],
) -> Result<Array1<f64>> {
    let n = signals.len();
    if q1_next.len() != n || q2_next.len() != n || terminals.len() != n {
        return Err(Error::ShapeMismatch("target inputs differ in length".into()));
    }
    let y: Array1<f64> = (0..n)
        .map(|i| critic_target(signals[i], discount, q1_next[i], q2_next[i], terminals[i]))
        .collect();
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("critic targets".into()));
    }
    Ok(y)
}

/// Projected dual ascent step `[λ + η(Γ − Q̄)]⁺`.
pub fn lambda_update(lambda: f64, gamma_threshold: f64, q_bar: f64, eta_lambda: f64) -> f64 {
    (lambda + eta_lambda * (gamma_threshold - q_bar)).max(0.0)
}

/// `target ← τ·online + (1−τ)·target`, elementwise.
pub fn polyak_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<()> {
    if !target.same_shape(online) {
        return Err(Error::ShapeMismatch(
            "target and online networks differ in shape".into(),
        ));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidArgument(format!("tau must lie in [0, 1], got {tau}")));
    }
    let keep = 1.0 - tau;
    for (t, o) in target.weights_mut().iter_mut().zip(online.weights()) {
        Zip::from(t).and(o).for_each(|t, &o| *t = tau * o + keep * *t);
    }
    for (t, o) in target.biases_mut().iter_mut().zip(online.biases()) {
        Zip::from(t).and(o).for_each(|t, &o| *t = tau * o + keep * *t);
    }
    Ok(())
}

/// Mean over rows of the squared Euclidean distance between two action batches.
pub fn bc_distance(safe_actions: &Array2<f64>, baseline_actions: &Array2<f64>) -> Result<f64> {
    if safe_actions.dim() != baseline_actions.dim() {
        return Err(Error::ShapeMismatch(format!(
            "action batches {:?} and {:?} differ",
            safe_actions.dim(),
            baseline_actions.dim()
        )));
    }
    if safe_actions.nrows() == 0 {
        return Err(Error::InvalidArgument("empty action batch".into()));
    }
    let sq: f64 = Zip::from(safe_actions)
        .and(baseline_actions)
        .fold(0.0, |acc, &a, &b| acc + (a - b) * (a - b));
    Ok(sq / safe_actions.nrows() as f64)
}

/// Add a fixed noise vector and clip into `[low, high]`.
pub fn apply_noise(mean: &[f64], noise: &[f64], low: &[f64], high: &[f64]) -> Vec<f64> {
    mean.iter()
        .zip(noise)
        .zip(low.iter().zip(high))
        .map(|((m, n), (lo, hi))| (m + n).clamp(*lo, *hi))
        .collect()
}

/// Actor output plus i.i.d. `N(0, σ²)` noise per dimension, clipped to bounds.
pub fn select_action<R: Rng + ?Sized>(
    actor: &Mlp,
    state: &[f64],
    sigma: f64,
    low: &[f64],
    high: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mean = actor.predict_one(state)?;
    perturb(&mean, sigma, low, high, rng)
}

pub(crate) fn perturb<R: Rng + ?Sized>(
    mean: &[f64],
    sigma: f64,
    low: &[f64],
    high: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be ≥ 0, got {sigma}")));
    }
    if low.len() != mean.len() || high.len() != mean.len() {
        return Err(Error::ShapeMismatch("action bounds width".into()));
    }
    if sigma == 0.0 {
        return Ok(apply_noise(mean, &vec![0.0; mean.len()], low, high));
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    let noise: Vec<f64> = (0..mean.len()).map(|_| normal.sample(rng)).collect();
    Ok(apply_noise(mean, &noise, low, high))
}
