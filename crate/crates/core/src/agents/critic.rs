use ndarray::{concatenate, s, Array1, Array2, Axis};

use super::ops::{bc_distance, critic_targets, polyak_update};
use crate::error::{Error, Result};
use crate::nn::{Activation, Adam, Mlp, Optimizer};

/// Anything that scores `(state, action)` pairs and can differentiate the
/// score with respect to the action.
pub trait ActionValue {
    fn q_values(&self, states: &Array2<f64>, actions: &Array2<f64>) -> Result<Array1<f64>>;

    /// Values and `∂Q/∂a`, one row per pair.
    fn q_and_action_grad(
        &self,
        states: &Array2<f64>,
        actions: &Array2<f64>,
    ) -> Result<(Array1<f64>, Array2<f64>)>;
}

/// `Q(s, a)` as an MLP over the concatenated `[s, a]` row.
#[derive(Debug, Clone, PartialEq)]
pub struct Critic {
    pub net: Mlp,
    state_dim: usize,
}

impl Critic {
    pub fn new(layer_sizes: &[usize], state_dim: usize, seed: u64) -> Result<Self> {
        let net = Mlp::new(layer_sizes, Activation::Identity, seed)?;
        Critic::from_net(net, state_dim)
    }

    pub fn from_net(net: Mlp, state_dim: usize) -> Result<Self> {
        if net.output_dim() != 1 || net.output_activation() != Activation::Identity {
            return Err(Error::ShapeMismatch(
                "critic must have one identity output".into(),
            ));
        }
        if net.input_dim() <= state_dim {
            return Err(Error::ShapeMismatch("critic input leaves no room for the action".into()));
        }
        Ok(Critic { net, state_dim })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.net.input_dim() - self.state_dim
    }

    fn join(&self, states: &Array2<f64>, actions: &Array2<f64>) -> Result<Array2<f64>> {
        if states.ncols() != self.state_dim || actions.ncols() != self.action_dim() {
            return Err(Error::ShapeMismatch(format!(
                "critic expects ({}, {}) columns, got ({}, {})",
                self.state_dim,
                self.action_dim(),
                states.ncols(),
                actions.ncols()
            )));
        }
        concatenate(Axis(1), &[states.view(), actions.view()])
            .map_err(|e| Error::ShapeMismatch(e.to_string()))
    }
}

impl ActionValue for Critic {
    fn q_values(&self, states: &Array2<f64>, actions: &Array2<f64>) -> Result<Array1<f64>> {
        let out = self.net.predict(&self.join(states, actions)?)?;
        Ok(out.column(0).to_owned())
    }

    fn q_and_action_grad(
        &self,
        states: &Array2<f64>,
        actions: &Array2<f64>,
    ) -> Result<(Array1<f64>, Array2<f64>)> {
        let (out, cache) = self.net.forward(&self.join(states, actions)?)?;
        let ones = Array2::ones(out.raw_dim());
        let (_, input_grad) = self.net.backward(&cache, &ones)?;
        let grad = input_grad.slice(s![.., self.state_dim..]).to_owned();
        Ok((out.column(0).to_owned(), grad))
    }
}

/// One optimizer step of mean-squared regression of `critic` onto `targets`.
/// Returns the pre-step loss.
pub fn critic_update(
    critic: &mut Critic,
    opt: &mut dyn Optimizer,
    states: &Array2<f64>,
    actions: &Array2<f64>,
    targets: &Array1<f64>,
) -> Result<f64> {
    let n = targets.len();
    if n == 0 || states.nrows() != n || actions.nrows() != n {
        return Err(Error::ShapeMismatch("critic batch rows disagree".into()));
    }
    let input = critic.join(states, actions)?;
    let (out, cache) = critic.net.forward(&input)?;
    let residual = &out.column(0) - targets;
    let loss = residual.mapv(|r| r * r).sum() / n as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite("critic loss".into()));
    }
    let grad_out = (residual * (2.0 / n as f64)).insert_axis(Axis(1));
    let (grads, _) = critic.net.backward(&cache, &grad_out)?;
    opt.step(&mut critic.net, &grads)?;
    Ok(loss)
}

/// Deterministic policy gradient ascent on `mean_s Q(s, actor(s))`.
/// Returns the pre-step objective.
pub fn dpg_actor_step(
    actor: &mut Mlp,
    opt: &mut dyn Optimizer,
    critic: &dyn ActionValue,
    states: &Array2<f64>,
) -> Result<f64> {
    let n = states.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("empty state batch".into()));
    }
    let (actions, cache) = actor.forward(states)?;
    let (q, dq_da) = critic.q_and_action_grad(states, &actions)?;
    let objective = q.mean().unwrap();
    if !objective.is_finite() {
        return Err(Error::NonFinite("actor objective".into()));
    }
    // Descend on −objective.
    let grad_out = dq_da * (-1.0 / n as f64);
    let (grads, _) = actor.backward(&cache, &grad_out)?;
    opt.step(actor, &grads)?;
    Ok(objective)
}

/// Primal step on `D̄(φ) − λ·mean_s Q(s, actor(s))`, where `D̄` is the
/// behaviour-cloning distance to `baseline_actions`.
///
/// Returns the pre-step `D̄` and the pre-step mean of `critic`.
pub fn safe_actor_step(
    actor: &mut Mlp,
    opt: &mut dyn Optimizer,
    critic: &dyn ActionValue,
    baseline_actions: &Array2<f64>,
    lambda: f64,
    states: &Array2<f64>,
) -> Result<(f64, f64)> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be ≥ 0, got {lambda}")));
    }
    let n = states.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("empty state batch".into()));
    }
    let (actions, cache) = actor.forward(states)?;
    let d_bar = bc_distance(&actions, baseline_actions)?;
    let (q, dq_da) = critic.q_and_action_grad(states, &actions)?;
    let q_mean = q.mean().unwrap();
    if !(d_bar.is_finite() && q_mean.is_finite()) {
        return Err(Error::NonFinite("safe actor objective".into()));
    }
    let grad_out = ((&actions - baseline_actions) * 2.0 - dq_da * lambda) / n as f64;
    let (grads, _) = actor.backward(&cache, &grad_out)?;
    opt.step(actor, &grads)?;
    Ok((d_bar, q_mean))
}

/// Two online critics, their targets, and their optimizers.
#[derive(Debug, Clone)]
pub struct TwinCritics {
    pub online: [Critic; 2],
    pub target: [Critic; 2],
    opt: [Adam; 2],
}

impl TwinCritics {
    pub fn new(layer_sizes: &[usize], state_dim: usize, lr: f64, seeds: [u64; 2]) -> Result<Self> {
        let c1 = Critic::new(layer_sizes, state_dim, seeds[0])?;
        let c2 = Critic::new(layer_sizes, state_dim, seeds[1])?;
        Ok(Self::from_critics([c1, c2], None, lr))
    }

    pub fn from_critics(online: [Critic; 2], target: Option<[Critic; 2]>, lr: f64) -> Self {
        let opt = [Adam::new(&online[0].net, lr), Adam::new(&online[1].net, lr)];
        let target = target.unwrap_or_else(|| online.clone());
        TwinCritics { online, target, opt }
    }

    /// Clipped double-Q targets from the target critics.
    pub fn bootstrap_targets(
        &self,
        signals: &Array1<f64>,
        discount: f64,
        next_states: &Array2<f64>,
        next_actions: &Array2<f64>,
        terminals: &[bool],
    ) -> Result<Array1<f64>> {
        let q1 = self.target[0].q_values(next_states, next_actions)?;
        let q2 = self.target[1].q_values(next_states, next_actions)?;
        critic_targets(signals, discount, &q1, &q2, terminals)
    }

    /// Regress both online critics onto `targets`; returns both pre-step losses.
    pub fn update(
        &mut self,
        states: &Array2<f64>,
        actions: &Array2<f64>,
        targets: &Array1<f64>,
    ) -> Result<(f64, f64)> {
        let [c1, c2] = &mut self.online;
        let [o1, o2] = &mut self.opt;
        let l1 = critic_update(c1, o1, states, actions, targets)?;
        let l2 = critic_update(c2, o2, states, actions, targets)?;
        Ok((l1, l2))
    }

    /// Elementwise minimum of the two online critics.
    pub fn min_q(&self, states: &Array2<f64>, actions: &Array2<f64>) -> Result<Array1<f64>> {
        let q1 = self.online[0].q_values(states, actions)?;
        let q2 = self.online[1].q_values(states, actions)?;
        Ok(ndarray::Zip::from(&q1).and(&q2).map_collect(|a, b| a.min(*b)))
    }

    pub fn soft_update(&mut self, tau: f64) -> Result<()> {
        for (t, o) in self.target.iter_mut().zip(&self.online) {
            polyak_update(&mut t.net, &o.net, tau)?;
        }
        Ok(())
    }
}
