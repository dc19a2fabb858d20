//! Exact ground truth for tiny constrained MDPs.
//!
//! Policy evaluation is available two ways: [`value_iteration`] iterates the
//! Bellman operator, while [`evaluate_exact`] solves the linear system (or
//! runs backward induction for finite horizons). Enumeration over every
//! deterministic policy gives the constrained optimum that
//! [`tabular_primal_dual`] is checked against.

use crate::agents::{Horizon, SafetyBudget};
use crate::env::TabularCmdp;
use crate::error::{Error, Result};

/// Which per-step signal a value function accumulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    Reward,
    Indicator,
}

fn signal_of(cmdp: &TabularCmdp, s: usize, a: usize, signal: Signal) -> f64 {
    match signal {
        Signal::Reward => cmdp.reward(s, a),
        Signal::Indicator => cmdp.indicator(s, a),
    }
}

/// Deterministic tabular policy: one action per state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TabularPolicy(pub Vec<usize>);

impl TabularPolicy {
    pub fn validate(&self, cmdp: &TabularCmdp) -> Result<()> {
        if self.0.len() != cmdp.n_states() {
            return Err(Error::ShapeMismatch(format!(
                "policy covers {} states, CMDP has {}",
                self.0.len(),
                cmdp.n_states()
            )));
        }
        if let Some(&a) = self.0.iter().find(|&&a| a >= cmdp.n_actions()) {
            return Err(Error::InvalidArgument(format!("action {a} out of range")));
        }
        Ok(())
    }

    /// Row-major `S × A` one-hot action probabilities.
    pub fn to_probabilities(&self, n_actions: usize) -> Vec<f64> {
        let mut probs = vec![0.0; self.0.len() * n_actions];
        for (s, &a) in self.0.iter().enumerate() {
            probs[s * n_actions + a] = 1.0;
        }
        probs
    }
}

impl std::fmt::Display for TabularPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        write!(f, "[{}]", parts.join(" "))
    }
}

fn expected_signal(cmdp: &TabularCmdp, probs: &[f64], signal: Signal) -> Vec<f64> {
    let na = cmdp.n_actions();
    (0..cmdp.n_states())
        .map(|s| {
            (0..na)
                .map(|a| probs[s * na + a] * signal_of(cmdp, s, a, signal))
                .sum()
        })
        .collect()
}

/// `Q(s, a) = signal(s, a) + discount · Σ P(s'|s,a) V(s')`, row-major.
fn q_from_v(cmdp: &TabularCmdp, v: &[f64], signal: Signal, discount: f64) -> Vec<f64> {
    let (ns, na) = (cmdp.n_states(), cmdp.n_actions());
    let mut q = vec![0.0; ns * na];
    for s in 0..ns {
        for a in 0..na {
            let next: f64 = cmdp
                .next_distribution(s, a)
                .iter()
                .zip(v)
                .map(|(p, v)| p * v)
                .sum();
            q[s * na + a] = signal_of(cmdp, s, a, signal) + discount * next;
        }
    }
    q
}

fn v_from_q(q: &[f64], probs: &[f64], ns: usize, na: usize) -> Vec<f64> {
    (0..ns)
        .map(|s| (0..na).map(|a| probs[s * na + a] * q[s * na + a]).sum())
        .collect()
}

fn check_probs(cmdp: &TabularCmdp, probs: &[f64]) -> Result<()> {
    if probs.len() != cmdp.n_states() * cmdp.n_actions() {
        return Err(Error::ShapeMismatch("policy probability table size".into()));
    }
    Ok(())
}

fn check_discount(discount: f64, horizon: Horizon) -> Result<()> {
    if !(0.0..=1.0).contains(&discount) {
        return Err(Error::InvalidArgument(format!(
            "discount must lie in [0, 1], got {discount}"
        )));
    }
    if horizon == Horizon::Infinite && discount >= 1.0 {
        return Err(Error::InvalidArgument(
            "infinite-horizon evaluation needs discount < 1".into(),
        ));
    }
    Ok(())
}

/// Evaluate a deterministic policy by repeated Bellman backups.
///
/// Infinite horizon: iterate to within `tol` of the fixed point in sup norm.
/// Finite horizon `T`: exact backward induction, returning the `T`-step
/// values from time 0.
pub fn value_iteration(
    cmdp: &TabularCmdp,
    policy: &TabularPolicy,
    signal: Signal,
    discount: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    policy.validate(cmdp)?;
    check_discount(discount, cmdp.horizon())?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let (ns, na) = (cmdp.n_states(), cmdp.n_actions());
    let probs = policy.to_probabilities(na);
    let mut v = vec![0.0; ns];
    match cmdp.horizon() {
        Horizon::Finite(t) => {
            for _ in 0..t {
                v = v_from_q(&q_from_v(cmdp, &v, signal, discount), &probs, ns, na);
            }
        }
        Horizon::Infinite => {
            // ‖V_{k+1} − V*‖ ≤ γ/(1−γ)·‖V_{k+1} − V_k‖.
            let stop = if discount > 0.0 {
                tol * (1.0 - discount) / discount
            } else {
                f64::INFINITY
            };
            loop {
                let next = v_from_q(&q_from_v(cmdp, &v, signal, discount), &probs, ns, na);
                let diff = next
                    .iter()
                    .zip(&v)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                v = next;
                if diff <= stop {
                    break;
                }
            }
        }
    }
    Ok(v)
}

/// Solve `A x = b` by Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Vec<f64> {
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .unwrap();
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            if f != 0.0 {
                for k in col..n {
                    a[row * n + k] -= f * a[col * n + k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row * n + k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row * n + row];
    }
    x
}

/// Exact value and action-value tables for a (possibly stochastic) policy.
#[derive(Debug, Clone)]
pub struct Evaluation {
    /// Values at time 0.
    pub values: Vec<f64>,
    /// Action values at time 0, row-major `S × A`.
    pub q: Vec<f64>,
    /// Action values averaged over the discounted visitation of each state
    /// (equal to `q` for an infinite horizon).
    pub visit_weighted_q: Vec<f64>,
    /// `Σ_s start(s) · V(s)`.
    pub start_value: f64,
}

/// Exact policy evaluation for a row-major `S × A` probability table.
pub fn evaluate_exact(
    cmdp: &TabularCmdp,
    probs: &[f64],
    signal: Signal,
    discount: f64,
) -> Result<Evaluation> {
    check_probs(cmdp, probs)?;
    check_discount(discount, cmdp.horizon())?;
    let (ns, na) = (cmdp.n_states(), cmdp.n_actions());
    let start = cmdp.start();
    let (values, q, visit_weighted_q) = match cmdp.horizon() {
        Horizon::Infinite => {
            let mut m = vec![0.0; ns * ns];
            for s in 0..ns {
                m[s * ns + s] += 1.0;
                for a in 0..na {
                    let p = probs[s * na + a];
                    if p == 0.0 {
                        continue;
                    }
                    for (s2, &pt) in cmdp.next_distribution(s, a).iter().enumerate() {
                        m[s * ns + s2] -= discount * p * pt;
                    }
                }
            }
            let v = solve_dense(m, expected_signal(cmdp, probs, signal), ns);
            let q = q_from_v(cmdp, &v, signal, discount);
            (v, q.clone(), q)
        }
        Horizon::Finite(t) => {
            // q_to_go[k] holds Q with k + 1 steps remaining.
            let mut q_to_go = Vec::with_capacity(t);
            let mut v = vec![0.0; ns];
            for _ in 0..t {
                let q = q_from_v(cmdp, &v, signal, discount);
                v = v_from_q(&q, probs, ns, na);
                q_to_go.push(q);
            }
            let mut weight = vec![0.0; ns];
            let mut acc = vec![0.0; ns * na];
            let mut dist = start.to_vec();
            let mut disc = 1.0;
            for step in 0..t {
                let q = &q_to_go[t - 1 - step];
                for s in 0..ns {
                    let w = disc * dist[s];
                    weight[s] += w;
                    for a in 0..na {
                        acc[s * na + a] += w * q[s * na + a];
                    }
                }
                let mut next = vec![0.0; ns];
                for s in 0..ns {
                    for a in 0..na {
                        let p = dist[s] * probs[s * na + a];
                        if p == 0.0 {
                            continue;
                        }
                        for (s2, &pt) in cmdp.next_distribution(s, a).iter().enumerate() {
                            next[s2] += p * pt;
                        }
                    }
                }
                dist = next;
                disc *= discount;
            }
            let q0 = q_to_go.last().cloned().unwrap_or_else(|| vec![0.0; ns * na]);
            let weighted = (0..ns * na)
                .map(|i| {
                    let s = i / na;
                    if weight[s] > 0.0 {
                        acc[i] / weight[s]
                    } else {
                        q0[i]
                    }
                })
                .collect();
            (v, q0, weighted)
        }
    };
    let start_value = start.iter().zip(&values).map(|(p, v)| p * v).sum();
    Ok(Evaluation {
        values,
        q,
        visit_weighted_q,
        start_value,
    })
}

fn start_values(
    cmdp: &TabularCmdp,
    probs: &[f64],
    discount: f64,
    gamma_bar: f64,
) -> Result<(f64, f64)> {
    let vr = evaluate_exact(cmdp, probs, Signal::Reward, discount)?.start_value;
    let vi = evaluate_exact(cmdp, probs, Signal::Indicator, gamma_bar)?.start_value;
    Ok((vr, vi))
}

/// Literal average `(1/T) Σ_{k=0}^{T−1} (1−δ)(1−γ̄^{T−k})/(1−γ̄)`.
pub fn gamma_finite_sum(delta: f64, gamma_bar: f64, horizon: usize) -> f64 {
    let t = horizon as i32;
    let total: f64 = (0..t)
        .map(|k| (1.0 - delta) * (1.0 - gamma_bar.powi(t - k)) / (1.0 - gamma_bar))
        .sum();
    total / horizon as f64
}

/// Slack when comparing an indicator value against Γ.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// Largest number of deterministic policies [`constrained_optimum`] will scan.
pub const ENUMERATION_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPolicy {
    pub policy: TabularPolicy,
    pub reward_value: f64,
    pub indicator_value: f64,
}

/// Result of exhaustive search over deterministic policies.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    /// Highest-reward policy meeting the constraint, if any does.
    pub constrained: Option<ScoredPolicy>,
    /// Highest-reward policy ignoring the constraint.
    pub unconstrained: ScoredPolicy,
    pub gamma_threshold: f64,
    pub policies_scanned: usize,
}

impl OracleSolution {
    pub fn feasible(&self) -> bool {
        self.constrained.is_some()
    }
}

fn for_each_policy(
    ns: usize,
    na: usize,
    mut f: impl FnMut(&TabularPolicy) -> Result<()>,
) -> Result<usize> {
    let mut policy = TabularPolicy(vec![0; ns]);
    let mut count = 0;
    loop {
        f(&policy)?;
        count += 1;
        let mut i = 0;
        loop {
            if i == ns {
                return Ok(count);
            }
            policy.0[i] += 1;
            if policy.0[i] < na {
                break;
            }
            policy.0[i] = 0;
            i += 1;
        }
    }
}

/// Solve `max V_R s.t. V_I ≥ Γ` at the start distribution by enumeration.
///
/// `V_R` uses `discount`; `V_I` uses the budget's `gamma_bar`. Both use the
/// CMDP's own horizon. Ties keep the first policy in enumeration order.
pub fn constrained_optimum(
    cmdp: &TabularCmdp,
    budget: &SafetyBudget,
    discount: f64,
) -> Result<OracleSolution> {
    let (ns, na) = (cmdp.n_states(), cmdp.n_actions());
    if (na as f64).powi(ns as i32) > ENUMERATION_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "{na}^{ns} deterministic policies exceed the enumeration limit of {ENUMERATION_LIMIT}"
        )));
    }
    let gamma = budget.gamma_threshold;
    let mut best: Option<ScoredPolicy> = None;
    let mut best_free: Option<ScoredPolicy> = None;
    let scanned = for_each_policy(ns, na, |p| {
        let (vr, vi) = start_values(cmdp, &p.to_probabilities(na), discount, budget.gamma_bar)?;
        let scored = || ScoredPolicy {
            policy: p.clone(),
            reward_value: vr,
            indicator_value: vi,
        };
        if best_free.as_ref().is_none_or(|b| vr > b.reward_value) {
            best_free = Some(scored());
        }
        if vi >= gamma - FEASIBILITY_TOL && best.as_ref().is_none_or(|b| vr > b.reward_value) {
            best = Some(scored());
        }
        Ok(())
    })?;
    Ok(OracleSolution {
        constrained: best,
        unconstrained: best_free.expect("at least one policy is enumerated"),
        gamma_threshold: gamma,
        policies_scanned: scanned,
    })
}

/// Step sizes and iteration budget for [`tabular_primal_dual`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimalDualConfig {
    pub policy_lr: f64,
    pub lambda_lr: f64,
    pub iterations: usize,
}

impl Default for PrimalDualConfig {
    fn default() -> Self {
        PrimalDualConfig {
            policy_lr: 0.5,
            lambda_lr: 0.05,
            iterations: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDualResult {
    /// Best feasible greedy policy encountered, if any.
    pub recovered: Option<ScoredPolicy>,
    /// Greedy policy of the final iterate.
    pub final_greedy: TabularPolicy,
    /// Multiplier after every iteration.
    pub lambda_trace: Vec<f64>,
}

impl PrimalDualResult {
    pub fn feasible(&self) -> bool {
        self.recovered.is_some()
    }

    /// True when the multiplier never decreased and ended above zero: the
    /// signature of a constraint no iterate could satisfy.
    pub fn lambda_diverging(&self) -> bool {
        self.lambda_trace.windows(2).all(|w| w[1] > w[0])
            && self.lambda_trace.last().is_some_and(|&l| l > 0.0)
    }
}

fn softmax_rows(logits: &[f64], ns: usize, na: usize) -> Vec<f64> {
    let mut probs = vec![0.0; ns * na];
    for s in 0..ns {
        let row = &logits[s * na..(s + 1) * na];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = row.iter().map(|l| (l - m).exp()).sum();
        for a in 0..na {
            probs[s * na + a] = (row[a] - m).exp() / z;
        }
    }
    probs
}

fn greedy(logits: &[f64], ns: usize, na: usize) -> TabularPolicy {
    TabularPolicy(
        (0..ns)
            .map(|s| {
                let row = &logits[s * na..(s + 1) * na];
                // First maximiser, so ties resolve deterministically.
                let mut best = 0;
                for a in 1..na {
                    if row[a] > row[best] {
                        best = a;
                    }
                }
                best
            })
            .collect(),
    )
}

fn advantages(eval: &Evaluation, probs: &[f64], ns: usize, na: usize) -> Vec<f64> {
    let g = &eval.visit_weighted_q;
    let mut adv = vec![0.0; ns * na];
    for s in 0..ns {
        let base: f64 = (0..na).map(|a| probs[s * na + a] * g[s * na + a]).sum();
        for a in 0..na {
            adv[s * na + a] = g[s * na + a] - base;
        }
    }
    adv
}

/// Stochastic primal-dual optimisation of the constrained problem with exact
/// tabular action values.
///
/// The primal variables are softmax logits updated along the Lagrangian
/// advantage `A_R + λ·A_I` (the natural-gradient direction for softmax
/// policies); the dual step is `λ ← [λ + η_λ(Γ − V_I)]⁺` with `V_I` evaluated
/// after the primal step. Every iterate's greedy policy is scored exactly and
/// the best feasible one is reported.
pub fn tabular_primal_dual(
    cmdp: &TabularCmdp,
    budget: &SafetyBudget,
    discount: f64,
    config: &PrimalDualConfig,
) -> Result<PrimalDualResult> {
    if !(config.policy_lr > 0.0 && config.lambda_lr > 0.0) {
        return Err(Error::InvalidArgument("learning rates must be positive".into()));
    }
    let (ns, na) = (cmdp.n_states(), cmdp.n_actions());
    let mut logits = vec![0.0; ns * na];
    let mut lambda = 0.0;
    let mut trace = Vec::with_capacity(config.iterations);
    let mut recovered: Option<ScoredPolicy> = None;
    let mut last_greedy: Option<TabularPolicy> = None;

    for _ in 0..config.iterations {
        let probs = softmax_rows(&logits, ns, na);
        let er = evaluate_exact(cmdp, &probs, Signal::Reward, discount)?;
        let ei = evaluate_exact(cmdp, &probs, Signal::Indicator, budget.gamma_bar)?;
        let ar = advantages(&er, &probs, ns, na);
        let ai = advantages(&ei, &probs, ns, na);
        for i in 0..ns * na {
            logits[i] += config.policy_lr * (ar[i] + lambda * ai[i]);
        }

        let probs = softmax_rows(&logits, ns, na);
        let vi = evaluate_exact(cmdp, &probs, Signal::Indicator, budget.gamma_bar)?.start_value;
        lambda = (lambda + config.lambda_lr * (budget.gamma_threshold - vi)).max(0.0);
        trace.push(lambda);

        let g = greedy(&logits, ns, na);
        if last_greedy.as_ref() != Some(&g) {
            let (vr, vi) = start_values(cmdp, &g.to_probabilities(na), discount, budget.gamma_bar)?;
            let better = recovered.as_ref().is_none_or(|r| vr > r.reward_value);
            if vi >= budget.gamma_threshold - FEASIBILITY_TOL && better {
                recovered = Some(ScoredPolicy {
                    policy: g.clone(),
                    reward_value: vr,
                    indicator_value: vi,
                });
            }
            last_greedy = Some(g);
        }
    }
    Ok(PrimalDualResult {
        recovered,
        final_greedy: greedy(&logits, ns, na),
        lambda_trace: trace,
    })
}
