//! End-to-end acceptance checks, one printed PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (no libtest harness) so the lines always reach
//! stdout. `ACCEPTANCE_ONLY=1,3,7` restricts the run to some criteria.
//! The training criteria (4 and 5) take several minutes in release mode.

use std::time::{Duration, Instant};

use dualsafe::agents::{
    bc_distance, compute_gamma_threshold, critic_target, lambda_update, polyak_update, Horizon,
    SafetyBudget,
};
use dualsafe::env::TabularCmdp;
use dualsafe::nn::{grad_check, random_grad_check_suite, Activation, Mlp};
use dualsafe::oracle::{constrained_optimum, gamma_finite_sum, tabular_primal_dual, PrimalDualConfig};
use dualsafe::trainer::{
    evaluate, metrics_text, train, AgentCheckpoint, BaselineMode, BaselinePolicy, MetricsRow,
    RandomPolicy, ScriptedController, TrainConfig, TrainOutcome,
};
use ndarray::{array, Array2};

const SEEDS: [u64; 3] = [0, 1, 2];
const FINAL_EVAL_EPISODES: usize = 20;
const FINAL_EVAL_SEED: u64 = 777;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn config(text: &str, seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig::parse_text(text, Some(seed)).expect("shipped config parses");
    cfg.metrics_path = None;
    cfg.checkpoint_path = None;
    cfg
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}

// 1. Threshold closed form against the explicit sum.
fn threshold_math() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut inf_exact = true;
    for delta in [0.0, 0.05, 0.5, 1.0] {
        for gamma_bar in [0.0, 0.5, 0.9, 0.99] {
            for t in [1, 2, 50, 500, 1000] {
                let closed = compute_gamma_threshold(delta, gamma_bar, Horizon::Finite(t)).unwrap();
                worst = worst.max((closed - gamma_finite_sum(delta, gamma_bar, t)).abs());
            }
            let inf = compute_gamma_threshold(delta, gamma_bar, Horizon::Infinite).unwrap();
            inf_exact &= inf == (1.0 - delta) / (1.0 - gamma_bar);
        }
    }
    outcome(
        worst < 1e-9 && inf_exact,
        format!("max |closed - sum| = {worst:.2e} (< 1e-9); infinite horizon exact: {inf_exact}"),
    )
}

// 2. Backpropagation against central differences.
fn gradients() -> Outcome {
    let random = random_grad_check_suite(2024, 100, 1e-5, false);
    let mut largest: f64 = 0.0;
    for act in [Activation::Tanh, Activation::Identity] {
        let net = Mlp::new(&[16, 16, 16, 4], act, 11).unwrap();
        let x = Array2::from_shape_fn((3, 16), |(i, j)| ((i * 16 + j) as f64 * 0.37).sin());
        largest = largest.max(grad_check(&net, &x, 1e-5));
    }
    outcome(
        random < 1e-4 && largest < 1e-4,
        format!("100 random nets: {random:.2e}; (16,16,16,4) tanh/identity: {largest:.2e} (< 1e-4)"),
    )
}

// 3. Tabular primal-dual against exhaustive enumeration.
fn tabular() -> Outcome {
    let load = |name: &str| -> TabularCmdp {
        let path = format!("{}/data/cmdp/{name}", env!("CARGO_MANIFEST_DIR"));
        std::fs::read_to_string(path).unwrap().parse().unwrap()
    };
    let pd_cfg = PrimalDualConfig::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["two_state.cmdp", "speedway.cmdp", "no_cost.cmdp"] {
        let cmdp = load(name);
        let budget = SafetyBudget::new(0.1, 0.5, cmdp.horizon()).unwrap();
        let oracle = constrained_optimum(&cmdp, &budget, 0.9).unwrap();
        let pd = tabular_primal_dual(&cmdp, &budget, 0.9, &pd_cfg).unwrap();
        let (Some(best), Some(found)) = (&oracle.constrained, &pd.recovered) else {
            pass = false;
            parts.push(format!("{name}: no feasible policy"));
            continue;
        };
        let feasible = found.indicator_value >= oracle.gamma_threshold - 1e-6;
        let rel = (found.reward_value - best.reward_value).abs() / best.reward_value.abs();
        let mut ok = feasible && rel <= 0.02;
        if name == "no_cost.cmdp" {
            let lambda_zero = pd.lambda_trace.iter().all(|&l| l == 0.0);
            ok &= lambda_zero && found.policy == oracle.unconstrained.policy;
            parts.push(format!("{name}: unconstrained optimum recovered, lambda always 0: {lambda_zero}"));
        } else {
            parts.push(format!("{name}: V_R gap {rel:.1e}, feasible {feasible}"));
        }
        pass &= ok;
    }
    let infeasible = load("infeasible.cmdp");
    let budget = SafetyBudget::new(0.1, 0.5, infeasible.horizon()).unwrap();
    let flagged = !constrained_optimum(&infeasible, &budget, 0.9).unwrap().feasible()
        && tabular_primal_dual(&infeasible, &budget, 0.9, &pd_cfg).unwrap().lambda_diverging();
    parts.push(format!("infeasible.cmdp flagged: {flagged}"));
    outcome(pass && flagged, parts.join("; "))
}

struct SeedRun {
    outcome: TrainOutcome,
    metrics: String,
    final_safe: dualsafe::trainer::EvalReport,
    final_baseline: dualsafe::trainer::EvalReport,
}

fn run_seed(cfg: TrainConfig) -> SeedRun {
    let outcome = train(cfg, |_| {}).expect("training run");
    let metrics = metrics_text(outcome.trainer.config(), &outcome.rows);
    let mut outcome = outcome;
    let final_safe = outcome
        .trainer
        .evaluate_safe(FINAL_EVAL_EPISODES, FINAL_EVAL_SEED)
        .unwrap();
    let final_baseline = outcome
        .trainer
        .evaluate_baseline(FINAL_EVAL_EPISODES, FINAL_EVAL_SEED)
        .unwrap();
    SeedRun {
        outcome,
        metrics,
        final_safe,
        final_baseline,
    }
}

fn structural(run: &SeedRun) -> Result<(), String> {
    let c = run.outcome.trainer.counters();
    let rows: &[MetricsRow] = &run.outcome.rows;
    if rows[0].lambda != 0.0 || rows.iter().any(|r| r.lambda < 0.0) || run.outcome.trainer.lambda_min() < 0.0 {
        return Err("lambda went negative or did not start at 0".into());
    }
    if c.buffer_pushes != c.env_steps || run.outcome.trainer.buffer().total_pushes() != c.env_steps {
        return Err(format!("{} pushes for {} steps", c.buffer_pushes, c.env_steps));
    }
    let n = c.coin_flips as f64;
    let z = (c.baseline_selections as f64 - n / 2.0) / (n / 4.0).sqrt();
    if z.abs() > 4.0 {
        return Err(format!("coin flips {} of {} (z = {z:.2})", c.baseline_selections, c.coin_flips));
    }
    Ok(())
}

// 4. Learnable baseline and safe agent co-trained on the corridor.
fn corridor(runs: &mut Vec<SeedRun>) -> Outcome {
    let start = Instant::now();
    let text = include_str!("../configs/corridor.cfg");
    let mut random_returns = Vec::new();
    for seed in SEEDS {
        let cfg = config(text, seed);
        assert!(cfg.total_steps <= 300_000);
        let mut env = cfg.env_config().unwrap().build().unwrap();
        let mut random = RandomPolicy::new(env.action_dim(), seed);
        random_returns.push(
            evaluate(&mut random, env.as_mut(), FINAL_EVAL_EPISODES, FINAL_EVAL_SEED)
                .unwrap()
                .mean_return,
        );
        runs.push(run_seed(cfg));
    }
    let elapsed = start.elapsed();
    let base_viol = mean(runs.iter().map(|r| r.final_baseline.violation_rate));
    let safe_viol = mean(runs.iter().map(|r| r.final_safe.violation_rate));
    let base_ret = mean(runs.iter().map(|r| r.final_baseline.mean_return));
    let safe_ret = mean(runs.iter().map(|r| r.final_safe.mean_return));
    let rand_ret = mean(random_returns);
    let pass = base_viol > 0.5
        && safe_viol <= 0.05
        && safe_ret >= 0.25 * base_ret
        && safe_ret > 5.0 * rand_ret
        && elapsed < Duration::from_secs(30 * 60);
    outcome(
        pass,
        format!(
            "baseline violation {base_viol:.3} (> 0.5); safe violation {safe_viol:.3} (<= 0.05); \
             safe return {safe_ret:.1} vs baseline {base_ret:.1} (>= 25%) and random {rand_ret:.2} (> 5x); \
             {:.0} s (< 1800 s)",
            elapsed.as_secs_f64()
        ),
    )
}

// 5. Safe correction of a fixed scripted pusher.
fn pusher(runs: &mut Vec<SeedRun>) -> Outcome {
    let start = Instant::now();
    let text = include_str!("../configs/pusher.cfg");
    let mut untouched = true;
    let mut scripted_viol = Vec::new();
    let mut mine = Vec::new();
    for seed in SEEDS {
        let cfg = config(text, seed);
        assert!(cfg.total_steps <= 100_000);
        let env_cfg = cfg.env_config().unwrap();
        let BaselineMode::Scripted(name) = &cfg.baseline_mode else {
            panic!("pusher config must use a scripted baseline");
        };
        let reference = ScriptedController::new(name, &env_cfg).unwrap();
        let mut env = env_cfg.build().unwrap();
        let mut scripted = reference.clone();
        scripted_viol.push(
            evaluate(&mut scripted, env.as_mut(), FINAL_EVAL_EPISODES, FINAL_EVAL_SEED)
                .unwrap()
                .violation_rate,
        );
        let run = run_seed(cfg);
        untouched &= run.outcome.trainer.counters().baseline_updates == 0
            && matches!(run.outcome.trainer.baseline(), BaselinePolicy::Scripted(c) if *c == reference);
        mine.push(run);
    }
    let elapsed = start.elapsed();
    let success = mean(mine.iter().map(|r| r.final_safe.success_rate.unwrap()));
    let goal = mean(mine.iter().map(|r| r.final_safe.goal_rate.unwrap()));
    let safe_viol = mean(mine.iter().map(|r| r.final_safe.violation_rate));
    runs.extend(mine);
    let base_viol = mean(scripted_viol);
    let pass = success >= 0.5
        && safe_viol <= 0.05
        && base_viol >= 0.25
        && untouched
        && elapsed < Duration::from_secs(15 * 60);
    outcome(
        pass,
        format!(
            "safe success {success:.2} (>= 0.5; goal reached {goal:.2}); safe violation {safe_viol:.3} (<= 0.05); \
             scripted violation {base_viol:.3} (>= 0.25); baseline untouched: {untouched}; {:.0} s (< 900 s)",
            elapsed.as_secs_f64()
        ),
    )
}

// 6. Loop invariants on the long runs, plus fixed-baseline and determinism checks.
fn invariants(runs: &[SeedRun]) -> Outcome {
    let mut problems = Vec::new();
    let long: Vec<&SeedRun> = runs
        .iter()
        .filter(|r| r.outcome.trainer.counters().env_steps >= 100_000)
        .collect();
    if long.is_empty() {
        problems.push("no 1e5-step run available (run criterion 4 or 5 too)".to_string());
    }
    for r in &long {
        if let Err(e) = structural(r) {
            problems.push(e);
        }
    }

    // Fixed baseline loaded from a checkpoint: no baseline updates, weights bit-identical.
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("baseline.ckpt");
    let mut cfg = config(include_str!("../configs/corridor.cfg"), 5);
    cfg.total_steps = 2_000;
    cfg.eval_every = 1_000;
    cfg.checkpoint_path = Some(ckpt.clone());
    train(cfg.clone(), |_| {}).unwrap();
    let before = AgentCheckpoint::load(&ckpt).unwrap().get("actor_B").unwrap().clone();
    cfg.checkpoint_path = None;
    cfg.baseline_mode = BaselineMode::Checkpoint(ckpt);
    let fixed = train(cfg.clone(), |_| {}).unwrap();
    if fixed.trainer.counters().baseline_updates != 0 || fixed.trainer.baseline().actor() != Some(&before) {
        problems.push("checkpoint baseline changed during training".into());
    }

    // Identical seeds, identical metrics bytes.
    if let Some(first) = runs.first() {
        let again = train(first.outcome.trainer.config().clone(), |_| {}).unwrap();
        if metrics_text(again.trainer.config(), &again.rows) != first.metrics {
            problems.push("rerun with the same seed produced different metrics".into());
        }
    }
    let coin = long
        .iter()
        .map(|r| {
            let c = r.outcome.trainer.counters();
            format!("{}/{}", c.baseline_selections, c.coin_flips)
        })
        .collect::<Vec<_>>()
        .join(", ");
    if problems.is_empty() {
        outcome(
            true,
            format!(
                "{} long runs: lambda >= 0 from 0, one push per step, coin flips {coin} within 4 sigma; \
                 fixed baseline untouched; rerun byte-identical",
                long.len()
            ),
        )
    } else {
        outcome(false, problems.join("; "))
    }
}

// 7. Scalar update rules on worked examples.
fn arithmetic() -> Outcome {
    let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
    let mut ok = Vec::new();
    ok.push(close(critic_target(1.0, 0.99, 10.0, 12.0, false), 10.9));
    ok.push(close(critic_target(0.0, 0.99, 0.0, 0.0, false), 0.0));
    ok.push(close(critic_target(1.0, 0.6, 2.0, 1.5, true), 1.0));
    ok.push(close(lambda_update(0.0, 9.5, 10.0, 0.001), 0.0));
    ok.push(close(lambda_update(0.5, 9.5, 5.0, 0.001), 0.5045));
    ok.push(close(lambda_update(0.0, 1.1875, 0.0, 0.001), 0.0011875));
    let a = array![[0.3, -0.2], [0.9, 0.1]];
    ok.push(close(bc_distance(&a, &a).unwrap(), 0.0));
    ok.push(close(bc_distance(&array![[1.0, 0.0]], &array![[0.0, 1.0]]).unwrap(), 2.0));
    ok.push(close(
        bc_distance(&array![[1.0, 0.0], [0.5, 0.5]], &array![[0.0, 1.0], [0.5, 0.5]]).unwrap(),
        1.0,
    ));
    let net = |w: f64| Mlp::from_parts(vec![array![[w]]], vec![array![w]], Activation::Identity).unwrap();
    let online = net(1.0);
    let mut t = net(0.0);
    polyak_update(&mut t, &online, 0.005).unwrap();
    ok.push(close(t.weights()[0][[0, 0]], 0.005) && close(t.biases()[0][0], 0.005));
    let mut t = net(0.0);
    polyak_update(&mut t, &online, 1.0).unwrap();
    ok.push(t == online);
    let mut t = net(0.0);
    polyak_update(&mut t, &online, 0.0).unwrap();
    ok.push(t == net(0.0));
    let passed = ok.iter().filter(|&&b| b).count();
    outcome(passed == ok.len(), format!("{passed}/{} worked examples within 1e-12", ok.len()))
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |n: u32| only.as_ref().is_none_or(|o| o.contains(&n));

    let mut lines = Vec::new();
    let mut report = |n: u32, name: &str, f: &mut dyn FnMut() -> Outcome| {
        if !wanted(n) {
            return;
        }
        let start = Instant::now();
        let o = f();
        let line = format!(
            "{} criterion {n} ({name}): {} [{:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
        println!("{line}");
        lines.push((o.pass, line));
    };

    let mut runs = Vec::new();
    report(1, "safety threshold", &mut threshold_math);
    report(2, "gradients", &mut gradients);
    report(3, "tabular primal-dual vs oracle", &mut tabular);
    report(7, "update arithmetic", &mut arithmetic);
    report(4, "corridor co-training", &mut || corridor(&mut runs));
    report(5, "pusher correction", &mut || pusher(&mut runs));
    report(6, "loop invariants", &mut || invariants(&runs));

    println!();
    println!("acceptance summary:");
    for (_, line) in &lines {
        println!("  {line}");
    }
    let failed = lines.iter().filter(|(p, _)| !p).count();
    println!("{} passed, {failed} failed", lines.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
