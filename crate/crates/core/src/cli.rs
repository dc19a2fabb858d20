//! Command-line front end. [`run`] parses arguments, executes one
//! subcommand and returns the process exit code.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 numerical
//! divergence during training, 3 a check that ran but did not pass.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::agents::SafetyBudget;
use crate::env::TabularCmdp;
use crate::error::{Error, Result};
use crate::nn::checkpoint::write_atomic;
use crate::nn::random_grad_check_suite;
use crate::oracle::{constrained_optimum, tabular_primal_dual, PrimalDualConfig, ScoredPolicy};
use crate::trainer::{
    evaluate, train, ActorPolicy, AgentCheckpoint, EvalReport, TrainConfig, METRICS_HEADER,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

/// Environment variable consulted when no seed is given.
pub const SEED_ENV: &str = "DUALSAFE_SEED";

/// Relative reward tolerance for `oracle-check`.
pub const ORACLE_REWARD_TOL: f64 = 0.02;
/// Indicator-value slack for `oracle-check`.
pub const ORACLE_FEASIBILITY_TOL: f64 = 1e-6;
/// Pass threshold for `grad-check`.
pub const GRAD_CHECK_TOL: f64 = 1e-4;

#[derive(Parser, Debug)]
#[command(name = "dualsafe", version, about = "Dual-agent safe reinforcement learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a training job from a config file.
    Train {
        /// Config file of key=value lines.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override one key; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Suppress per-row progress output.
        #[arg(long)]
        quiet: bool,
    },
    /// Evaluate an actor from a checkpoint with noise-free rollouts.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value_t = Actor::Safe)]
        actor: Actor,
        #[arg(long, default_value = "corridor")]
        env: String,
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Override an `env.*` key; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Compare the tabular primal-dual solver with exhaustive enumeration.
    OracleCheck {
        cmdp: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 0.5)]
        gamma_bar: f64,
        /// Reward discount.
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
        #[arg(long, default_value_t = PrimalDualConfig::default().iterations)]
        iterations: usize,
        #[arg(long, default_value_t = PrimalDualConfig::default().policy_lr)]
        policy_lr: f64,
        #[arg(long, default_value_t = PrimalDualConfig::default().lambda_lr)]
        lambda_lr: f64,
    },
    /// Compare analytic and finite-difference gradients on random networks.
    GradCheck {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
        /// Corrupt one layer's analytic gradient (the check should then fail).
        #[arg(long)]
        corrupt: bool,
    },
    /// Extract one metrics column as a two-column (step, value) CSV.
    ExportPlot {
        metrics: PathBuf,
        #[arg(long)]
        column: String,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Actor {
    Safe,
    Baseline,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Divergence { .. } => EXIT_DIVERGED,
        _ => EXIT_USAGE,
    }
}

fn seed_from_env() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{SEED_ENV} must be an unsigned integer, got `{s}`"))),
        Err(_) => Ok(None),
    }
}

fn apply_overrides(cfg: &mut TrainConfig, overrides: &[String]) -> Result<()> {
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{o}`")))?;
        cfg.set(k, v)?;
    }
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Parse `args` (including the program name) and run the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if code == EXIT_OK {
                write!(out, "{e}")
            } else {
                write!(err, "{e}")
            };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Train {
            config,
            overrides,
            quiet,
        } => cmd_train(config.as_deref(), &overrides, quiet, out),
        Command::Evaluate {
            checkpoint,
            actor,
            env,
            episodes,
            seed,
            overrides,
        } => cmd_evaluate(&checkpoint, actor, &env, episodes, seed, &overrides, out),
        Command::OracleCheck {
            cmdp,
            delta,
            gamma_bar,
            gamma,
            iterations,
            policy_lr,
            lambda_lr,
        } => {
            let pd = PrimalDualConfig {
                policy_lr,
                lambda_lr,
                iterations,
            };
            cmd_oracle_check(&cmdp, delta, gamma_bar, gamma, &pd, out, err)
        }
        Command::GradCheck {
            seed,
            count,
            eps,
            corrupt,
        } => cmd_grad_check(seed, count, eps, corrupt, out),
        Command::ExportPlot {
            metrics,
            column,
            out: dest,
        } => cmd_export_plot(&metrics, &column, dest.as_deref(), out),
    }
}

fn w(out: &mut dyn Write, line: impl AsRef<str>) -> Result<()> {
    writeln!(out, "{}", line.as_ref()).map_err(|e| Error::io("<stdout>", e))
}

fn cmd_train(
    config: Option<&Path>,
    overrides: &[String],
    quiet: bool,
    out: &mut dyn Write,
) -> Result<i32> {
    let text = match config {
        Some(p) => read_text(p)?,
        None => String::new(),
    };
    let mut cfg = TrainConfig::parse_text(&text, seed_from_env()?)?;
    apply_overrides(&mut cfg, overrides)?;
    cfg.validate()?;
    if !quiet {
        w(out, METRICS_HEADER)?;
    }
    let mut write_err = None;
    let outcome = train(cfg, |row| {
        if !quiet {
            if let Err(e) = writeln!(out, "{}", row.to_csv()) {
                write_err.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = write_err {
        return Err(Error::io("<stdout>", e));
    }
    let c = outcome.trainer.counters();
    let cfg = outcome.trainer.config();
    w(
        out,
        format!(
            "# finished {} steps: {} baseline updates, {} safe updates, lambda={}",
            c.env_steps,
            c.baseline_updates,
            c.safe_updates,
            outcome.trainer.safe().lambda
        ),
    )?;
    if let Some(p) = &cfg.metrics_path {
        w(out, format!("# metrics: {}", p.display()))?;
    }
    if let Some(p) = &cfg.checkpoint_path {
        w(out, format!("# checkpoint: {}", p.display()))?;
    }
    Ok(EXIT_OK)
}

fn cmd_evaluate(
    checkpoint: &Path,
    actor: Actor,
    env: &str,
    episodes: usize,
    seed: Option<u64>,
    overrides: &[String],
    out: &mut dyn Write,
) -> Result<i32> {
    if episodes == 0 {
        return Err(Error::Config("--episodes must be at least 1".into()));
    }
    let mut cfg = TrainConfig::default();
    cfg.set("env", env)?;
    for o in overrides {
        if !o.starts_with("env.") {
            return Err(Error::Config(format!("evaluate only accepts env.* overrides, got `{o}`")));
        }
    }
    apply_overrides(&mut cfg, overrides)?;
    let seed = match seed {
        Some(s) => s,
        None => seed_from_env()?.unwrap_or(0),
    };
    let mut environment = cfg.env_config()?.build()?;
    let ck = AgentCheckpoint::load(checkpoint)?;
    let name = match actor {
        Actor::Safe => "actor_S",
        Actor::Baseline => "actor_B",
    };
    let net = ck
        .get(name)
        .ok_or_else(|| Error::Checkpoint(format!("checkpoint has no `{name}` network")))?;
    if net.input_dim() != environment.observation_dim() || net.output_dim() != environment.action_dim() {
        return Err(Error::ShapeMismatch(format!(
            "`{name}` maps {} → {}, env {env} needs {} → {}",
            net.input_dim(),
            net.output_dim(),
            environment.observation_dim(),
            environment.action_dim()
        )));
    }
    let report: EvalReport = evaluate(&mut ActorPolicy(net), environment.as_mut(), episodes, seed)?;
    w(out, EvalReport::CSV_HEADER)?;
    w(out, report.csv_row())?;
    Ok(EXIT_OK)
}

fn describe(p: &ScoredPolicy) -> String {
    format!(
        "{}  V_R={:.6}  V_I={:.6}",
        p.policy, p.reward_value, p.indicator_value
    )
}

fn cmd_oracle_check(
    path: &Path,
    delta: f64,
    gamma_bar: f64,
    gamma: f64,
    pd_config: &PrimalDualConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32> {
    let cmdp: TabularCmdp = read_text(path)?.parse()?;
    let budget = SafetyBudget::new(delta, gamma_bar, cmdp.horizon())?;
    let oracle = constrained_optimum(&cmdp, &budget, gamma)?;
    let pd = tabular_primal_dual(&cmdp, &budget, gamma, pd_config)?;
    let lambda = pd.lambda_trace.last().copied().unwrap_or(0.0);

    w(out, format!("Gamma            {:.6}", oracle.gamma_threshold))?;
    w(out, format!("unconstrained    {}", describe(&oracle.unconstrained)))?;
    w(
        out,
        format!(
            "oracle           {}",
            oracle.constrained.as_ref().map_or("infeasible".into(), describe)
        ),
    )?;
    w(
        out,
        format!(
            "primal-dual      {}",
            pd.recovered.as_ref().map_or("no feasible iterate".into(), describe)
        ),
    )?;
    w(out, format!("final lambda     {lambda:.6}"))?;

    let Some(best) = &oracle.constrained else {
        let growth = if pd.lambda_diverging() {
            "the multiplier grew at every iteration"
        } else {
            "the multiplier did not settle"
        };
        let _ = writeln!(
            err,
            "infeasible: no deterministic policy reaches V_I >= Gamma = {:.6} (best V_I {:.6}); {growth}",
            oracle.gamma_threshold,
            oracle.unconstrained.indicator_value.max(pd_best_vi(&pd))
        );
        return Ok(EXIT_CHECK_FAILED);
    };
    let Some(found) = &pd.recovered else {
        let _ = writeln!(err, "primal-dual found no feasible policy in {} iterations", pd_config.iterations);
        return Ok(EXIT_CHECK_FAILED);
    };
    let feasible = found.indicator_value >= oracle.gamma_threshold - ORACLE_FEASIBILITY_TOL;
    let gap = (found.reward_value - best.reward_value).abs();
    let close = gap <= ORACLE_REWARD_TOL * best.reward_value.abs() + 1e-12;
    if feasible && close {
        w(out, "match")?;
        Ok(EXIT_OK)
    } else {
        let _ = writeln!(
            err,
            "mismatch: primal-dual V_R {:.6} vs oracle {:.6} (gap {gap:.3e}), feasible={feasible}",
            found.reward_value, best.reward_value
        );
        Ok(EXIT_CHECK_FAILED)
    }
}

fn pd_best_vi(pd: &crate::oracle::PrimalDualResult) -> f64 {
    pd.recovered.as_ref().map_or(f64::NEG_INFINITY, |r| r.indicator_value)
}

fn cmd_grad_check(
    seed: Option<u64>,
    count: usize,
    eps: f64,
    corrupt: bool,
    out: &mut dyn Write,
) -> Result<i32> {
    let seed = match seed {
        Some(s) => s,
        None => seed_from_env()?.unwrap_or(0),
    };
    if count == 0 || !(eps > 0.0) {
        return Err(Error::Config("--count and --eps must be positive".into()));
    }
    let max_err = random_grad_check_suite(seed, count, eps, corrupt);
    w(out, format!("max relative error {max_err:e} over {count} networks (seed {seed})"))?;
    Ok(if max_err < GRAD_CHECK_TOL {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}

fn cmd_export_plot(
    metrics: &Path,
    column: &str,
    dest: Option<&Path>,
    out: &mut dyn Write,
) -> Result<i32> {
    let text = read_text(metrics)?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Config(format!("{} has no header row", metrics.display())))?
        .split(',')
        .collect();
    let step_col = header
        .iter()
        .position(|&h| h == "step")
        .ok_or_else(|| Error::Config("metrics file has no `step` column".into()))?;
    let col = header.iter().position(|&h| h == column).ok_or_else(|| {
        let valid: Vec<&str> = header.iter().copied().filter(|&h| h != "step").collect();
        Error::Config(format!(
            "unknown column `{column}`; valid columns: {}",
            valid.join(", ")
        ))
    })?;
    let mut csv = format!("step,{column}\n");
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(Error::Config(format!("row {} has {} fields, header has {}", i + 1, fields.len(), header.len())));
        }
        if !fields[col].is_empty() {
            csv.push_str(&format!("{},{}\n", fields[step_col], fields[col]));
        }
    }
    match dest {
        Some(p) => write_atomic(p, csv.as_bytes())?,
        None => out.write_all(csv.as_bytes()).map_err(|e| Error::io("<stdout>", e))?,
    }
    Ok(EXIT_OK)
}
