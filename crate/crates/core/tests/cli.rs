use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dualsafe"));
    c.env_remove("DUALSAFE_SEED");
    c
}

fn cmdp(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/cmdp").join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const TINY: &str = "\
env=corridor
total_steps=200
warmup_steps=50
batch_size=8
buffer_capacity=1000
actor_hidden=8
critic_hidden=8
eval_every=100
eval_episodes=1
env.corridor.horizon=50
";

/// Write the tiny config into `dir` with output paths inside it.
fn tiny_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("run.cfg");
    let text = format!(
        "{TINY}metrics_path={}\ncheckpoint_path={}\n{extra}",
        dir.join("metrics.csv").display(),
        dir.join("agents.ckpt").display()
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn train(dir: &Path, extra: &str, args: &[&str]) -> Output {
    let cfg = tiny_config(dir, extra);
    bin()
        .arg("train")
        .arg("--quiet")
        .arg("--config")
        .arg(&cfg)
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn train_writes_metrics_and_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let o = train(dir.path(), "", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert!(metrics.lines().any(|l| l.starts_with("step,mode,")));
    assert!(metrics.contains("# delta=0.05\n"));
    assert!(dir.path().join("agents.ckpt").exists());
}

#[test]
fn bad_delta_is_config_error_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = train(dir.path(), "", &["--set", "delta=1.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("delta"), "{}", stderr(&o));
    assert!(!dir.path().join("metrics.csv").exists());
    assert!(!dir.path().join("agents.ckpt").exists());
}

#[test]
fn unknown_key_and_missing_file_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = train(dir.path(), "learning_rate=0.1\n", &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("learning_rate"));
    let o = bin()
        .args(["train", "--config"])
        .arg(dir.path().join("nope.cfg"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_baseline_checkpoint_fails_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let o = train(dir.path(), "", &["--set", "baseline_mode=checkpoint:missing.ckpt"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.ckpt"), "{}", stderr(&o));
    assert!(!dir.path().join("metrics.csv").exists());
}

#[test]
fn seed_env_var_is_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: Option<&str>, sub: &str| {
        let d = dir.path().join(sub);
        std::fs::create_dir(&d).unwrap();
        let cfg = tiny_config(&d, "");
        let mut c = bin();
        c.args(["train", "--quiet", "--config"]).arg(&cfg);
        if let Some(s) = seed {
            c.env("DUALSAFE_SEED", s);
        }
        assert_eq!(c.output().unwrap().status.code(), Some(0));
        std::fs::read_to_string(d.join("metrics.csv")).unwrap()
    };
    let a = run(Some("7"), "a");
    assert!(a.contains("# seed=7\n"));
    assert_eq!(a, run(Some("7"), "b"));
    assert!(run(None, "c").contains("# seed=0\n"));
    let o = bin()
        .args(["grad-check", "--count", "1"])
        .env("DUALSAFE_SEED", "x")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn evaluate_fresh_pusher_actor() {
    let dir = tempfile::tempdir().unwrap();
    let o = train(dir.path(), "env=pusher\ntotal_steps=0\n", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let eval = |seed: &str| {
        bin()
            .args(["evaluate", "--env", "pusher", "--episodes", "20", "--seed", seed, "--checkpoint"])
            .arg(dir.path().join("agents.ckpt"))
            .output()
            .unwrap()
    };
    let o = eval("3");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|&h| h == "success_rate").unwrap();
    let s: f64 = row[i].parse().unwrap();
    assert!((0.0..=1.0).contains(&s));
    assert_eq!(row[0], "20");
    assert_eq!(text, stdout(&eval("3")));
}

#[test]
fn evaluate_rejects_zero_episodes_and_wrong_env() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(train(dir.path(), "total_steps=0\n", &[]).status.code(), Some(0));
    let ckpt = dir.path().join("agents.ckpt");
    let o = bin()
        .args(["evaluate", "--episodes", "0", "--checkpoint"])
        .arg(&ckpt)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    // Corridor actor has 4 inputs; the pusher observation has 16.
    let o = bin()
        .args(["evaluate", "--env", "pusher", "--checkpoint"])
        .arg(&ckpt)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = bin()
        .args(["evaluate", "--checkpoint"])
        .arg(dir.path().join("absent.ckpt"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn oracle_check_two_state_agrees() {
    let o = bin().arg("oracle-check").arg(cmdp("two_state.cmdp")).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("oracle           [1 1]"), "{text}");
    assert!(text.contains("primal-dual      [1 1]"), "{text}");
}

#[test]
fn oracle_check_infeasible_is_flagged() {
    let o = bin().arg("oracle-check").arg(cmdp("infeasible.cmdp")).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("infeasible"));
    assert!(stderr(&o).contains("infeasible"), "{}", stderr(&o));
}

#[test]
fn oracle_check_delta_one_is_unconstrained() {
    let o = bin()
        .arg("oracle-check")
        .arg(cmdp("speedway.cmdp"))
        .args(["--delta", "1"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let policy = |tag: &str| {
        let line = text.lines().find(|l| l.starts_with(tag)).unwrap();
        line[tag.len()..].trim().to_string()
    };
    assert_eq!(policy("oracle"), policy("unconstrained"));
    assert!(text.contains("final lambda     0.000000"));
}

#[test]
fn oracle_check_bad_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.cmdp");
    std::fs::write(&p, "states 2\nactions x\n").unwrap();
    let o = bin().arg("oracle-check").arg(&p).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn grad_check_passes_and_corrupt_fails() {
    let run = |args: &[&str]| bin().arg("grad-check").args(args).output().unwrap();
    let a = run(&["--seed", "4", "--count", "20"]);
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    assert_eq!(stdout(&a), stdout(&run(&["--seed", "4", "--count", "20"])));
    let bad = run(&["--seed", "4", "--count", "5", "--corrupt"]);
    assert_eq!(bad.status.code(), Some(3));
}

#[test]
fn export_plot_columns() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(train(dir.path(), "", &[]).status.code(), Some(0));
    let metrics = dir.path().join("metrics.csv");
    let series = |col: &str| -> Vec<(u64, f64)> {
        let o = bin()
            .args(["export-plot", "--column", col])
            .arg(&metrics)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let text = stdout(&o);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), format!("step,{col}"));
        lines
            .map(|l| {
                let (s, v) = l.split_once(',').unwrap();
                (s.parse().unwrap(), v.parse().unwrap())
            })
            .collect()
    };
    let lambda = series("lambda");
    assert_eq!(lambda[0], (0, 0.0));
    assert_eq!(lambda.len(), 3);
    assert!(lambda.windows(2).all(|w| w[0].1 <= w[1].1));
    for (_, v) in series("violation_rate_S") {
        assert!((0.0..=1.0).contains(&v));
    }

    let out = dir.path().join("lambda.csv");
    let o = bin()
        .args(["export-plot", "--column", "lambda", "--out"])
        .arg(&out)
        .arg(&metrics)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(std::fs::read_to_string(&out).unwrap().starts_with("step,lambda\n0,0\n"));

    let o = bin()
        .args(["export-plot", "--column", "nope"])
        .arg(&metrics)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("valid columns"));
    assert!(stderr(&o).contains("violation_rate_S"));

    let o = bin()
        .args(["export-plot", "--column", "lambda"])
        .arg(dir.path().join("none.csv"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(bin().output().unwrap().status.code(), Some(1));
    assert_eq!(bin().arg("fly").output().unwrap().status.code(), Some(1));
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
}
