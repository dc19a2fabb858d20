use std::str::FromStr;

use rand::Rng;

use super::indicator;
use crate::agents::Horizon;
use crate::error::{Error, Result};

/// Finite constrained MDP with explicit model matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularCmdp {
    n_states: usize,
    n_actions: usize,
    /// `P[s][a][s']`, flattened.
    transitions: Vec<f64>,
    reward: Vec<f64>,
    cost: Vec<f64>,
    start: Vec<f64>,
    horizon: Horizon,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TabularTransition {
    pub next_state: usize,
    pub reward: f64,
    pub cost: f64,
    pub indicator: f64,
}

const ROW_SUM_TOL: f64 = 1e-12;

impl TabularCmdp {
    /// `transitions[s][a]` is the next-state distribution; `reward[s][a]` and
    /// `cost[s][a]` the per-step signals.
    pub fn new(
        transitions: Vec<Vec<Vec<f64>>>,
        reward: Vec<Vec<f64>>,
        cost: Vec<Vec<f64>>,
        start: Vec<f64>,
        horizon: Horizon,
    ) -> Result<Self> {
        let n_states = transitions.len();
        if n_states == 0 {
            return Err(Error::InvalidArgument("CMDP needs at least one state".into()));
        }
        let n_actions = transitions[0].len();
        if n_actions == 0 {
            return Err(Error::InvalidArgument("CMDP needs at least one action".into()));
        }
        let shape_ok = transitions
            .iter()
            .all(|row| row.len() == n_actions && row.iter().all(|p| p.len() == n_states))
            && reward.len() == n_states
            && reward.iter().all(|r| r.len() == n_actions)
            && cost.len() == n_states
            && cost.iter().all(|c| c.len() == n_actions)
            && start.len() == n_states;
        if !shape_ok {
            return Err(Error::ShapeMismatch("CMDP tables have inconsistent sizes".into()));
        }
        let cmdp = TabularCmdp {
            n_states,
            n_actions,
            transitions: transitions.into_iter().flatten().flatten().collect(),
            reward: reward.into_iter().flatten().collect(),
            cost: cost.into_iter().flatten().collect(),
            start,
            horizon,
        };
        cmdp.validate()?;
        Ok(cmdp)
    }

    fn validate(&self) -> Result<()> {
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let row = self.next_distribution(s, a);
                if row.iter().any(|&p| !(p.is_finite() && p >= 0.0)) {
                    return Err(Error::InvalidArgument(format!(
                        "P[{s}][{a}] has a negative or non-finite entry"
                    )));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "P[{s}][{a}] sums to {sum}, not 1"
                    )));
                }
                if !(self.cost(s, a) >= 0.0) {
                    return Err(Error::InvalidArgument(format!("C[{s}][{a}] is negative")));
                }
                if !self.reward(s, a).is_finite() {
                    return Err(Error::NonFinite(format!("R[{s}][{a}]")));
                }
            }
        }
        if self.start.iter().any(|&p| !(p.is_finite() && p >= 0.0))
            || (self.start.iter().sum::<f64>() - 1.0).abs() > ROW_SUM_TOL
        {
            return Err(Error::InvalidArgument(
                "start distribution must be nonnegative and sum to 1".into(),
            ));
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn next_distribution(&self, s: usize, a: usize) -> &[f64] {
        let off = (s * self.n_actions + a) * self.n_states;
        &self.transitions[off..off + self.n_states]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    pub fn cost(&self, s: usize, a: usize) -> f64 {
        self.cost[s * self.n_actions + a]
    }

    /// Per-step safety indicator for `(s, a)`.
    pub fn indicator(&self, s: usize, a: usize) -> f64 {
        if self.cost(s, a) == 0.0 {
            1.0
        } else {
            0.0
        }
    }

    /// Render in the text format accepted by [`FromStr`].
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.n_states, self.n_actions, self.horizon);
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let row: Vec<String> = self
                    .next_distribution(s, a)
                    .iter()
                    .map(|p| p.to_string())
                    .collect();
                out.push_str(&format!("P {s} {a}: {}\n", row.join(" ")));
                out.push_str(&format!("R {s} {a}: {}\n", self.reward(s, a)));
                out.push_str(&format!("C {s} {a}: {}\n", self.cost(s, a)));
            }
        }
        let start: Vec<String> = self.start.iter().map(|p| p.to_string()).collect();
        out.push_str(&format!("start: {}\n", start.join(" ")));
        out
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::CmdpParse {
        line,
        msg: msg.into(),
    }
}

fn parse_num<T: FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("cannot parse {what} from `{tok}`")))
}

/// Text format: a header `n_states n_actions horizon` (horizon an integer or
/// `inf`), then `P s a: p0 p1 ...`, `R s a: r`, `C s a: c`, and
/// `start: d0 d1 ...` lines. `#` starts a comment. Every `P` row and the
/// start line are required; missing `R`/`C` entries default to 0.
impl FromStr for TabularCmdp {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 3 {
            return Err(parse_err(hline, "header must be `n_states n_actions horizon`"));
        }
        let ns: usize = parse_num(h[0], hline, "n_states")?;
        let na: usize = parse_num(h[1], hline, "n_actions")?;
        let horizon: Horizon = h[2]
            .parse()
            .map_err(|_| parse_err(hline, format!("bad horizon `{}`", h[2])))?;
        if ns == 0 || na == 0 {
            return Err(parse_err(hline, "n_states and n_actions must be positive"));
        }

        let mut p: Vec<Vec<Option<Vec<f64>>>> = vec![vec![None; na]; ns];
        let mut r = vec![vec![0.0; na]; ns];
        let mut c = vec![vec![0.0; na]; ns];
        let mut start = None;

        for (ln, line) in lines {
            let (head, body) = line
                .split_once(':')
                .ok_or_else(|| parse_err(ln, "expected `<tag> ...: values`"))?;
            let head: Vec<&str> = head.split_whitespace().collect();
            let values: Vec<f64> = body
                .split_whitespace()
                .map(|t| parse_num(t, ln, "value"))
                .collect::<Result<_>>()?;
            if head == ["start"] {
                if values.len() != ns {
                    return Err(parse_err(ln, format!("start needs {ns} entries")));
                }
                start = Some(values);
                continue;
            }
            if head.len() != 3 {
                return Err(parse_err(ln, "expected `P|R|C s a:`"));
            }
            let s: usize = parse_num(head[1], ln, "state index")?;
            let a: usize = parse_num(head[2], ln, "action index")?;
            if s >= ns || a >= na {
                return Err(parse_err(ln, format!("index ({s}, {a}) out of range")));
            }
            match head[0] {
                "P" => {
                    if values.len() != ns {
                        return Err(parse_err(ln, format!("P row needs {ns} entries")));
                    }
                    p[s][a] = Some(values);
                }
                "R" | "C" => {
                    if values.len() != 1 {
                        return Err(parse_err(ln, "expected exactly one value"));
                    }
                    let table = if head[0] == "R" { &mut r } else { &mut c };
                    table[s][a] = values[0];
                }
                other => return Err(parse_err(ln, format!("unknown tag `{other}`"))),
            }
        }

        let mut transitions = Vec::with_capacity(ns);
        for (s, row) in p.into_iter().enumerate() {
            let mut acts = Vec::with_capacity(na);
            for (a, dist) in row.into_iter().enumerate() {
                acts.push(dist.ok_or_else(|| parse_err(0, format!("missing P {s} {a}")))?);
            }
            transitions.push(acts);
        }
        let start = start.ok_or_else(|| parse_err(0, "missing start distribution"))?;
        TabularCmdp::new(transitions, r, c, start, horizon).map_err(|e| match e {
            Error::InvalidArgument(msg) | Error::ShapeMismatch(msg) | Error::NonFinite(msg) => {
                parse_err(0, msg)
            }
            other => other,
        })
    }
}

/// Sample one step of the CMDP from `(s, a)`.
pub fn tabular_step<R: Rng + ?Sized>(
    cmdp: &TabularCmdp,
    s: usize,
    a: usize,
    rng: &mut R,
) -> Result<TabularTransition> {
    if s >= cmdp.n_states() || a >= cmdp.n_actions() {
        return Err(Error::InvalidArgument(format!(
            "(state {s}, action {a}) out of range"
        )));
    }
    let u: f64 = rng.random();
    let dist = cmdp.next_distribution(s, a);
    let mut acc = 0.0;
    let mut next = dist.len() - 1;
    for (i, &p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            next = i;
            break;
        }
    }
    // Guard against rounding leaving mass on a zero-probability tail state.
    while dist[next] == 0.0 && next > 0 {
        next -= 1;
    }
    let cost = cmdp.cost(s, a);
    Ok(TabularTransition {
        next_state: next,
        reward: cmdp.reward(s, a),
        cost,
        indicator: indicator(cost)?,
    })
}
