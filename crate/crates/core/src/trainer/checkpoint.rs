use std::path::Path;

use crate::agents::{
    AgentConfig, BaselineAgent, Critic, Horizon, SafeAgent, SafetyBudget, TwinCritics,
};
use crate::error::{Error, Result};
use crate::nn::checkpoint::{decode, encode, write_atomic};
use crate::nn::{Activation, Mlp};

/// Network names used for the baseline agent, in file order.
pub const BASELINE_NETS: [&str; 6] = [
    "actor_B",
    "actor_B_target",
    "critic_B1",
    "critic_B2",
    "critic_B1_target",
    "critic_B2_target",
];

/// Network names used for the safe agent, in file order.
pub const SAFE_NETS: [&str; 6] = [
    "actor_S",
    "actor_S_target",
    "critic_S1",
    "critic_S2",
    "critic_S1_target",
    "critic_S2_target",
];

/// Scalar state of the safe agent stored after the networks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyFooter {
    pub lambda: f64,
    pub delta: f64,
    pub gamma_bar: f64,
    pub horizon: Horizon,
    pub gamma_threshold: f64,
}

impl SafetyFooter {
    pub fn of(safe: &SafeAgent) -> Self {
        SafetyFooter {
            lambda: safe.lambda,
            delta: safe.budget.delta,
            gamma_bar: safe.budget.gamma_bar,
            horizon: safe.budget.horizon,
            gamma_threshold: safe.budget.gamma_threshold,
        }
    }

    pub fn to_line(&self) -> String {
        format!(
            "lambda={} delta={} gamma_bar={} T={} Gamma={}",
            self.lambda, self.delta, self.gamma_bar, self.horizon, self.gamma_threshold
        )
    }

    pub fn parse(line: &str) -> Result<Self> {
        let mut vals = [None::<&str>; 5];
        let keys = ["lambda", "delta", "gamma_bar", "T", "Gamma"];
        for tok in line.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::Checkpoint(format!("bad footer token `{tok}`")))?;
            let i = keys
                .iter()
                .position(|&key| key == k)
                .ok_or_else(|| Error::Checkpoint(format!("unknown footer key `{k}`")))?;
            vals[i] = Some(v);
        }
        let get = |i: usize| -> Result<&str> {
            vals[i].ok_or_else(|| Error::Checkpoint(format!("footer lacks `{}`", keys[i])))
        };
        let num = |i: usize| -> Result<f64> {
            get(i)?
                .parse()
                .map_err(|_| Error::Checkpoint(format!("bad footer value for `{}`", keys[i])))
        };
        Ok(SafetyFooter {
            lambda: num(0)?,
            delta: num(1)?,
            gamma_bar: num(2)?,
            horizon: get(3)?
                .parse()
                .map_err(|_| Error::Checkpoint("bad footer value for `T`".into()))?,
            gamma_threshold: num(4)?,
        })
    }
}

/// Named networks plus optional safety metadata, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentCheckpoint {
    pub networks: Vec<(String, Mlp)>,
    pub footer: Option<SafetyFooter>,
}

fn critic_nets(c: &TwinCritics) -> [&Mlp; 4] {
    [
        &c.online[0].net,
        &c.online[1].net,
        &c.target[0].net,
        &c.target[1].net,
    ]
}

impl AgentCheckpoint {
    pub fn new() -> Self {
        AgentCheckpoint {
            networks: Vec::new(),
            footer: None,
        }
    }

    pub fn push(&mut self, name: &str, net: &Mlp) {
        self.networks.push((name.to_string(), net.clone()));
    }

    pub fn add_baseline(&mut self, b: &BaselineAgent) {
        let nets = [&b.actor, &b.actor_target]
            .into_iter()
            .chain(critic_nets(&b.critics));
        for (name, net) in BASELINE_NETS.iter().zip(nets) {
            self.push(name, net);
        }
    }

    pub fn add_safe(&mut self, s: &SafeAgent) {
        let nets = [&s.actor, &s.actor_target]
            .into_iter()
            .chain(critic_nets(&s.critics));
        for (name, net) in SAFE_NETS.iter().zip(nets) {
            self.push(name, net);
        }
        self.footer = Some(SafetyFooter::of(s));
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let nets: Vec<(&str, &Mlp)> = self.networks.iter().map(|(n, m)| (n.as_str(), m)).collect();
        encode(&nets, self.footer.map(|f| f.to_line()).as_deref())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (networks, footer) = decode(bytes)?;
        Ok(AgentCheckpoint {
            networks,
            footer: footer.as_deref().map(SafetyFooter::parse).transpose()?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn get(&self, name: &str) -> Option<&Mlp> {
        self.networks.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    fn require(&self, name: &str, expected: &[usize], act: Activation) -> Result<Mlp> {
        let net = self
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("checkpoint has no `{name}` network")))?;
        if net.layer_sizes() != expected || net.output_activation() != act {
            return Err(Error::ShapeMismatch(format!(
                "`{name}` in checkpoint has layers {:?} ({}), config expects {:?} ({})",
                net.layer_sizes(),
                net.output_activation(),
                expected,
                act
            )));
        }
        Ok(net.clone())
    }

    /// An actor network checked against the expected dimensions.
    pub fn actor(&self, name: &str, obs_dim: usize, act_dim: usize, hidden: &[usize]) -> Result<Mlp> {
        let mut sizes = vec![obs_dim];
        sizes.extend(hidden);
        sizes.push(act_dim);
        self.require(name, &sizes, Activation::Tanh)
    }

    fn critics(
        &self,
        names: &[&str],
        obs_dim: usize,
        act_dim: usize,
        config: &AgentConfig,
    ) -> Result<TwinCritics> {
        let mut sizes = vec![obs_dim + act_dim];
        sizes.extend(&config.critic_hidden);
        sizes.push(1);
        let mut c = Vec::with_capacity(4);
        for name in names {
            c.push(Critic::from_net(self.require(name, &sizes, Activation::Identity)?, obs_dim)?);
        }
        let [o1, o2, t1, t2]: [Critic; 4] = c.try_into().expect("four critics");
        Ok(TwinCritics::from_critics([o1, o2], Some([t1, t2]), config.critic_lr))
    }

    /// Rebuild the baseline agent; optimizer moments start fresh.
    pub fn baseline_agent(
        &self,
        obs_dim: usize,
        act_dim: usize,
        config: &AgentConfig,
        gamma: f64,
    ) -> Result<BaselineAgent> {
        let actor = self.actor(BASELINE_NETS[0], obs_dim, act_dim, &config.actor_hidden)?;
        let target = self.actor(BASELINE_NETS[1], obs_dim, act_dim, &config.actor_hidden)?;
        let critics = self.critics(&BASELINE_NETS[2..], obs_dim, act_dim, config)?;
        BaselineAgent::from_parts(actor, Some(target), critics, config, gamma)
    }

    /// Rebuild the safe agent, including its multiplier and budget.
    pub fn safe_agent(
        &self,
        obs_dim: usize,
        act_dim: usize,
        config: &AgentConfig,
        eta_lambda: f64,
    ) -> Result<SafeAgent> {
        let footer = self
            .footer
            .ok_or_else(|| Error::Checkpoint("checkpoint has no safety footer".into()))?;
        let actor = self.actor(SAFE_NETS[0], obs_dim, act_dim, &config.actor_hidden)?;
        let target = self.actor(SAFE_NETS[1], obs_dim, act_dim, &config.actor_hidden)?;
        let critics = self.critics(&SAFE_NETS[2..], obs_dim, act_dim, config)?;
        let budget = SafetyBudget::new(footer.delta, footer.gamma_bar, footer.horizon)?;
        SafeAgent::from_parts(actor, Some(target), critics, config, budget, eta_lambda, footer.lambda)
    }
}

impl Default for AgentCheckpoint {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> AgentConfig {
        AgentConfig {
            actor_hidden: vec![8, 6],
            critic_hidden: vec![7],
            ..AgentConfig::default()
        }
    }

    fn agents() -> (BaselineAgent, SafeAgent) {
        let cfg = small();
        let budget = SafetyBudget::new(0.05, 0.6, Horizon::Finite(50)).unwrap();
        let b = BaselineAgent::new(4, 2, &cfg, 0.99, 1).unwrap();
        let mut s = SafeAgent::new(4, 2, &cfg, budget, 1e-3, 2).unwrap();
        s.lambda = 0.123456789;
        (b, s)
    }

    #[test]
    fn save_load_bit_identical() {
        let (b, s) = agents();
        let mut ck = AgentCheckpoint::new();
        ck.add_baseline(&b);
        ck.add_safe(&s);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        ck.save(&path).unwrap();
        let back = AgentCheckpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        let cfg = small();
        let b2 = back.baseline_agent(4, 2, &cfg, 0.99).unwrap();
        let s2 = back.safe_agent(4, 2, &cfg, 1e-3).unwrap();
        assert_eq!(b2.actor, b.actor);
        assert_eq!(b2.critics.target[1].net, b.critics.target[1].net);
        assert_eq!(s2.actor_target, s.actor_target);
        assert_eq!(s2.lambda, s.lambda);
        assert_eq!(s2.budget, s.budget);
    }

    #[test]
    fn footer_text() {
        let (_, s) = agents();
        let line = SafetyFooter::of(&s).to_line();
        assert!(line.starts_with("lambda=0.123456789 delta=0.05 gamma_bar=0.6 T=50 Gamma="));
        assert_eq!(SafetyFooter::parse(&line).unwrap(), SafetyFooter::of(&s));
        assert!(SafetyFooter::parse("lambda=1").is_err());
    }

    #[test]
    fn truncated_file_yields_no_agent() {
        let (_, s) = agents();
        let mut ck = AgentCheckpoint::new();
        ck.add_safe(&s);
        let bytes = ck.to_bytes().unwrap();
        let cut = &bytes[..bytes.len() / 2];
        assert!(AgentCheckpoint::from_bytes(cut).is_err());
    }

    #[test]
    fn shape_mismatch_against_config() {
        let (b, _) = agents();
        let mut ck = AgentCheckpoint::new();
        ck.add_baseline(&b);
        let other = AgentConfig {
            actor_hidden: vec![64, 64],
            ..small()
        };
        let err = ck.baseline_agent(4, 2, &other, 0.99).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch(_)), "{err}");
        assert!(matches!(ck.actor("actor_B", 5, 2, &[8, 6]), Err(Error::ShapeMismatch(_))));
        assert!(matches!(ck.actor("actor_S", 4, 2, &[8, 6]), Err(Error::Checkpoint(_))));
    }
}
