//! Shared experience buffer for both agents.

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{Error, Result};

/// One environment interaction `(s, a, r, I, s')`.
///
/// Actions are stored in the normalised `[-1, 1]` coordinates the actors and
/// critics work in; environments rescale them to physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    /// Safety indicator, exactly 0.0 or 1.0.
    pub indicator: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

impl Transition {
    pub fn validate(&self) -> Result<()> {
        if self.indicator != 0.0 && self.indicator != 1.0 {
            return Err(Error::InvalidArgument(format!(
                "safety indicator must be 0 or 1, got {}",
                self.indicator
            )));
        }
        if self.state.len() != self.next_state.len() {
            return Err(Error::ShapeMismatch(format!(
                "state width {} != next state width {}",
                self.state.len(),
                self.next_state.len()
            )));
        }
        let finite = self
            .state
            .iter()
            .chain(&self.action)
            .chain(&self.next_state)
            .all(|v| v.is_finite())
            && self.reward.is_finite();
        if !finite {
            return Err(Error::NonFinite("transition".into()));
        }
        if self.action.iter().any(|a| a.abs() > 1.0) {
            return Err(Error::InvalidArgument(
                "normalised action outside [-1, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// A sampled mini-batch laid out as matrices, one row per transition.
#[derive(Debug, Clone)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub indicators: Array1<f64>,
    pub next_states: Array2<f64>,
    pub terminals: Vec<bool>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn from_transitions(items: &[&Transition]) -> Result<Self> {
        let first = items.first().ok_or(Error::EmptyBuffer)?;
        let (sd, ad) = (first.state.len(), first.action.len());
        let n = items.len();
        let mut states = Array2::zeros((n, sd));
        let mut next_states = Array2::zeros((n, sd));
        let mut actions = Array2::zeros((n, ad));
        let mut rewards = Array1::zeros(n);
        let mut indicators = Array1::zeros(n);
        let mut terminals = Vec::with_capacity(n);
        for (row, t) in items.iter().enumerate() {
            if t.state.len() != sd || t.action.len() != ad {
                return Err(Error::ShapeMismatch("ragged transitions in batch".into()));
            }
            states.row_mut(row).assign(&ndarray::aview1(&t.state));
            next_states.row_mut(row).assign(&ndarray::aview1(&t.next_state));
            actions.row_mut(row).assign(&ndarray::aview1(&t.action));
            rewards[row] = t.reward;
            indicators[row] = t.indicator;
            terminals.push(t.terminal);
        }
        Ok(Batch {
            states,
            actions,
            rewards,
            indicators,
            next_states,
            terminals,
        })
    }
}

/// Fixed-capacity FIFO ring of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: Vec<Transition>,
    /// Slot the next push overwrites once the ring is full.
    head: usize,
    pushes: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("replay capacity must be positive".into()));
        }
        Ok(ReplayBuffer {
            capacity,
            storage: Vec::with_capacity(capacity.min(1 << 16)),
            head: 0,
            pushes: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    /// Total number of accepted pushes over the buffer's lifetime.
    pub fn total_pushes(&self) -> u64 {
        self.pushes
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        t.validate()?;
        if let Some(first) = self.storage.first() {
            if first.state.len() != t.state.len() || first.action.len() != t.action.len() {
                return Err(Error::ShapeMismatch(
                    "transition widths differ from stored ones".into(),
                ));
            }
        }
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
        self.pushes += 1;
        Ok(())
    }

    /// Stored transitions from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.storage.split_at(self.head);
        older.iter().chain(newer.iter())
    }

    fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.storage.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        if n == 0 {
            return Err(Error::InvalidArgument("sample size must be positive".into()));
        }
        let len = self.storage.len();
        Ok((0..n).map(|_| rng.random_range(0..len)).collect())
    }

    /// `n` uniform draws with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        Ok(self
            .sample_indices(n, rng)?
            .into_iter()
            .map(|i| &self.storage[i])
            .collect())
    }

    /// Like [`ReplayBuffer::sample`], packed into matrices.
    pub fn sample_batch<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Batch> {
        Batch::from_transitions(&self.sample(n, rng)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(tag: f64) -> Transition {
        Transition {
            state: vec![tag, 0.0],
            action: vec![0.0],
            reward: tag,
            indicator: 1.0,
            next_state: vec![tag + 1.0, 0.0],
            terminal: false,
        }
    }

    #[test]
    fn push_one_sample_one() {
        let mut buf = ReplayBuffer::new(10).unwrap();
        buf.push(tr(3.0)).unwrap();
        assert_eq!(buf.len(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(buf.sample(1, &mut rng).unwrap()[0], &tr(3.0));
    }

    #[test]
    fn fifo_eviction() {
        let mut buf = ReplayBuffer::new(2).unwrap();
        for t in [1.0, 2.0, 3.0] {
            buf.push(tr(t)).unwrap();
        }
        let held: Vec<f64> = buf.iter().map(|t| t.reward).collect();
        assert_eq!(held, vec![2.0, 3.0]);
        buf.push(tr(4.0)).unwrap();
        let held: Vec<f64> = buf.iter().map(|t| t.reward).collect();
        assert_eq!(held, vec![3.0, 4.0]);
        assert_eq!(buf.total_pushes(), 4);
    }

    #[test]
    fn rejects_fractional_indicator_and_nan() {
        let mut buf = ReplayBuffer::new(4).unwrap();
        let mut bad = tr(0.0);
        bad.indicator = 0.5;
        assert!(buf.push(bad).is_err());
        let mut bad = tr(0.0);
        bad.reward = f64::NAN;
        assert!(buf.push(bad).is_err());
        assert!(buf.is_empty());
    }

    #[test]
    fn empty_buffer_cannot_sample() {
        let buf = ReplayBuffer::new(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(buf.sample(1, &mut rng), Err(Error::EmptyBuffer)));
    }

    #[test]
    fn single_entry_repeats() {
        let mut buf = ReplayBuffer::new(4).unwrap();
        buf.push(tr(7.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batch = buf.sample_batch(4, &mut rng).unwrap();
        assert_eq!(batch.len(), 4);
        assert!(batch.rewards.iter().all(|&r| r == 7.0));
    }

    #[test]
    fn same_seed_same_batch() {
        let mut buf = ReplayBuffer::new(100).unwrap();
        for i in 0..50 {
            buf.push(tr(i as f64)).unwrap();
        }
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            buf.sample(16, &mut rng)
                .unwrap()
                .into_iter()
                .map(|t| t.reward)
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
    }

    #[test]
    fn uniform_frequencies() {
        let mut buf = ReplayBuffer::new(1000).unwrap();
        for i in 0..1000 {
            buf.push(tr(i as f64)).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut counts = vec![0u32; 1000];
        for t in buf.sample(100_000, &mut rng).unwrap() {
            counts[t.reward as usize] += 1;
        }
        // Binomial(1e5, 1e-3): mean 100, sd ≈ 9.99.
        let (mean, sd) = (100.0, (100_000.0f64 * 1e-3 * (1.0 - 1e-3)).sqrt());
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - mean).powi(2) / mean)
            .sum();
        // chi-square with 999 dof: mean 999, sd ≈ 44.7.
        assert!((chi2 - 999.0).abs() < 3.0 * (2.0f64 * 999.0).sqrt(), "chi2 {chi2}");
        let outliers = counts
            .iter()
            .filter(|&&c| (c as f64 - mean).abs() > 3.0 * sd)
            .count();
        // ~0.27% expected beyond 3 sd; allow generous slack.
        assert!(outliers < 15, "{outliers} entries beyond 3 sd");
    }
}
