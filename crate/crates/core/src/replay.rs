//! Experience replay with inverse-usage weighting.
//!
//! An entry that has been emitted `u` times is drawn with weight `1 / (1 + u)`.
//! Weights live in a Fenwick tree so a draw costs `O(log n)`.

use rand::Rng;

use crate::error::{Result, RmabError};
use crate::simulator::Experience;

fn weight(use_count: u64) -> f64 {
    1.0 / (1.0 + use_count as f64)
}

/// Prefix-sum tree over non-negative weights.
#[derive(Debug, Clone, Default)]
struct Fenwick {
    tree: Vec<f64>,
}

impl Fenwick {
    fn from_weights(w: &[f64]) -> Self {
        let n = w.len();
        let mut tree = vec![0.0; n + 1];
        for i in 1..=n {
            tree[i] += w[i - 1];
            let j = i + (i & i.wrapping_neg());
            if j <= n {
                tree[j] += tree[i];
            }
        }
        Self { tree }
    }

    fn len(&self) -> usize {
        self.tree.len().saturating_sub(1)
    }

    fn add(&mut self, idx: usize, delta: f64) {
        let mut i = idx + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    fn total(&self) -> f64 {
        let mut i = self.len();
        let mut s = 0.0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }

    /// Smallest index whose inclusive prefix sum exceeds `target`.
    fn find(&self, mut target: f64) -> usize {
        let n = self.len();
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= target {
                target -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        pos.min(n.saturating_sub(1))
    }
}

/// Append-only store of experience tuples with optional FIFO capacity.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    slots: Vec<Experience>,
    weights: Vec<f64>,
    tree: Fenwick,
    capacity: Option<usize>,
    /// Next slot to overwrite once the buffer is full.
    head: usize,
    emitted: u64,
}

impl Default for ReplayBuffer {
    fn default() -> Self {
        Self::new(None)
    }
}

impl ReplayBuffer {
    /// `capacity = None` keeps every tuple.
    pub fn new(capacity: Option<usize>) -> Self {
        Self {
            slots: Vec::new(),
            weights: Vec::new(),
            tree: Fenwick::default(),
            capacity: capacity.filter(|&c| c > 0),
            head: 0,
            emitted: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    /// Total number of tuples ever handed out by [`sample`](Self::sample).
    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    pub fn entries(&self) -> impl Iterator<Item = &Experience> {
        let split = if self.is_full() { self.head } else { 0 };
        self.slots[split..].iter().chain(self.slots[..split].iter())
    }

    fn is_full(&self) -> bool {
        self.capacity.is_some_and(|c| self.slots.len() >= c)
    }

    fn set_weight(&mut self, i: usize, w: f64) {
        let delta = w - self.weights[i];
        self.weights[i] = w;
        self.tree.add(i, delta);
    }

    /// Stores a fresh tuple; its use count starts at zero.
    pub fn push(&mut self, mut e: Experience) {
        e.use_count = 0;
        self.restore(e);
    }

    /// Stores a tuple keeping its use count, e.g. when reloading a saved buffer.
    pub fn restore(&mut self, e: Experience) {
        let w = weight(e.use_count);
        if self.is_full() {
            let i = self.head;
            self.slots[i] = e;
            self.set_weight(i, w);
            self.head = (self.head + 1) % self.slots.len();
            return;
        }
        self.slots.push(e);
        self.weights.push(w);
        if self.tree.len() < self.slots.len() {
            // grow geometrically; unused tail slots carry zero weight
            let mut all = self.weights.clone();
            all.resize((self.slots.len() * 2).max(16), 0.0);
            self.tree = Fenwick::from_weights(&all);
        } else {
            self.tree.add(self.slots.len() - 1, w);
        }
    }

    /// Draws `min(k, len)` distinct entries with probability proportional to
    /// `1 / (1 + use_count)` and bumps the use count of each.
    pub fn sample<R: Rng + ?Sized>(&mut self, k: usize, rng: &mut R) -> Result<Vec<Experience>> {
        if self.is_empty() {
            return Err(RmabError::EmptyBuffer);
        }
        let k = k.min(self.len());
        let mut picked = Vec::with_capacity(k);
        for _ in 0..k {
            let total = self.tree.total();
            let i = self
                .tree
                .find(rng.random::<f64>() * total)
                .min(self.slots.len() - 1);
            // guard against rounding landing on an already drawn slot
            let i = if self.weights[i] > 0.0 {
                i
            } else {
                (0..self.slots.len())
                    .find(|&j| self.weights[j] > 0.0)
                    .expect("k <= len leaves a positive weight")
            };
            picked.push(i);
            self.set_weight(i, 0.0);
        }
        let mut out = Vec::with_capacity(k);
        for i in picked {
            self.slots[i].use_count += 1;
            let w = weight(self.slots[i].use_count);
            self.set_weight(i, w);
            out.push(self.slots[i].clone());
        }
        self.emitted += k as u64;
        if self.emitted % 65_536 < k as u64 {
            self.rebuild();
        }
        Ok(out)
    }

    /// Recomputes the tree from scratch to shed accumulated rounding error.
    fn rebuild(&mut self) {
        let mut w = self.weights.clone();
        w.resize(self.tree.len(), 0.0);
        self.tree = Fenwick::from_weights(&w);
    }
}

/// When a learner replays and how many tuples it draws each time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ReplaySchedule {
    /// Replay every `period` environment steps.
    pub period: u64,
    /// Tuples drawn per replay.
    pub per_dream: usize,
}

impl ReplaySchedule {
    pub const NEVER: Self = Self {
        period: u64::MAX,
        per_dream: 0,
    };

    pub fn new(per_dream: usize, period: u64) -> Self {
        Self { period, per_dream }
    }

    pub fn is_due(&self, t: u64) -> bool {
        self.per_dream > 0 && self.period > 0 && self.period != u64::MAX && t % self.period == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn exp(arm: usize) -> Experience {
        Experience {
            arm,
            state: 0,
            action: 0,
            reward: 0.0,
            next_state: 0,
            use_count: 0,
        }
    }

    #[test]
    fn singleton_and_fresh_count() {
        let mut b = ReplayBuffer::default();
        let mut e = exp(7);
        e.use_count = 5;
        b.push(e);
        assert_eq!(b.entries().next().unwrap().use_count, 0);
        let mut rng = stream(0, 0);
        let got = b.sample(1, &mut rng).unwrap();
        assert_eq!(got[0].arm, 7);
        assert_eq!(got[0].use_count, 1);
    }

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(Some(2));
        for i in 0..3 {
            b.push(exp(i));
        }
        let arms: Vec<usize> = b.entries().map(|e| e.arm).collect();
        assert_eq!(arms, vec![1, 2]);
    }

    #[test]
    fn empty_buffer_is_refused() {
        let mut b = ReplayBuffer::default();
        assert!(matches!(
            b.sample(1, &mut stream(0, 0)),
            Err(RmabError::EmptyBuffer)
        ));
    }

    #[test]
    fn k_is_clamped_and_distinct() {
        let mut b = ReplayBuffer::default();
        for i in 0..5 {
            b.push(exp(i));
        }
        let mut got: Vec<usize> = b
            .sample(50, &mut stream(1, 0))
            .unwrap()
            .iter()
            .map(|e| e.arm)
            .collect();
        got.sort();
        assert_eq!(got, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn inverse_usage_weighting() {
        let mut rng = stream(3, 3);
        let n = 100_000;
        let mut first = 0;
        for _ in 0..n {
            let mut b = ReplayBuffer::default();
            b.push(exp(0));
            b.restore(Experience {
                use_count: 3,
                ..exp(1)
            });
            if b.sample(1, &mut rng).unwrap()[0].arm == 0 {
                first += 1;
            }
        }
        let freq = first as f64 / n as f64;
        assert!((freq - 0.8).abs() < 0.01, "freq {freq}");
    }

    #[test]
    fn fresh_buffer_draws_uniformly() {
        let mut rng = stream(4, 4);
        let m = 10;
        let n = 100_000;
        let mut hits = vec![0usize; m];
        let mut template = ReplayBuffer::default();
        for i in 0..m {
            template.push(exp(i));
        }
        for _ in 0..n {
            let mut b = template.clone();
            hits[b.sample(1, &mut rng).unwrap()[0].arm] += 1;
        }
        for h in hits {
            let f = h as f64 / n as f64;
            assert!((f - 0.1).abs() < 0.01, "freq {f}");
        }
    }

    #[test]
    fn use_counts_add_up() {
        let mut b = ReplayBuffer::default();
        let mut rng = stream(5, 0);
        for i in 0..40 {
            b.push(exp(i));
            if i % 3 == 0 {
                b.sample(7, &mut rng).unwrap();
            }
        }
        let total: u64 = b.entries().map(|e| e.use_count).sum();
        assert_eq!(total, b.emitted());
    }

    #[test]
    fn fenwick_matches_linear_scan() {
        let w = [0.5, 0.0, 1.0, 2.0, 0.25];
        let f = Fenwick::from_weights(&w);
        assert!((f.total() - 3.75).abs() < 1e-12);
        assert_eq!(f.find(0.1), 0);
        assert_eq!(f.find(0.6), 2);
        assert_eq!(f.find(1.6), 3);
        assert_eq!(f.find(3.6), 4);
    }

    #[test]
    fn schedule_due() {
        let s = ReplaySchedule::new(1000, 10);
        assert!(s.is_due(10) && !s.is_due(11));
        assert!(!ReplaySchedule::NEVER.is_due(0));
    }
}
