//! Step-size schedules, epsilon decay, visit counters and the budget-respecting
//! random action sampler used for exploration.
//!
//! * `alpha(nu)   = C / ceil(nu / D)`
//! * `gamma(nu)   = C' / (1 + ceil(nu ln(nu) / D))`, with `nu ln(nu) = 0` at `nu = 1`
//! * `epsilon(t)  = min(1, eps0 / ceil(t / D))`

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RmabError};
use crate::model::{ActionVector, RmabInstance, FEASIBILITY_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    /// Q-step multiplier.
    pub c: f64,
    /// Index-step multiplier.
    pub c_prime: f64,
    /// Decay divisor shared by all three schedules.
    pub d: u64,
    pub epsilon0: f64,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self {
            c: 0.4,
            c_prime: 0.2,
            d: 500,
            epsilon0: 0.99,
        }
    }
}

fn ceil_div(n: u64, d: u64) -> u64 {
    n.div_ceil(d)
}

impl ScheduleParams {
    pub fn new(c: f64, c_prime: f64, d: u64, epsilon0: f64) -> Result<Self> {
        if !(c > 0.0 && c_prime > 0.0 && d > 0 && epsilon0 > 0.0 && epsilon0 <= 1.0) {
            return Err(RmabError::Config(format!(
                "schedule parameters out of range: C={c}, C'={c_prime}, D={d}, eps0={epsilon0}"
            )));
        }
        Ok(Self {
            c,
            c_prime,
            d,
            epsilon0,
        })
    }

    pub fn alpha(&self, nu: u64) -> Result<f64> {
        if nu == 0 {
            return Err(RmabError::ZeroClock);
        }
        Ok(self.c / ceil_div(nu, self.d) as f64)
    }

    pub fn gamma(&self, nu: u64) -> Result<f64> {
        if nu == 0 {
            return Err(RmabError::ZeroClock);
        }
        let x = nu as f64;
        let t_log_t = if nu == 1 { 0.0 } else { x * x.ln() };
        Ok(self.c_prime / (1.0 + (t_log_t / self.d as f64).ceil()))
    }

    pub fn epsilon(&self, t: u64) -> Result<f64> {
        if t == 0 {
            return Err(RmabError::ZeroClock);
        }
        Ok((self.epsilon0 / ceil_div(t, self.d) as f64).min(1.0))
    }

    /// One Bernoulli(epsilon(t)) draw: true means explore this round.
    pub fn explore<R: Rng + ?Sized>(&self, t: u64, rng: &mut R) -> bool {
        let eps = self.epsilon(t.max(1)).unwrap_or(1.0);
        rng.random::<f64>() < eps
    }
}

/// Per-(arm, state, action) update counts.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitCounter {
    offsets: Vec<usize>,
    n_actions: Vec<usize>,
    counts: Vec<u64>,
}

impl VisitCounter {
    pub fn new(instance: &RmabInstance) -> Self {
        Self::from_shapes(
            instance
                .arms()
                .iter()
                .map(|a| (a.n_states(), a.n_actions())),
        )
    }

    pub fn from_shapes(shapes: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut offsets = Vec::new();
        let mut n_actions = Vec::new();
        let mut total = 0;
        for (ns, na) in shapes {
            offsets.push(total);
            n_actions.push(na);
            total += ns * na;
        }
        Self {
            offsets,
            n_actions,
            counts: vec![0; total],
        }
    }

    fn index(&self, arm: usize, s: usize, a: usize) -> usize {
        self.offsets[arm] + s * self.n_actions[arm] + a
    }

    pub fn get(&self, arm: usize, s: usize, a: usize) -> u64 {
        self.counts[self.index(arm, s, a)]
    }

    /// Increments and returns the new count.
    pub fn bump(&mut self, arm: usize, s: usize, a: usize) -> u64 {
        let i = self.index(arm, s, a);
        self.counts[i] += 1;
        self.counts[i]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Iterative random sampler over per-arm cost ladders.
///
/// Repeatedly picks an unvisited arm uniformly, then one of its actions that
/// fits in the remaining budget with probability proportional to `1 / (1 + c_j)`
/// (the passive action included), and deducts the cost. Stops once every arm
/// is visited or no unvisited arm can afford a non-passive action.
pub fn random_action_with_costs<R: Rng + ?Sized>(
    costs: &[&[f64]],
    budget: f64,
    rng: &mut R,
) -> Vec<usize> {
    let n = costs.len();
    let mut actions = vec![0usize; n];
    let mut pool: Vec<usize> = (0..n).collect();
    let mut remaining = budget;
    let affordable = |c: f64, rem: f64| c <= rem + FEASIBILITY_TOL;
    loop {
        let any_affordable = pool.iter().any(|&i| {
            costs[i]
                .iter()
                .any(|&c| c > 0.0 && affordable(c, remaining))
        });
        if !any_affordable {
            break;
        }
        let pick = rng.random_range(0..pool.len());
        let arm = pool.swap_remove(pick);
        let weights: Vec<f64> = costs[arm]
            .iter()
            .map(|&c| {
                if affordable(c, remaining) {
                    1.0 / (1.0 + c)
                } else {
                    0.0
                }
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut chosen = 0;
        for (j, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                chosen = j;
                if u < w {
                    break;
                }
                u -= w;
            }
        }
        actions[arm] = chosen;
        remaining -= costs[arm][chosen];
    }
    actions
}

/// Random feasible action vector for `instance`; see [`random_action_with_costs`].
pub fn random_action<R: Rng + ?Sized>(instance: &RmabInstance, rng: &mut R) -> ActionVector {
    let costs: Vec<&[f64]> = instance.arms().iter().map(|a| a.costs()).collect();
    ActionVector(random_action_with_costs(&costs, instance.budget(), rng))
}
