//! Arms with uniformly drawn rewards, costs and transition rows.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{ArmModel, RmabInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowSampling {
    /// Independent `U[0, 1]` entries, normalized.
    #[default]
    NormalizedUniform,
    /// Uniform on the simplex.
    Dirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomParams {
    pub n_states: usize,
    pub n_actions: usize,
    #[serde(default)]
    pub rows: RowSampling,
}

impl Default for RandomParams {
    fn default() -> Self {
        Self {
            n_states: 5,
            n_actions: 5,
            rows: RowSampling::NormalizedUniform,
        }
    }
}

/// `B = N |A| / 2`.
pub fn random_budget(n_arms: usize, n_actions: usize) -> f64 {
    (n_arms * n_actions) as f64 / 2.0
}

fn sample_row<R: Rng + ?Sized>(n: usize, how: RowSampling, rng: &mut R) -> Vec<f64> {
    let mut row: Vec<f64> = match how {
        RowSampling::NormalizedUniform => (0..n).map(|_| rng.random::<f64>()).collect(),
        RowSampling::Dirichlet => (0..n).map(|_| Exp1.sample(rng)).collect(),
    };
    let total: f64 = row.iter().sum();
    if total <= 0.0 {
        row.iter_mut().for_each(|x| *x = 1.0 / n as f64);
    } else {
        row.iter_mut().for_each(|x| *x /= total);
    }
    row
}

pub fn gen_random_arm<R: Rng + ?Sized>(params: &RandomParams, rng: &mut R) -> Result<ArmModel> {
    let (ns, na) = (params.n_states, params.n_actions);
    let rewards: Vec<f64> = (0..ns).map(|_| rng.random::<f64>()).collect();
    let mut costs: Vec<f64> = Vec::with_capacity(na);
    let mut acc = 0.0;
    for _ in 0..na {
        acc += rng.random::<f64>();
        costs.push(acc);
    }
    costs[0] = 0.0;
    let mut t = Vec::with_capacity(ns * na * ns);
    for _ in 0..ns * na {
        t.extend(sample_row(ns, params.rows, rng));
    }
    ArmModel::new(costs, rewards, t)
}

pub fn gen_random<R: Rng + ?Sized>(
    n: usize,
    params: &RandomParams,
    budget: f64,
    discount: f64,
    rng: &mut R,
) -> Result<RmabInstance> {
    let arms = (0..n)
        .map(|_| gen_random_arm(params, rng))
        .collect::<Result<Vec<_>>>()?;
    RmabInstance::new(arms, budget, discount)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn generated_arms_are_valid() {
        let p = RandomParams {
            n_states: 5,
            n_actions: 10,
            rows: RowSampling::NormalizedUniform,
        };
        let inst = gen_random(16, &p, random_budget(16, 10), 0.9, &mut stream(1, 0)).unwrap();
        assert_eq!(inst.budget(), 80.0);
        for arm in inst.arms() {
            assert!(arm.validate().is_ok());
            assert_eq!(arm.cost(0), 0.0);
            assert!(arm.costs().windows(2).all(|w| w[1] > w[0]));
            for s in 0..5 {
                for a in 0..10 {
                    assert!((arm.row(s, a).iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn dirichlet_rows_are_valid() {
        let p = RandomParams {
            rows: RowSampling::Dirichlet,
            ..Default::default()
        };
        let inst = gen_random(4, &p, 10.0, 0.9, &mut stream(2, 0)).unwrap();
        assert!(inst.arms().iter().all(|a| a.validate().is_ok()));
    }
}
