//! Two kinds of two-state arms with actions of cost 0, 1 and 2.
//!
//! Type-A arms only stay in the good state while acted on and rarely recover
//! once they fall. Type-B arms drift back to the good state on their own and
//! recover from a single action.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{ArmModel, RmabInstance};

pub const COSTS: [f64; 3] = [0.0, 1.0, 2.0];

/// Per-action probabilities of a good(1)/bad(0) chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryChain {
    /// `P(good -> good | a)`
    pub stay_good: Vec<f64>,
    /// `P(bad -> good | a)`
    pub recover: Vec<f64>,
}

impl BinaryChain {
    /// Two-state arm with rewards `(0, 1)` and the given action costs.
    pub fn arm(&self, costs: &[f64]) -> Result<ArmModel> {
        // [s][a][s'] with s = 0 (bad) first
        let mut t = Vec::with_capacity(4 * costs.len());
        for a in 0..costs.len() {
            t.extend_from_slice(&[1.0 - self.recover[a], self.recover[a]]);
        }
        for a in 0..costs.len() {
            t.extend_from_slice(&[1.0 - self.stay_good[a], self.stay_good[a]]);
        }
        ArmModel::new(costs.to_vec(), vec![0.0, 1.0], t)
    }

    /// Probability that the next day is good from a state whose last day is `good`.
    pub fn p_good(&self, good: bool, a: usize) -> f64 {
        if good {
            self.stay_good[a]
        } else {
            self.recover[a]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoProcessParams {
    pub fraction_type_a: f64,
    pub type_a: BinaryChain,
    pub type_b: BinaryChain,
}

impl Default for TwoProcessParams {
    fn default() -> Self {
        Self {
            fraction_type_a: 0.25,
            type_a: Self::default_type_a(),
            type_b: BinaryChain {
                stay_good: vec![0.9, 0.9, 0.9],
                recover: vec![0.15, 0.9, 0.95],
            },
        }
    }
}

impl TwoProcessParams {
    pub fn default_type_a() -> BinaryChain {
        BinaryChain {
            stay_good: vec![0.05, 0.9, 1.0],
            recover: vec![0.0, 0.1, 0.1],
        }
    }

    pub fn n_type_a(&self, n: usize) -> usize {
        ((self.fraction_type_a * n as f64) - 1e-9).ceil().max(0.0) as usize
    }
}

/// `ceil(fraction * N)` Type-A arms and the rest Type-B, in shuffled order.
///
/// Returns the instance and a flag per arm, true for Type-A.
pub fn gen_two_process<R: Rng + ?Sized>(
    n: usize,
    params: &TwoProcessParams,
    budget: f64,
    discount: f64,
    rng: &mut R,
) -> Result<(RmabInstance, Vec<bool>)> {
    let n_a = params.n_type_a(n).min(n);
    let mut kinds: Vec<bool> = (0..n).map(|i| i < n_a).collect();
    kinds.shuffle(rng);
    let a = params.type_a.arm(&COSTS)?;
    let b = params.type_b.arm(&COSTS)?;
    let arms = kinds
        .iter()
        .map(|&is_a| if is_a { a.clone() } else { b.clone() })
        .collect();
    Ok((RmabInstance::new(arms, budget, discount)?, kinds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn type_split() {
        let p = TwoProcessParams::default();
        let (inst, kinds) = gen_two_process(16, &p, 8.0, 0.9, &mut stream(0, 0)).unwrap();
        assert_eq!(inst.n_arms(), 16);
        assert_eq!(kinds.iter().filter(|&&k| k).count(), 4);
        assert_eq!(p.n_type_a(48), 12);
        assert_eq!(p.n_type_a(10), 3);
    }

    #[test]
    fn chain_layout() {
        let arm = TwoProcessParams::default_type_a().arm(&COSTS).unwrap();
        assert_eq!(arm.prob(1, 0, 1), 0.05);
        assert_eq!(arm.prob(1, 2, 1), 1.0);
        assert_eq!(arm.prob(0, 1, 1), 0.1);
        assert_eq!(arm.prob(0, 1, 0), 0.9);
    }

    #[test]
    fn type_b_good_index_below_type_a() {
        use crate::oracles::oracle_index;
        let p = TwoProcessParams::default();
        let a = p.type_a.arm(&COSTS).unwrap();
        let b = p.type_b.arm(&COSTS).unwrap();
        for beta in [0.9, 0.95, 0.97] {
            for j in 1..3 {
                let ia = oracle_index(&a, 1, j, beta, 1e-9).unwrap();
                let ib = oracle_index(&b, 1, j, beta, 1e-9).unwrap();
                assert!(ib < ia, "beta {beta} action {j}: B {ib} vs A {ia}");
            }
        }
    }

    #[test]
    fn qualitative_constraints_hold() {
        let p = TwoProcessParams::default();
        let (a, b) = (&p.type_a, &p.type_b);
        assert!(a.stay_good[1] >= 0.9 && a.stay_good[2] >= 0.9);
        assert!(a.stay_good[0] <= 0.1);
        assert!(a.recover.iter().all(|&x| x <= 0.15));
        assert!(b.stay_good[0] >= 0.9);
        assert!(b.recover[1] >= 0.9 && b.recover[2] >= 0.9);
        for c in [a, b] {
            assert!(c.stay_good[2] >= c.stay_good[1] && c.recover[2] >= c.recover[1]);
            assert!(c.stay_good[1] >= c.stay_good[0] && c.recover[1] >= c.recover[0]);
        }
    }
}
