//! Arms, instances, and budget feasibility.
//!
//! An arm is a finite MDP with state-only rewards `r(s)`, a non-decreasing
//! cost ladder starting at `c_0 = 0`, and a dense `|S| x M x |S|` transition
//! tensor stored row-major as `[s][a][s']`. Arms may differ in size.
//!
//! Instances are stored on disk as TOML:
//!
//! ```toml
//! discount = 0.95
//! budget = 8.0
//!
//! [[arms]]
//! costs = [0.0, 1.0, 2.0]
//! rewards = [0.0, 1.0]
//! transitions = [0.9, 0.1, 0.5, 0.5, 0.2, 0.8, 0.9, 0.1, 0.5, 0.5, 0.2, 0.8]
//! ```

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RmabError};

/// Absolute slack allowed when comparing a summed cost against the budget.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// Absolute slack allowed on transition row sums.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// One broken invariant found by [`ArmModel::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Empty,
    Shape {
        expected: usize,
        got: usize,
    },
    RowSum {
        state: usize,
        action: usize,
        sum: f64,
    },
    Probability {
        state: usize,
        action: usize,
        next: usize,
        value: f64,
    },
    FirstCostNonZero(f64),
    CostsNotSorted {
        index: usize,
    },
    NonFiniteCost {
        index: usize,
    },
    NonFiniteReward {
        state: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "arm needs at least one state and one action"),
            Violation::Shape { expected, got } => {
                write!(
                    f,
                    "transition tensor has {got} entries, expected {expected}"
                )
            }
            Violation::RowSum { state, action, sum } => {
                write!(f, "row (s={state}, a={action}) sums to {sum}")
            }
            Violation::Probability {
                state,
                action,
                next,
                value,
            } => {
                write!(
                    f,
                    "T({state},{action},{next}) = {value} is not a probability"
                )
            }
            Violation::FirstCostNonZero(c) => write!(f, "c_0 = {c}, passive action must be free"),
            Violation::CostsNotSorted { index } => {
                write!(f, "costs not sorted: c_{index} < c_{}", index - 1)
            }
            Violation::NonFiniteCost { index } => write!(f, "cost c_{index} is not finite"),
            Violation::NonFiniteReward { state } => write!(f, "reward r({state}) is not finite"),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ArmSpec {
    costs: Vec<f64>,
    rewards: Vec<f64>,
    transitions: Vec<f64>,
}

/// A single arm's MDP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ArmSpec", into = "ArmSpec")]
pub struct ArmModel {
    costs: Vec<f64>,
    rewards: Vec<f64>,
    transitions: Vec<f64>,
}

impl TryFrom<ArmSpec> for ArmModel {
    type Error = RmabError;

    fn try_from(spec: ArmSpec) -> Result<Self> {
        ArmModel::new(spec.costs, spec.rewards, spec.transitions)
    }
}

impl From<ArmModel> for ArmSpec {
    fn from(arm: ArmModel) -> Self {
        ArmSpec {
            costs: arm.costs,
            rewards: arm.rewards,
            transitions: arm.transitions,
        }
    }
}

impl ArmModel {
    /// Builds an arm, refusing it if any invariant is broken.
    pub fn new(costs: Vec<f64>, rewards: Vec<f64>, transitions: Vec<f64>) -> Result<Self> {
        let arm = Self::unchecked(costs, rewards, transitions);
        arm.validate()
            .map_err(|violations| RmabError::InvalidArm { arm: 0, violations })?;
        Ok(arm)
    }

    /// Builds an arm without validation. Use [`validate`](Self::validate) afterwards.
    pub fn unchecked(costs: Vec<f64>, rewards: Vec<f64>, transitions: Vec<f64>) -> Self {
        Self {
            costs,
            rewards,
            transitions,
        }
    }

    pub fn n_states(&self) -> usize {
        self.rewards.len()
    }

    pub fn n_actions(&self) -> usize {
        self.costs.len()
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn cost(&self, a: usize) -> f64 {
        self.costs[a]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn reward(&self, s: usize) -> f64 {
        self.rewards[s]
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    /// The next-state distribution `T(s, a, .)`.
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let n = self.n_states();
        let start = (s * self.n_actions() + a) * n;
        &self.transitions[start..start + n]
    }

    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.row(s, a)[next]
    }

    pub fn max_reward(&self) -> f64 {
        self.rewards
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest strictly positive cost, if any.
    pub fn min_positive_cost(&self) -> Option<f64> {
        self.costs
            .iter()
            .copied()
            .filter(|&c| c > 0.0)
            .fold(None, |acc, c| Some(acc.map_or(c, |m: f64| m.min(c))))
    }

    /// Reports every invariant violation rather than stopping at the first.
    pub fn validate(&self) -> std::result::Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        let (ns, na) = (self.n_states(), self.n_actions());
        if ns == 0 || na == 0 {
            out.push(Violation::Empty);
            return Err(out);
        }
        for (i, &c) in self.costs.iter().enumerate() {
            if !c.is_finite() {
                out.push(Violation::NonFiniteCost { index: i });
            }
        }
        if self.costs[0] != 0.0 {
            out.push(Violation::FirstCostNonZero(self.costs[0]));
        }
        for i in 1..na {
            if self.costs[i] < self.costs[i - 1] {
                out.push(Violation::CostsNotSorted { index: i });
            }
        }
        for (s, &r) in self.rewards.iter().enumerate() {
            if !r.is_finite() {
                out.push(Violation::NonFiniteReward { state: s });
            }
        }
        let expected = ns * na * ns;
        if self.transitions.len() != expected {
            out.push(Violation::Shape {
                expected,
                got: self.transitions.len(),
            });
            return Err(out);
        }
        for s in 0..ns {
            for a in 0..na {
                let row = self.row(s, a);
                for (next, &p) in row.iter().enumerate() {
                    if !(0.0..=1.0).contains(&p) {
                        out.push(Violation::Probability {
                            state: s,
                            action: a,
                            next,
                            value: p,
                        });
                    }
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    out.push(Violation::RowSum {
                        state: s,
                        action: a,
                        sum,
                    });
                }
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }
}

/// Per-arm action choice. Exactly one action per arm.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionVector(pub Vec<usize>);

impl ActionVector {
    pub fn passive(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// Joint state of all arms.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateVector(pub Vec<usize>);

impl StateVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceSpec {
    discount: f64,
    budget: f64,
    arms: Vec<ArmModel>,
}

/// `N` arms sharing a per-round budget, with a common discount factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceSpec", into = "InstanceSpec")]
pub struct RmabInstance {
    arms: Vec<ArmModel>,
    budget: f64,
    discount: f64,
}

impl TryFrom<InstanceSpec> for RmabInstance {
    type Error = RmabError;

    fn try_from(spec: InstanceSpec) -> Result<Self> {
        RmabInstance::new(spec.arms, spec.budget, spec.discount)
    }
}

impl From<RmabInstance> for InstanceSpec {
    fn from(inst: RmabInstance) -> Self {
        InstanceSpec {
            discount: inst.discount,
            budget: inst.budget,
            arms: inst.arms,
        }
    }
}

impl RmabInstance {
    pub fn new(arms: Vec<ArmModel>, budget: f64, discount: f64) -> Result<Self> {
        if arms.is_empty() {
            return Err(RmabError::InvalidInstance(
                "instance needs at least one arm".into(),
            ));
        }
        if !(budget >= 0.0 && budget.is_finite()) {
            return Err(RmabError::InvalidInstance(format!(
                "budget {budget} must be >= 0"
            )));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(RmabError::InvalidInstance(format!(
                "discount {discount} must lie in [0, 1)"
            )));
        }
        for (i, arm) in arms.iter().enumerate() {
            arm.validate()
                .map_err(|violations| RmabError::InvalidArm { arm: i, violations })?;
        }
        Ok(Self {
            arms,
            budget,
            discount,
        })
    }

    pub fn arms(&self) -> &[ArmModel] {
        &self.arms
    }

    pub fn arm(&self, i: usize) -> &ArmModel {
        &self.arms[i]
    }

    pub fn n_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Same arms and discount under a different budget.
    pub fn with_budget(&self, budget: f64) -> Result<Self> {
        Self::new(self.arms.clone(), budget, self.discount)
    }

    /// Same arms and budget under a different discount.
    pub fn with_discount(&self, discount: f64) -> Result<Self> {
        Self::new(self.arms.clone(), self.budget, discount)
    }

    /// Summed cost of `a`.
    pub fn action_cost(&self, a: &ActionVector) -> Result<f64> {
        self.check_actions(a)?;
        Ok(a.0
            .iter()
            .zip(&self.arms)
            .map(|(&j, arm)| arm.cost(j))
            .sum())
    }

    /// Whether `a` fits within the budget (with [`FEASIBILITY_TOL`] slack).
    pub fn is_feasible(&self, a: &ActionVector) -> Result<bool> {
        Ok(self.action_cost(a)? <= self.budget + FEASIBILITY_TOL)
    }

    pub fn check_actions(&self, a: &ActionVector) -> Result<()> {
        if a.len() != self.n_arms() {
            return Err(RmabError::LengthMismatch {
                expected: self.n_arms(),
                got: a.len(),
            });
        }
        for (i, (&j, arm)) in a.0.iter().zip(&self.arms).enumerate() {
            if j >= arm.n_actions() {
                return Err(RmabError::ActionOutOfRange {
                    arm: i,
                    action: j,
                    n_actions: arm.n_actions(),
                });
            }
        }
        Ok(())
    }

    pub fn check_states(&self, s: &StateVector) -> Result<()> {
        if s.len() != self.n_arms() {
            return Err(RmabError::LengthMismatch {
                expected: self.n_arms(),
                got: s.len(),
            });
        }
        for (i, (&x, arm)) in s.0.iter().zip(&self.arms).enumerate() {
            if x >= arm.n_states() {
                return Err(RmabError::StateOutOfRange {
                    arm: i,
                    state: x,
                    n_states: arm.n_states(),
                });
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| RmabError::Parse(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| RmabError::Parse(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn identity_arm(costs: Vec<f64>, n_states: usize) -> ArmModel {
        let na = costs.len();
        let mut t = vec![0.0; n_states * na * n_states];
        for s in 0..n_states {
            for a in 0..na {
                t[(s * na + a) * n_states + s] = 1.0;
            }
        }
        ArmModel::new(costs, vec![0.0; n_states], t).unwrap()
    }

    fn three_arms(budget: f64) -> RmabInstance {
        let arm = identity_arm(vec![0.0, 1.0, 2.0], 2);
        RmabInstance::new(vec![arm; 3], budget, 0.9).unwrap()
    }

    #[test]
    fn action_cost_examples() {
        let inst = three_arms(3.0);
        assert_eq!(inst.action_cost(&ActionVector(vec![0, 0, 0])).unwrap(), 0.0);
        assert_eq!(inst.action_cost(&ActionVector(vec![2, 1, 0])).unwrap(), 3.0);

        let arm = identity_arm(vec![0.0, 0.3, 0.7], 1);
        let single = RmabInstance::new(vec![arm], 1.0, 0.9).unwrap();
        assert_eq!(single.action_cost(&ActionVector(vec![2])).unwrap(), 0.7);
    }

    #[test]
    fn action_cost_rejects_bad_index() {
        let inst = three_arms(3.0);
        assert!(matches!(
            inst.action_cost(&ActionVector(vec![0, 3, 0])),
            Err(RmabError::ActionOutOfRange {
                arm: 1,
                action: 3,
                ..
            })
        ));
        assert!(matches!(
            inst.action_cost(&ActionVector(vec![0, 0])),
            Err(RmabError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn feasibility_examples() {
        assert!(three_arms(0.0)
            .is_feasible(&ActionVector::passive(3))
            .unwrap());
        let inst = three_arms(3.0);
        assert!(inst.is_feasible(&ActionVector(vec![2, 1, 0])).unwrap());
        assert!(!inst.is_feasible(&ActionVector(vec![2, 2, 0])).unwrap());
    }

    #[test]
    fn feasibility_tolerates_float_noise() {
        let arm = identity_arm(vec![0.0, 0.1, 0.2], 1);
        let inst = RmabInstance::new(vec![arm; 3], 0.3, 0.9).unwrap();
        // 0.1 + 0.2 = 0.30000000000000004
        assert!(inst.is_feasible(&ActionVector(vec![1, 2, 0])).unwrap());
    }

    #[test]
    fn validate_accepts_identity() {
        assert!(identity_arm(vec![0.0, 1.0], 3).validate().is_ok());
    }

    #[test]
    fn validate_reports_short_row() {
        let mut arm = identity_arm(vec![0.0, 1.0], 2);
        arm.transitions[(1 * 2 + 0) * 2 + 1] = 0.9;
        let v = arm.validate().unwrap_err();
        assert!(v.contains(&Violation::RowSum {
            state: 1,
            action: 0,
            sum: 0.9
        }));
    }

    #[test]
    fn validate_reports_cost_problems() {
        let mut arm = identity_arm(vec![0.0, 1.0], 1);
        arm.costs = vec![0.5, 0.2];
        let v = arm.validate().unwrap_err();
        assert!(v.contains(&Violation::FirstCostNonZero(0.5)));
        assert!(v.contains(&Violation::CostsNotSorted { index: 1 }));
    }

    #[test]
    fn validate_collects_all_violations() {
        let arm = ArmModel::unchecked(vec![1.0], vec![f64::NAN], vec![1.5]);
        let v = arm.validate().unwrap_err();
        assert_eq!(v.len(), 4, "{v:?}");
    }

    #[test]
    fn instance_rejects_bad_parameters() {
        let arm = identity_arm(vec![0.0, 1.0], 1);
        assert!(RmabInstance::new(vec![], 1.0, 0.9).is_err());
        assert!(RmabInstance::new(vec![arm.clone()], -1.0, 0.9).is_err());
        assert!(RmabInstance::new(vec![arm], 1.0, 1.0).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let arm = ArmModel::new(
            vec![0.0, 0.1 + 0.2, 1.0 / 3.0],
            vec![0.1, std::f64::consts::PI],
            vec![
                0.3,
                0.7,
                1.0 / 3.0,
                2.0 / 3.0,
                1.0,
                0.0,
                0.25,
                0.75,
                0.1,
                0.9,
                0.5,
                0.5,
            ],
        )
        .unwrap();
        let inst = RmabInstance::new(vec![arm], 1.234567890123, 0.95).unwrap();
        let back = RmabInstance::from_toml(&inst.to_toml().unwrap()).unwrap();
        assert_eq!(inst, back);
    }

    #[test]
    fn toml_load_validates() {
        let text = "discount = 0.9\nbudget = 1.0\n[[arms]]\ncosts = [0.0]\nrewards = [1.0]\ntransitions = [0.5]\n";
        assert!(RmabInstance::from_toml(text).is_err());
    }
}
