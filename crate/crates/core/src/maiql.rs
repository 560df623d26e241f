//! Multi-action index Q-learning and its binary-action special case.
//!
//! For every arm, state `i` and non-passive action `j` the learner keeps a
//! full Q-table trained with action costs charged at the current estimate
//! `λ[i, j]`. On a slower clock `λ[i, j]` moves toward the point where the
//! table is indifferent between `a_j` and `a_{j-1}` in state `i`.

use std::io::Write;

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{ActionVector, RmabInstance, StateVector, FEASIBILITY_TOL};
use crate::schedules::{random_action, random_action_with_costs, ScheduleParams, VisitCounter};
use crate::simulator::Experience;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    #[default]
    Discounted,
    /// Relative-value form: the mean of the table replaces discounting.
    Average,
}

/// Greedy allocation by multi-action index.
///
/// `indexes[i][j - 1]` is the index of action `a_j` on arm `i` in its current
/// state. Starting from all-passive, each round moves the arm whose next action
/// has the highest index up one action, as long as the increment fits in the
/// remaining budget. Ties go to the lowest arm.
pub fn greedy_index_allocation(indexes: &[Vec<f64>], instance: &RmabInstance) -> ActionVector {
    let n = instance.n_arms();
    let mut theta = vec![0usize; n];
    let mut remaining = instance.budget();
    loop {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..n {
            let costs = instance.arm(i).costs();
            let next = theta[i] + 1;
            if next >= costs.len() {
                continue;
            }
            if costs[next] - costs[theta[i]] > remaining + FEASIBILITY_TOL {
                continue;
            }
            let idx = indexes[i][theta[i]];
            if best.is_none_or(|(_, b)| idx > b) {
                best = Some((i, idx));
            }
        }
        match best {
            Some((i, _)) => {
                let costs = instance.arm(i).costs();
                remaining -= costs[theta[i] + 1] - costs[theta[i]];
                theta[i] += 1;
            }
            None => break,
        }
    }
    ActionVector(theta)
}

#[derive(Debug, Clone)]
struct ArmTables {
    n_states: usize,
    n_actions: usize,
    costs: Vec<f64>,
    /// `[(i * (M - 1) + j - 1)][s][a]`
    q: Vec<f64>,
    /// `[i * (M - 1) + j - 1]`
    lambda: Vec<f64>,
}

impl ArmTables {
    fn target(&self, i: usize, j: usize) -> usize {
        i * (self.n_actions - 1) + j - 1
    }

    fn table(&self, k: usize) -> &[f64] {
        let size = self.n_states * self.n_actions;
        &self.q[k * size..(k + 1) * size]
    }
}

/// Q-tables and index estimates for every arm.
#[derive(Debug, Clone)]
pub struct Maiql {
    arms: Vec<ArmTables>,
    counter: VisitCounter,
    params: ScheduleParams,
    beta: f64,
    mode: RewardMode,
    lambda_bound: f64,
    /// Index steps only run when `t % gate == 0`; the number of arms by default.
    gate: u64,
    warned_equal_costs: bool,
}

impl Maiql {
    pub fn new(instance: &RmabInstance, params: ScheduleParams, lambda_bound: f64) -> Self {
        let arms = instance
            .arms()
            .iter()
            .map(|arm| {
                let (ns, na) = (arm.n_states(), arm.n_actions());
                let targets = ns * na.saturating_sub(1);
                ArmTables {
                    n_states: ns,
                    n_actions: na,
                    costs: arm.costs().to_vec(),
                    q: vec![0.0; targets * ns * na],
                    lambda: vec![0.0; targets],
                }
            })
            .collect();
        Self {
            arms,
            counter: VisitCounter::new(instance),
            params,
            beta: instance.discount(),
            mode: RewardMode::Discounted,
            lambda_bound: lambda_bound.abs(),
            gate: instance.n_arms() as u64,
            warned_equal_costs: false,
        }
    }

    pub fn with_mode(mut self, mode: RewardMode) -> Self {
        self.mode = mode;
        self
    }

    /// Overrides the `t mod gate` clock of the index step.
    pub fn with_gate(mut self, gate: u64) -> Self {
        self.gate = gate.max(1);
        self
    }

    pub fn params(&self) -> &ScheduleParams {
        &self.params
    }

    pub fn lambda_bound(&self) -> f64 {
        self.lambda_bound
    }

    /// Current estimate of the index of `a_j` (j >= 1) in state `s` of `arm`.
    pub fn index(&self, arm: usize, s: usize, j: usize) -> f64 {
        let t = &self.arms[arm];
        t.lambda[t.target(s, j)]
    }

    pub fn set_index(&mut self, arm: usize, s: usize, j: usize, value: f64) {
        let t = &mut self.arms[arm];
        let k = t.target(s, j);
        t.lambda[k] = value;
    }

    /// `Q` of the table that targets `(i, j)`, evaluated at `(s, a)`.
    pub fn q(&self, arm: usize, i: usize, j: usize, s: usize, a: usize) -> f64 {
        let t = &self.arms[arm];
        t.table(t.target(i, j))[s * t.n_actions + a]
    }

    pub fn set_q(&mut self, arm: usize, i: usize, j: usize, s: usize, a: usize, value: f64) {
        let t = &mut self.arms[arm];
        let size = t.n_states * t.n_actions;
        let k = t.target(i, j);
        t.q[k * size + s * t.n_actions + a] = value;
    }

    /// Index estimates for each arm's current state, `[arm][j - 1]`.
    pub fn current_indexes(&self, states: &StateVector) -> Vec<Vec<f64>> {
        states
            .0
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                (1..self.arms[i].n_actions)
                    .map(|j| self.index(i, s, j))
                    .collect()
            })
            .collect()
    }

    /// Q steps for every target table, then the gated index step.
    pub fn update(&mut self, batch: &[Experience], t: u64) {
        let gate_open = t % self.gate == 0;
        for e in batch {
            let nu = self.counter.bump(e.arm, e.state, e.action);
            let alpha = self.params.alpha(nu).expect("counter starts at 1");
            let tables = &mut self.arms[e.arm];
            let (ns, na) = (tables.n_states, tables.n_actions);
            let size = ns * na;
            let cost = tables.costs[e.action];
            for k in 0..tables.lambda.len() {
                let lam = tables.lambda[k];
                let q = &mut tables.q[k * size..(k + 1) * size];
                let next = &q[e.next_state * na..(e.next_state + 1) * na];
                let max_next = next.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let target = match self.mode {
                    RewardMode::Discounted => e.reward - cost * lam + self.beta * max_next,
                    RewardMode::Average => {
                        let f = q.iter().sum::<f64>() / size as f64;
                        e.reward - cost * lam + max_next - f
                    }
                };
                let cell = &mut q[e.state * na + e.action];
                *cell += alpha * (target - *cell);
            }
            if e.action == 0 || !gate_open {
                continue;
            }
            let dc = tables.costs[e.action] - tables.costs[e.action - 1];
            if dc <= 0.0 {
                if !self.warned_equal_costs {
                    warn!(
                        "arm {} actions {} and {} cost the same; index step skipped",
                        e.arm,
                        e.action,
                        e.action - 1
                    );
                    self.warned_equal_costs = true;
                }
                continue;
            }
            let gamma = self.params.gamma(nu).expect("counter starts at 1");
            let k = tables.target(e.state, e.action);
            let q = tables.table(k);
            let diff = q[e.state * na + e.action] - q[e.state * na + e.action - 1];
            let lam = tables.lambda[k] + gamma * diff / dc;
            tables.lambda[k] = lam.clamp(-self.lambda_bound, self.lambda_bound);
        }
    }

    pub fn greedy(&self, states: &StateVector, instance: &RmabInstance) -> ActionVector {
        greedy_index_allocation(&self.current_indexes(states), instance)
    }

    pub fn select<R: Rng + ?Sized>(
        &self,
        states: &StateVector,
        instance: &RmabInstance,
        t: u64,
        rng: &mut R,
    ) -> ActionVector {
        if self.params.explore(t, rng) {
            random_action(instance, rng)
        } else {
            self.greedy(states, instance)
        }
    }

    /// Writes `arm,state,action,lambda` rows.
    pub fn write_indexes_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["arm", "state", "action", "lambda"])?;
        for (arm, t) in self.arms.iter().enumerate() {
            for s in 0..t.n_states {
                for j in 1..t.n_actions {
                    w.write_record(&[
                        arm.to_string(),
                        s.to_string(),
                        j.to_string(),
                        t.lambda[t.target(s, j)].to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Binary-action index learner planning with `{a_0, a_j}` only.
#[derive(Debug, Clone)]
pub struct Wibql {
    inner: Maiql,
    action: usize,
    action_costs: Vec<f64>,
}

impl Wibql {
    /// `action` is the fixed non-passive action `a_j`, `j >= 1`.
    pub fn new(
        instance: &RmabInstance,
        action: usize,
        params: ScheduleParams,
        lambda_bound: f64,
    ) -> Result<Self> {
        let reduced = reduce_to_binary(instance, action)?;
        Ok(Self {
            inner: Maiql::new(&reduced, params, lambda_bound),
            action,
            action_costs: instance.arms().iter().map(|a| a.cost(action)).collect(),
        })
    }

    pub fn action(&self) -> usize {
        self.action
    }

    pub fn index(&self, arm: usize, s: usize) -> f64 {
        self.inner.index(arm, s, 1)
    }

    /// Learns from tuples whose action is `a_0` or `a_j`; others are skipped.
    pub fn update(&mut self, batch: &[Experience], t: u64) {
        let mapped: Vec<Experience> = batch
            .iter()
            .filter(|e| e.action == 0 || e.action == self.action)
            .map(|e| Experience {
                action: usize::from(e.action != 0),
                ..e.clone()
            })
            .collect();
        self.inner.update(&mapped, t);
    }

    /// Plays `a_j` on the `floor(B / c_j)` arms with the highest index.
    pub fn greedy(&self, states: &StateVector, instance: &RmabInstance) -> ActionVector {
        let n = instance.n_arms();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            self.index(b, states.0[b])
                .total_cmp(&self.index(a, states.0[a]))
                .then(a.cmp(&b))
        });
        let mut actions = vec![0; n];
        let mut remaining = instance.budget();
        for i in order {
            let c = self.action_costs[i];
            if c <= remaining + FEASIBILITY_TOL {
                actions[i] = self.action;
                remaining -= c;
            }
        }
        ActionVector(actions)
    }

    /// Exploration draws from the restricted `{a_0, a_j}` action sets.
    pub fn select<R: Rng + ?Sized>(
        &self,
        states: &StateVector,
        instance: &RmabInstance,
        t: u64,
        rng: &mut R,
    ) -> ActionVector {
        if self.inner.params().explore(t, rng) {
            let ladders: Vec<[f64; 2]> = self.action_costs.iter().map(|&c| [0.0, c]).collect();
            let costs: Vec<&[f64]> = ladders.iter().map(|l| &l[..]).collect();
            let picked = random_action_with_costs(&costs, instance.budget(), rng);
            ActionVector(picked.into_iter().map(|a| a * self.action).collect())
        } else {
            self.greedy(states, instance)
        }
    }

    pub fn write_indexes_csv<W: Write>(&self, out: W) -> Result<()> {
        self.inner.write_indexes_csv(out)
    }
}

/// Copy of `instance` keeping only actions `0` and `action` on each arm.
pub fn reduce_to_binary(instance: &RmabInstance, action: usize) -> Result<RmabInstance> {
    let arms = instance
        .arms()
        .iter()
        .enumerate()
        .map(|(i, arm)| {
            if action == 0 || action >= arm.n_actions() {
                return Err(crate::error::RmabError::ActionOutOfRange {
                    arm: i,
                    action,
                    n_actions: arm.n_actions(),
                });
            }
            let ns = arm.n_states();
            let mut t = Vec::with_capacity(ns * 2 * ns);
            for s in 0..ns {
                t.extend_from_slice(arm.row(s, 0));
                t.extend_from_slice(arm.row(s, action));
            }
            crate::model::ArmModel::new(vec![0.0, arm.cost(action)], arm.rewards().to_vec(), t)
        })
        .collect::<Result<Vec<_>>>()?;
    RmabInstance::new(arms, instance.budget(), instance.discount())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::identity_arm;
    use crate::model::ArmModel;
    use crate::rng::stream;
    use approx::assert_relative_eq;

    fn exp(state: usize, action: usize, reward: f64, next_state: usize) -> Experience {
        Experience {
            arm: 0,
            state,
            action,
            reward,
            next_state,
            use_count: 0,
        }
    }

    /// State 1 pays 1 and always falls to 0; in state 0 action 1 (cost 1) lifts to 1.
    pub(crate) fn lift_arm() -> ArmModel {
        ArmModel::new(
            vec![0.0, 1.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn first_q_step() {
        let inst = RmabInstance::new(vec![identity_arm(vec![0.0, 1.0], 2)], 1.0, 0.9).unwrap();
        let params = ScheduleParams::new(0.4, 0.2, 500, 0.99).unwrap();
        let mut m = Maiql::new(&inst, params, 3.0);
        m.update(&[exp(0, 0, 1.0, 1)], 1);
        for i in 0..2 {
            assert_relative_eq!(m.q(0, i, 1, 0, 0), 0.4);
        }
    }

    #[test]
    fn index_step_arithmetic() {
        let inst = RmabInstance::new(vec![identity_arm(vec![0.0, 1.0], 2)], 1.0, 0.9).unwrap();
        // alpha tiny so the Q step barely moves the values under test
        let params = ScheduleParams::new(1e-300, 0.2, 500, 0.99).unwrap();
        let mut m = Maiql::new(&inst, params, 3.0);
        m.set_q(0, 0, 1, 0, 1, 1.0);
        m.set_q(0, 0, 1, 0, 0, 0.5);
        m.update(&[exp(0, 1, 0.0, 0)], 1);
        assert_relative_eq!(m.index(0, 0, 1), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn gate_blocks_index_step() {
        let inst = RmabInstance::new(vec![identity_arm(vec![0.0, 1.0], 2); 4], 1.0, 0.9).unwrap();
        let params = ScheduleParams::new(0.4, 0.2, 500, 0.99).unwrap();
        let mut m = Maiql::new(&inst, params, 3.0);
        m.update(&[exp(0, 1, 1.0, 0)], 3);
        assert_eq!(m.index(0, 0, 1), 0.0);
        m.update(&[exp(0, 1, 1.0, 0)], 4);
        assert!(m.index(0, 0, 1) > 0.0);
    }

    #[test]
    fn index_is_clipped() {
        let inst = RmabInstance::new(vec![identity_arm(vec![0.0, 1.0], 1)], 1.0, 0.9).unwrap();
        let params = ScheduleParams::new(0.4, 0.2, 500, 0.99).unwrap();
        let mut m = Maiql::new(&inst, params, 0.05);
        m.set_q(0, 0, 1, 0, 1, 100.0);
        m.update(&[exp(0, 1, 0.0, 0)], 1);
        assert_eq!(m.index(0, 0, 1), 0.05);
    }

    #[test]
    fn greedy_examples() {
        let inst = RmabInstance::new(vec![identity_arm(vec![0.0, 1.0], 1); 2], 1.0, 0.9).unwrap();
        assert_eq!(
            greedy_index_allocation(&[vec![0.9], vec![0.1]], &inst).0,
            vec![1, 0]
        );
        assert_eq!(
            greedy_index_allocation(&[vec![0.5], vec![0.5]], &inst).0,
            vec![1, 0]
        );
        let broke = inst.with_budget(0.0).unwrap();
        assert_eq!(
            greedy_index_allocation(&[vec![0.9], vec![0.1]], &broke).0,
            vec![0, 0]
        );
    }

    #[test]
    fn greedy_climbs_ladders() {
        let inst =
            RmabInstance::new(vec![identity_arm(vec![0.0, 1.0, 2.0], 1); 3], 3.0, 0.9).unwrap();
        let idx = vec![vec![2.0, 1.5], vec![1.8, 0.1], vec![0.2, 0.1]];
        // picks 2.0 (arm 0 -> a1), 1.8 (arm 1 -> a1), 1.5 (arm 0 -> a2)
        assert_eq!(greedy_index_allocation(&idx, &inst).0, vec![2, 1, 0]);
        // budget is always spent even on negative indexes
        let neg = vec![vec![-1.0, -2.0], vec![-0.5, -3.0], vec![-4.0, -4.0]];
        assert_eq!(
            inst.action_cost(&greedy_index_allocation(&neg, &inst))
                .unwrap(),
            3.0
        );
    }

    #[test]
    fn wibql_top_k() {
        let arms = vec![identity_arm(vec![0.0, 1.0, 2.0], 1); 16];
        let inst = RmabInstance::new(arms, 4.0, 0.9).unwrap();
        let params = ScheduleParams::new(0.4, 0.2, 500, 0.99).unwrap();
        let w1 = Wibql::new(&inst, 1, params, 3.0).unwrap();
        let s = StateVector(vec![0; 16]);
        let a = w1.greedy(&s, &inst);
        assert_eq!(a.0.iter().filter(|&&x| x == 1).count(), 4);
        let w2 = Wibql::new(&inst, 2, params, 3.0).unwrap();
        let a = w2.greedy(&s, &inst);
        assert_eq!(a.0.iter().filter(|&&x| x == 2).count(), 2);
        let broke = inst.with_budget(0.0).unwrap();
        assert_eq!(w1.greedy(&s, &broke), ActionVector::passive(16));
        let mut rng = stream(0, 0);
        for t in 1..2000 {
            let a = w2.select(&s, &inst, t, &mut rng);
            assert!(a.0.iter().all(|&x| x == 0 || x == 2));
            assert!(inst.is_feasible(&a).unwrap());
        }
    }

    #[test]
    fn deterministic_arm_index_converges() {
        let inst = RmabInstance::new(vec![lift_arm()], 1.0, 0.9).unwrap();
        let params = ScheduleParams::new(0.4, 0.2, 500, 0.99).unwrap();
        let mut m = Maiql::new(&inst, params, 10.0);
        let mut rng = stream(2, 0);
        let mut s = 0;
        for t in 1..=100_000u64 {
            let a = rng.random_range(0..2);
            let next = if s == 1 { 0 } else { a };
            let r = s as f64;
            m.update(&[exp(s, a, r, next)], t);
            s = next;
        }
        assert!((m.index(0, 0, 1) - 0.9).abs() < 0.1, "{}", m.index(0, 0, 1));
    }
}
