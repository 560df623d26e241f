//! Lagrange-policy Q-learning.
//!
//! Every arm keeps one Q-table per point of a uniform λ grid. Selection locates
//! the grid point minimizing the Lagrange bound
//! `J(s, λ) = λ B / (1 - β) + Σ_i V_i(s_i, λ)` by scanning slopes, then solves a
//! multiple-choice knapsack over the Q-values at that point. The approximate
//! index learner reads indexes off the same tables.

use std::io::Write;

use rand::Rng;

use crate::error::{Result, RmabError};
use crate::knapsack::{self, KnapsackProblem};
use crate::maiql::greedy_index_allocation;
use crate::model::{ActionVector, RmabInstance, StateVector};
use crate::schedules::{random_action, ScheduleParams, VisitCounter};
use crate::simulator::Experience;

/// Uniform points `λ_p = p λ_max / n_lam` for `p = 0..=n_lam`.
///
/// The last point only serves the slope of the final segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaGrid {
    lambda_max: f64,
    n_lam: usize,
}

impl LambdaGrid {
    pub fn new(lambda_max: f64, n_lam: usize) -> Result<Self> {
        if n_lam == 0 || !lambda_max.is_finite() || lambda_max < 0.0 {
            return Err(RmabError::Config(format!(
                "lambda grid needs n_lam >= 1 and finite lambda_max >= 0 (got {n_lam}, {lambda_max})"
            )));
        }
        Ok(Self { lambda_max, n_lam })
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn n_lam(&self) -> usize {
        self.n_lam
    }

    /// Stored points, `n_lam + 1`.
    pub fn len(&self) -> usize {
        self.n_lam + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, p: usize) -> f64 {
        p as f64 * self.lambda_max / self.n_lam as f64
    }

    pub fn spacing(&self) -> f64 {
        self.lambda_max / self.n_lam as f64
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|p| self.point(p))
    }
}

/// `max_i max r_i / (min positive c_i (1 - β))` over arms with a positive cost.
pub fn lambda_max_bound(instance: &RmabInstance) -> Result<f64> {
    let one_minus_beta = 1.0 - instance.discount();
    instance
        .arms()
        .iter()
        .filter_map(|arm| {
            arm.min_positive_cost()
                .map(|c| arm.max_reward().max(0.0) / (c * one_minus_beta))
        })
        .reduce(f64::max)
        .ok_or(RmabError::NoPositiveCost)
}

/// Per-arm `Q(s, a, λ_p)` stored as `[s][a][p]` so every grid sweep is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaQTable {
    grid: LambdaGrid,
    shapes: Vec<(usize, usize)>,
    data: Vec<Vec<f64>>,
}

impl LambdaQTable {
    pub fn zeros(instance: &RmabInstance, grid: LambdaGrid) -> Self {
        let shapes: Vec<(usize, usize)> = instance
            .arms()
            .iter()
            .map(|a| (a.n_states(), a.n_actions()))
            .collect();
        let data = shapes
            .iter()
            .map(|&(s, m)| vec![0.0; s * m * grid.len()])
            .collect();
        Self { grid, shapes, data }
    }

    pub fn grid(&self) -> &LambdaGrid {
        &self.grid
    }

    pub fn n_arms(&self) -> usize {
        self.shapes.len()
    }

    pub fn shape(&self, arm: usize) -> (usize, usize) {
        self.shapes[arm]
    }

    fn offset(&self, arm: usize, s: usize, a: usize) -> usize {
        (s * self.shapes[arm].1 + a) * self.grid.len()
    }

    /// `Q(s, a, λ_p)` for every `p`.
    pub fn series(&self, arm: usize, s: usize, a: usize) -> &[f64] {
        let o = self.offset(arm, s, a);
        &self.data[arm][o..o + self.grid.len()]
    }

    pub fn series_mut(&mut self, arm: usize, s: usize, a: usize) -> &mut [f64] {
        let o = self.offset(arm, s, a);
        let len = self.grid.len();
        &mut self.data[arm][o..o + len]
    }

    pub fn q(&self, arm: usize, p: usize, s: usize, a: usize) -> f64 {
        self.data[arm][self.offset(arm, s, a) + p]
    }

    /// `V(s, λ_p) = max_a Q(s, a, λ_p)`.
    pub fn value(&self, arm: usize, s: usize, p: usize) -> f64 {
        (0..self.shapes[arm].1)
            .map(|a| self.q(arm, p, s, a))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `Q(s, ·, λ_p)` as one row.
    pub fn values_at(&self, arm: usize, s: usize, p: usize) -> Vec<f64> {
        (0..self.shapes[arm].1)
            .map(|a| self.q(arm, p, s, a))
            .collect()
    }

    /// Writes `arm,state,action,lambda,q` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["arm", "state", "action", "lambda", "q"])?;
        for (arm, &(ns, na)) in self.shapes.iter().enumerate() {
            for s in 0..ns {
                for a in 0..na {
                    for (p, &q) in self.series(arm, s, a).iter().enumerate() {
                        w.write_record(&[
                            arm.to_string(),
                            s.to_string(),
                            a.to_string(),
                            self.grid.point(p).to_string(),
                            q.to_string(),
                        ])?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// First grid index where the summed slope of `V_i(s_i, ·)` reaches
/// `-B / (1 - β)`; `n_lam - 1` if the threshold is never reached.
pub fn find_lambda_min(
    table: &LambdaQTable,
    states: &StateVector,
    budget: f64,
    beta: f64,
) -> usize {
    let grid = table.grid();
    let n_lam = grid.n_lam();
    let dl = grid.spacing();
    if dl <= 0.0 {
        return 0;
    }
    let threshold = -budget / (1.0 - beta);
    let mut prev: Vec<f64> = states
        .0
        .iter()
        .enumerate()
        .map(|(i, &s)| table.value(i, s, 0))
        .collect();
    for p in 0..n_lam {
        let mut slope_sum = 0.0;
        for (i, &s) in states.0.iter().enumerate() {
            let next = table.value(i, s, p + 1);
            slope_sum += (next - prev[i]) / dl;
            prev[i] = next;
        }
        if slope_sum >= threshold {
            return p;
        }
    }
    n_lam - 1
}

/// The bound `J(s, λ_p)` evaluated directly at grid point `p`.
pub fn lagrange_bound(
    table: &LambdaQTable,
    states: &StateVector,
    budget: f64,
    beta: f64,
    p: usize,
) -> f64 {
    let lam = table.grid().point(p);
    lam * budget / (1.0 - beta)
        + states
            .0
            .iter()
            .enumerate()
            .map(|(i, &s)| table.value(i, s, p))
            .sum::<f64>()
}

/// Knapsack over arbitrary per-arm value rows.
pub fn knapsack_select(values: Vec<Vec<f64>>, instance: &RmabInstance) -> ActionVector {
    let costs = instance.arms().iter().map(|a| a.costs().to_vec()).collect();
    let problem = KnapsackProblem::new(values, costs, instance.budget())
        .expect("instance costs always contain the passive option");
    knapsack::solve(&problem)
}

/// Knapsack over `Q(s_i, ·, λ_p)`.
pub fn knapsack_at(
    table: &LambdaQTable,
    p: usize,
    states: &StateVector,
    instance: &RmabInstance,
) -> ActionVector {
    let values = states
        .0
        .iter()
        .enumerate()
        .map(|(i, &s)| table.values_at(i, s, p))
        .collect();
    knapsack_select(values, instance)
}

/// `λ_p` minimizing `|Q(s, a_j, λ_p) - Q(s, a_{j-1}, λ_p)|`, smallest `p` on ties.
pub fn aprx_index(table: &LambdaQTable, arm: usize, s: usize, j: usize) -> f64 {
    let hi = table.series(arm, s, j);
    let lo = table.series(arm, s, j - 1);
    let mut best = (f64::INFINITY, 0);
    for (p, (a, b)) in hi.iter().zip(lo).enumerate() {
        let d = (a - b).abs();
        if d < best.0 {
            best = (d, p);
        }
    }
    table.grid().point(best.1)
}

/// All approximate indexes for the arms' current states, `[arm][j - 1]`.
pub fn aprx_indexes(table: &LambdaQTable, states: &StateVector) -> Vec<Vec<f64>> {
    states
        .0
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            (1..table.shape(i).1)
                .map(|j| aprx_index(table, i, s, j))
                .collect()
        })
        .collect()
}

/// Learner state: the λ-grid Q-tables plus visit counters.
#[derive(Debug, Clone)]
pub struct Lpql {
    table: LambdaQTable,
    counter: VisitCounter,
    costs: Vec<Vec<f64>>,
    beta: f64,
    params: ScheduleParams,
    scratch: Vec<f64>,
}

impl Lpql {
    pub fn new(instance: &RmabInstance, grid: LambdaGrid, params: ScheduleParams) -> Self {
        Self {
            table: LambdaQTable::zeros(instance, grid),
            counter: VisitCounter::new(instance),
            costs: instance.arms().iter().map(|a| a.costs().to_vec()).collect(),
            beta: instance.discount(),
            params,
            scratch: vec![0.0; grid.len()],
        }
    }

    pub fn table(&self) -> &LambdaQTable {
        &self.table
    }

    pub fn counter(&self) -> &VisitCounter {
        &self.counter
    }

    pub fn params(&self) -> &ScheduleParams {
        &self.params
    }

    /// One Q step at every grid point for each tuple.
    pub fn update(&mut self, batch: &[Experience]) {
        let grid = *self.table.grid();
        let len = grid.len();
        for e in batch {
            let nu = self.counter.bump(e.arm, e.state, e.action);
            let alpha = self.params.alpha(nu).expect("counter starts at 1");
            let n_actions = self.table.shape(e.arm).1;
            let cost = self.costs[e.arm][e.action];
            let step = grid.spacing();
            let next = self.table.offset(e.arm, e.next_state, 0);
            let data = &self.table.data[e.arm];
            let scratch = &mut self.scratch;
            scratch.copy_from_slice(&data[next..next + len]);
            for a in 1..n_actions {
                let row = &data[next + a * len..next + (a + 1) * len];
                for (m, &q) in scratch.iter_mut().zip(row) {
                    *m = m.max(q);
                }
            }
            let o = self.table.offset(e.arm, e.state, e.action);
            let row = &mut self.table.data[e.arm][o..o + len];
            for (p, (q, &mx)) in row.iter_mut().zip(scratch.iter()).enumerate() {
                let target = e.reward - cost * (p as f64 * step) + self.beta * mx;
                *q += alpha * (target - *q);
            }
        }
    }

    pub fn find_lambda_min(&self, states: &StateVector, budget: f64) -> usize {
        find_lambda_min(&self.table, states, budget, self.beta)
    }

    /// Exploitation step: `(action, λ index)`.
    pub fn greedy(&self, states: &StateVector, instance: &RmabInstance) -> (ActionVector, usize) {
        let p = self.find_lambda_min(states, instance.budget());
        (knapsack_at(&self.table, p, states, instance), p)
    }

    /// ε-greedy selection; the λ index is `None` when the round explored.
    pub fn select<R: Rng + ?Sized>(
        &self,
        states: &StateVector,
        instance: &RmabInstance,
        t: u64,
        rng: &mut R,
    ) -> (ActionVector, Option<usize>) {
        if self.params.explore(t, rng) {
            return (random_action(instance, rng), None);
        }
        let (a, p) = self.greedy(states, instance);
        (a, Some(p))
    }

    /// Greedy index allocation over the approximate indexes.
    pub fn aprx_greedy(&self, states: &StateVector, instance: &RmabInstance) -> ActionVector {
        greedy_index_allocation(&aprx_indexes(&self.table, states), instance)
    }

    pub fn aprx_select<R: Rng + ?Sized>(
        &self,
        states: &StateVector,
        instance: &RmabInstance,
        t: u64,
        rng: &mut R,
    ) -> ActionVector {
        if self.params.explore(t, rng) {
            random_action(instance, rng)
        } else {
            self.aprx_greedy(states, instance)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::identity_arm;
    use crate::model::ArmModel;
    use approx::assert_relative_eq;

    fn exp(arm: usize, state: usize, action: usize, reward: f64, next_state: usize) -> Experience {
        Experience {
            arm,
            state,
            action,
            reward,
            next_state,
            use_count: 0,
        }
    }

    #[test]
    fn bound_examples() {
        let one = |r: f64, c: f64, beta: f64| {
            let arm = ArmModel::new(vec![0.0, c], vec![r], vec![1.0, 1.0]).unwrap();
            lambda_max_bound(&RmabInstance::new(vec![arm], 1.0, beta).unwrap()).unwrap()
        };
        assert_relative_eq!(one(1.0, 1.0, 0.9), 10.0, epsilon = 1e-9);
        assert_relative_eq!(one(2.0, 0.5, 0.5), 8.0);
        assert_eq!(one(0.0, 1.0, 0.9), 0.0);
        let free = RmabInstance::new(vec![identity_arm(vec![0.0, 0.0], 1)], 1.0, 0.9).unwrap();
        assert!(matches!(
            lambda_max_bound(&free),
            Err(RmabError::NoPositiveCost)
        ));
    }

    #[test]
    fn grid_points() {
        let g = LambdaGrid::new(3.0, 3000).unwrap();
        assert_eq!(g.len(), 3001);
        assert_eq!(g.point(0), 0.0);
        assert_relative_eq!(g.point(3000), 3.0);
        assert!(LambdaGrid::new(1.0, 0).is_err());
    }

    #[test]
    fn first_update_from_zero() {
        let inst = RmabInstance::new(vec![identity_arm(vec![0.0, 1.0], 2)], 1.0, 0.9).unwrap();
        let params = ScheduleParams::new(0.4, 0.2, 500, 0.99).unwrap();
        let mut l = Lpql::new(&inst, LambdaGrid::new(10.0, 10).unwrap(), params);
        l.update(&[exp(0, 0, 0, 1.0, 1)]);
        // passive: the penalty vanishes at every grid point
        assert!(l
            .table()
            .series(0, 0, 0)
            .iter()
            .all(|&q| (q - 0.4).abs() < 1e-15));
        l.update(&[exp(0, 1, 1, 1.0, 0)]);
        let row = l.table().series(0, 1, 1);
        assert_relative_eq!(row[0], 0.4 * 1.36);
        // r - c λ_p + β max Q(s', ., p) = 1 - p + 0.9 * 0.4
        assert_relative_eq!(row[3], 0.4 * (1.0 - 3.0 + 0.36));
    }

    fn table_from_values(values: &[Vec<f64>], lambda_max: f64) -> (RmabInstance, LambdaQTable) {
        let n_lam = values[0].len() - 1;
        let arms = vec![identity_arm(vec![0.0], 1); values.len()];
        let inst = RmabInstance::new(arms, 1.0, 0.9).unwrap();
        let mut t = LambdaQTable::zeros(&inst, LambdaGrid::new(lambda_max, n_lam).unwrap());
        for (i, v) in values.iter().enumerate() {
            t.series_mut(i, 0, 0).copy_from_slice(v);
        }
        (inst, t)
    }

    #[test]
    fn slope_scan_example() {
        // unit spacing; slope sums by segment are -12, -9, -4
        let (_, t) = table_from_values(&[vec![0.0, -12.0, -21.0, -25.0]], 3.0);
        let s = StateVector(vec![0]);
        assert_eq!(find_lambda_min(&t, &s, 1.0, 0.9), 1);
        assert_eq!(find_lambda_min(&t, &s, 100.0, 0.9), 0);
        // never satisfied: last interior point
        assert_eq!(find_lambda_min(&t, &s, 0.1, 0.9), 2);
    }

    #[test]
    fn scan_agrees_with_direct_bound() {
        let (_, t) = table_from_values(
            &[vec![5.0, 3.0, 1.5, 0.5, 0.0], vec![4.0, 3.0, 2.2, 1.6, 1.2]],
            4.0,
        );
        let s = StateVector(vec![0, 0]);
        for budget in [0.0, 0.05, 0.2, 0.5, 1.0] {
            let p = find_lambda_min(&t, &s, budget, 0.9);
            let j: Vec<f64> = (0..4)
                .map(|q| lagrange_bound(&t, &s, budget, 0.9, q))
                .collect();
            let best = j.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!((j[p] - best).abs() < 1e-12, "budget {budget}: {j:?} at {p}");
        }
    }

    #[test]
    fn aprx_index_argmin_and_ties() {
        let inst = RmabInstance::new(vec![identity_arm(vec![0.0, 1.0], 1)], 1.0, 0.9).unwrap();
        let mut t = LambdaQTable::zeros(&inst, LambdaGrid::new(10.0, 10).unwrap());
        assert_eq!(aprx_index(&t, 0, 0, 1), 0.0);
        let diffs = [5.0, 4.0, 3.0, 2.0, 0.6, -0.2, -1.0, -2.0, -3.0, -4.0, -5.0];
        t.series_mut(0, 0, 1).copy_from_slice(&diffs);
        assert_eq!(aprx_index(&t, 0, 0, 1), 5.0);
    }

    #[test]
    fn selection_examples() {
        let inst = RmabInstance::new(vec![identity_arm(vec![0.0, 1.0], 1); 2], 1.0, 0.9).unwrap();
        let mut t = LambdaQTable::zeros(&inst, LambdaGrid::new(1.0, 1).unwrap());
        t.series_mut(0, 0, 1).copy_from_slice(&[1.0, 1.0]);
        t.series_mut(1, 0, 1).copy_from_slice(&[0.5, 0.5]);
        assert_eq!(
            knapsack_at(&t, 0, &StateVector(vec![0, 0]), &inst).0,
            vec![1, 0]
        );
        let broke = inst.with_budget(0.0).unwrap();
        assert_eq!(
            knapsack_at(&t, 0, &StateVector(vec![0, 0]), &broke).0,
            vec![0, 0]
        );
    }
}
