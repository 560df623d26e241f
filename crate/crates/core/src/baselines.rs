//! Budget-agnostic Q-learning (λ = 0) with knapsack action selection.

use rand::Rng;

use crate::lpql::knapsack_select;
use crate::model::{ActionVector, RmabInstance, StateVector};
use crate::schedules::{random_action, ScheduleParams, VisitCounter};
use crate::simulator::Experience;

/// One `|S| x M` table per arm.
#[derive(Debug, Clone, PartialEq)]
pub struct PlainQTable {
    shapes: Vec<(usize, usize)>,
    data: Vec<Vec<f64>>,
}

impl PlainQTable {
    pub fn zeros(instance: &RmabInstance) -> Self {
        let shapes: Vec<(usize, usize)> = instance
            .arms()
            .iter()
            .map(|a| (a.n_states(), a.n_actions()))
            .collect();
        let data = shapes.iter().map(|&(s, m)| vec![0.0; s * m]).collect();
        Self { shapes, data }
    }

    /// Wraps precomputed per-arm `[s][a]` tables.
    pub fn from_tables(instance: &RmabInstance, data: Vec<Vec<f64>>) -> Self {
        let mut t = Self::zeros(instance);
        for (dst, src) in t.data.iter_mut().zip(data) {
            assert_eq!(dst.len(), src.len(), "table shape mismatch");
            *dst = src;
        }
        t
    }

    pub fn q(&self, arm: usize, s: usize, a: usize) -> f64 {
        self.data[arm][s * self.shapes[arm].1 + a]
    }

    pub fn row(&self, arm: usize, s: usize) -> &[f64] {
        let m = self.shapes[arm].1;
        &self.data[arm][s * m..(s + 1) * m]
    }

    /// Knapsack over `Q(s_i, ·)`.
    pub fn knapsack(&self, states: &StateVector, instance: &RmabInstance) -> ActionVector {
        let values = states
            .0
            .iter()
            .enumerate()
            .map(|(i, &s)| self.row(i, s).to_vec())
            .collect();
        knapsack_select(values, instance)
    }
}

/// Standard discounted Q-learning per arm, no cost penalty.
#[derive(Debug, Clone)]
pub struct Ql0 {
    table: PlainQTable,
    counter: VisitCounter,
    params: ScheduleParams,
    beta: f64,
}

impl Ql0 {
    pub fn new(instance: &RmabInstance, params: ScheduleParams) -> Self {
        Self {
            table: PlainQTable::zeros(instance),
            counter: VisitCounter::new(instance),
            params,
            beta: instance.discount(),
        }
    }

    pub fn table(&self) -> &PlainQTable {
        &self.table
    }

    pub fn update(&mut self, batch: &[Experience]) {
        for e in batch {
            let nu = self.counter.bump(e.arm, e.state, e.action);
            let alpha = self.params.alpha(nu).expect("counter starts at 1");
            let m = self.table.shapes[e.arm].1;
            let q = &mut self.table.data[e.arm];
            let max_next = q[e.next_state * m..(e.next_state + 1) * m]
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            let cell = &mut q[e.state * m + e.action];
            *cell += alpha * (e.reward + self.beta * max_next - *cell);
        }
    }

    pub fn greedy(&self, states: &StateVector, instance: &RmabInstance) -> ActionVector {
        self.table.knapsack(states, instance)
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
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lpql::{LambdaGrid, Lpql};
    use crate::model::tests::identity_arm;
    use crate::rng::stream;
    use approx::assert_relative_eq;

    #[test]
    fn first_step_and_lpql_equivalence() {
        let inst = RmabInstance::new(vec![identity_arm(vec![0.0, 1.0], 3); 2], 1.0, 0.9).unwrap();
        let params = ScheduleParams::new(0.4, 0.2, 500, 0.99).unwrap();
        let mut q = Ql0::new(&inst, params);
        let mut l = Lpql::new(&inst, LambdaGrid::new(5.0, 5).unwrap(), params);
        let mut rng = stream(1, 1);
        for _ in 0..500 {
            let batch: Vec<Experience> = (0..2)
                .map(|arm| Experience {
                    arm,
                    state: rng.random_range(0..3),
                    action: rng.random_range(0..2),
                    reward: rng.random(),
                    next_state: rng.random_range(0..3),
                    use_count: 0,
                })
                .collect();
            q.update(&batch);
            l.update(&batch);
        }
        for arm in 0..2 {
            for s in 0..3 {
                for a in 0..2 {
                    assert_eq!(q.table().q(arm, s, a), l.table().q(arm, 0, s, a));
                }
            }
        }
        let mut fresh = Ql0::new(&inst, params);
        fresh.update(&[Experience {
            arm: 0,
            state: 0,
            action: 1,
            reward: 1.0,
            next_state: 1,
            use_count: 0,
        }]);
        assert_relative_eq!(fresh.table().q(0, 0, 1), 0.4);
    }

    #[test]
    fn zero_budget_is_passive() {
        let inst = RmabInstance::new(vec![identity_arm(vec![0.0, 1.0], 2); 3], 0.0, 0.9).unwrap();
        let data = vec![vec![0.0, 5.0, 0.0, 5.0]; 3];
        let t = PlainQTable::from_tables(&inst, data);
        assert_eq!(
            t.knapsack(&StateVector(vec![0, 1, 0]), &inst),
            ActionVector::passive(3)
        );
    }
}
