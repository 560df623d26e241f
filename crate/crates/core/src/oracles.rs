//! Offline policies that know the transition probabilities.
//!
//! * Lagrange policy: value iteration on every λ grid point, slope scan, knapsack.
//! * λ = 0 policy: value iteration without cost penalty, knapsack.
//! * Index policy: per-arm bisection for the indifference point of each
//!   consecutive action pair, then greedy index allocation.

use std::io::Write;

use crate::baselines::PlainQTable;
use crate::error::{Result, RmabError};
use crate::lpql::{find_lambda_min, knapsack_at, LambdaGrid, LambdaQTable};
use crate::maiql::greedy_index_allocation;
use crate::model::{ActionVector, ArmModel, RmabInstance, StateVector};

pub const VI_TOL: f64 = 1e-9;
pub const VI_MAX_ITER: usize = 100_000;
/// Value-iteration tolerance used inside index bisection.
const INDEX_VI_TOL: f64 = 1e-12;

/// `Q(s, a) = r(s) - λ c_a + β Σ_s' T(s, a, s') V(s')`, laid out `[s][a]`.
fn q_from_v(arm: &ArmModel, lambda: f64, beta: f64, v: &[f64], q: &mut [f64]) {
    let (ns, na) = (arm.n_states(), arm.n_actions());
    for s in 0..ns {
        let r = arm.reward(s);
        for a in 0..na {
            let ev: f64 = arm.row(s, a).iter().zip(v).map(|(p, x)| p * x).sum();
            q[s * na + a] = r - lambda * arm.cost(a) + beta * ev;
        }
    }
}

fn max_rows(q: &[f64], na: usize, v: &mut [f64]) {
    for (s, x) in v.iter_mut().enumerate() {
        *x = q[s * na..(s + 1) * na]
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
    }
}

/// Value iteration starting from `v`, which holds the final values on return.
pub fn value_iteration_from(
    arm: &ArmModel,
    lambda: f64,
    beta: f64,
    tol: f64,
    max_iter: usize,
    v: &mut Vec<f64>,
) -> Result<Vec<f64>> {
    let (ns, na) = (arm.n_states(), arm.n_actions());
    if v.len() != ns {
        *v = vec![0.0; ns];
    }
    let mut q = vec![0.0; ns * na];
    let mut next = vec![0.0; ns];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        q_from_v(arm, lambda, beta, v, &mut q);
        max_rows(&q, na, &mut next);
        residual = next
            .iter()
            .zip(v.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v.copy_from_slice(&next);
        if residual <= tol {
            q_from_v(arm, lambda, beta, v, &mut q);
            return Ok(q);
        }
    }
    Err(RmabError::NotConverged {
        iterations: max_iter,
        residual,
    })
}

/// Fixed point of the λ-penalized Bellman operator, `Q` laid out `[s][a]`.
pub fn value_iteration_lambda(
    arm: &ArmModel,
    lambda: f64,
    beta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(RmabError::Config(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let mut v = vec![0.0; arm.n_states()];
    value_iteration_from(arm, lambda, beta, tol, max_iter, &mut v)
}

/// Sup-norm distance between `q` and one application of the Bellman operator.
pub fn bellman_residual(arm: &ArmModel, lambda: f64, beta: f64, q: &[f64]) -> f64 {
    let na = arm.n_actions();
    let mut v = vec![0.0; arm.n_states()];
    max_rows(q, na, &mut v);
    let mut tq = vec![0.0; q.len()];
    q_from_v(arm, lambda, beta, &v, &mut tq);
    tq.iter()
        .zip(q)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Exact `Q(s, a, λ_p)` for every arm and grid point.
///
/// Identical arms share one computation; each grid point warm-starts from the previous one.
pub fn oracle_q_table(
    instance: &RmabInstance,
    grid: LambdaGrid,
    tol: f64,
    max_iter: usize,
) -> Result<LambdaQTable> {
    let mut table = LambdaQTable::zeros(instance, grid);
    let beta = instance.discount();
    let arms = instance.arms();
    for (i, arm) in arms.iter().enumerate() {
        if let Some(twin) = arms[..i].iter().position(|other| other == arm) {
            let (ns, na) = (arm.n_states(), arm.n_actions());
            for s in 0..ns {
                for a in 0..na {
                    let src = table.series(twin, s, a).to_vec();
                    table.series_mut(i, s, a).copy_from_slice(&src);
                }
            }
            continue;
        }
        let na = arm.n_actions();
        let mut v = Vec::new();
        for p in 0..grid.len() {
            let q = value_iteration_from(arm, grid.point(p), beta, tol, max_iter, &mut v)?;
            for (k, &x) in q.iter().enumerate() {
                table.series_mut(i, k / na, k % na)[p] = x;
            }
        }
    }
    Ok(table)
}

/// Exact λ = 0 tables.
pub fn oracle_lambda0_table(
    instance: &RmabInstance,
    tol: f64,
    max_iter: usize,
) -> Result<PlainQTable> {
    let beta = instance.discount();
    let data = instance
        .arms()
        .iter()
        .map(|arm| value_iteration_lambda(arm, 0.0, beta, tol, max_iter))
        .collect::<Result<Vec<_>>>()?;
    Ok(PlainQTable::from_tables(instance, data))
}

/// What to do when an index has no root on `[0, λ_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IndexMode {
    /// Report the pair as not indexable.
    #[default]
    Strict,
    /// Clamp: `0` when the cheaper action already wins at `λ = 0`, the upper
    /// bracket when the dearer action still wins there.
    Lenient,
}

/// Upper end of the bisection bracket. Any root lies below it since
/// `|E_j V - E_{j-1} V| <= span(r) / (1 - β)`.
fn bracket(arm: &ArmModel, beta: f64, dc: f64) -> f64 {
    let r = arm.rewards();
    let span = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - r.iter().cloned().fold(f64::INFINITY, f64::min);
    span / ((1.0 - beta) * dc) + 1.0
}

/// Index of `a_j` in state `s`: the λ where `a_j` and `a_{j-1}` tie, within `tol`.
pub fn oracle_index(arm: &ArmModel, s: usize, j: usize, beta: f64, tol: f64) -> Result<f64> {
    oracle_index_with(arm, 0, s, j, beta, tol, IndexMode::Strict)
}

/// [`oracle_index`] with an arm label for error reports and a choice of mode.
pub fn oracle_index_with(
    arm: &ArmModel,
    arm_id: usize,
    s: usize,
    j: usize,
    beta: f64,
    tol: f64,
    mode: IndexMode,
) -> Result<f64> {
    if j == 0 || j >= arm.n_actions() {
        return Err(RmabError::ActionOutOfRange {
            arm: arm_id,
            action: j,
            n_actions: arm.n_actions(),
        });
    }
    if s >= arm.n_states() {
        return Err(RmabError::StateOutOfRange {
            arm: arm_id,
            state: s,
            n_states: arm.n_states(),
        });
    }
    let dc = arm.cost(j) - arm.cost(j - 1);
    if dc <= 0.0 {
        return Err(RmabError::EqualCosts {
            arm: arm_id,
            action: j,
            prev: j - 1,
        });
    }
    let na = arm.n_actions();
    let mut v = Vec::new();
    let mut diff = |lam: f64| -> Result<f64> {
        let q = value_iteration_from(arm, lam, beta, INDEX_VI_TOL, VI_MAX_ITER, &mut v)?;
        Ok(q[s * na + j] - q[s * na + j - 1])
    };
    let hi_bound = bracket(arm, beta, dc);
    let not_indexable = RmabError::NotIndexable {
        arm: arm_id,
        state: s,
        action: j,
        lambda_max: hi_bound,
    };
    let d0 = diff(0.0)?;
    if d0 <= 1e-9 {
        return match mode {
            _ if d0 >= -1e-9 => Ok(0.0),
            IndexMode::Lenient => Ok(0.0),
            IndexMode::Strict => Err(not_indexable),
        };
    }
    if diff(hi_bound)? > 0.0 {
        return match mode {
            IndexMode::Lenient => Ok(hi_bound),
            IndexMode::Strict => Err(not_indexable),
        };
    }
    let (mut lo, mut hi) = (0.0, hi_bound);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if diff(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Indexes of every `(arm, state, a_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexTable {
    /// `[arm][s * (M - 1) + j - 1]`
    values: Vec<Vec<f64>>,
    n_actions: Vec<usize>,
}

impl IndexTable {
    pub fn compute(instance: &RmabInstance, tol: f64, mode: IndexMode) -> Result<Self> {
        let beta = instance.discount();
        let arms = instance.arms();
        let mut values: Vec<Vec<f64>> = Vec::with_capacity(arms.len());
        for (i, arm) in arms.iter().enumerate() {
            if let Some(twin) = arms[..i].iter().position(|other| other == arm) {
                values.push(values[twin].clone());
                continue;
            }
            let mut row = Vec::with_capacity(arm.n_states() * (arm.n_actions() - 1));
            for s in 0..arm.n_states() {
                for j in 1..arm.n_actions() {
                    row.push(oracle_index_with(arm, i, s, j, beta, tol, mode)?);
                }
            }
            values.push(row);
        }
        let n_actions = arms.iter().map(|a| a.n_actions()).collect();
        Ok(Self { values, n_actions })
    }

    pub fn index(&self, arm: usize, s: usize, j: usize) -> f64 {
        let m1 = self.n_actions[arm] - 1;
        self.values[arm][s * m1 + j - 1]
    }

    /// Indexes of each arm's current state, `[arm][j - 1]`.
    pub fn current(&self, states: &StateVector) -> Vec<Vec<f64>> {
        states
            .0
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let m1 = self.n_actions[i] - 1;
                self.values[i][s * m1..(s + 1) * m1].to_vec()
            })
            .collect()
    }

    /// Writes `arm,state,action,index` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["arm", "state", "action", "index"])?;
        for (arm, row) in self.values.iter().enumerate() {
            let m1 = self.n_actions[arm] - 1;
            for (k, x) in row.iter().enumerate() {
                w.write_record(&[
                    arm.to_string(),
                    (k / m1).to_string(),
                    (k % m1 + 1).to_string(),
                    x.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Lagrange policy on exact tables; also returns the chosen grid index.
pub fn oracle_lp_policy(
    instance: &RmabInstance,
    table: &LambdaQTable,
    states: &StateVector,
) -> (ActionVector, usize) {
    let p = find_lambda_min(table, states, instance.budget(), instance.discount());
    (knapsack_at(table, p, states, instance), p)
}

pub fn oracle_lambda0_policy(
    instance: &RmabInstance,
    table: &PlainQTable,
    states: &StateVector,
) -> ActionVector {
    table.knapsack(states, instance)
}

pub fn oracle_lp_index_policy(
    instance: &RmabInstance,
    indexes: &IndexTable,
    states: &StateVector,
) -> ActionVector {
    greedy_index_allocation(&indexes.current(states), instance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::identity_arm;
    use approx::assert_relative_eq;

    fn lift_arm() -> ArmModel {
        ArmModel::new(
            vec![0.0, 1.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn single_state_closed_forms() {
        let arm = ArmModel::new(vec![0.0, 1.0], vec![1.0], vec![1.0, 1.0]).unwrap();
        let q = value_iteration_lambda(&arm, 0.0, 0.9, 1e-12, VI_MAX_ITER).unwrap();
        assert_relative_eq!(q[0], 10.0, epsilon = 1e-9);
        assert_relative_eq!(q[1], 10.0, epsilon = 1e-9);
        let q = value_iteration_lambda(&arm, 2.0, 0.9, 1e-12, VI_MAX_ITER).unwrap();
        assert_relative_eq!(q[0], 10.0, epsilon = 1e-9);
        assert_relative_eq!(q[1], 8.0, epsilon = 1e-9);
        assert!(bellman_residual(&arm, 2.0, 0.9, &q) <= 1e-12);
    }

    #[test]
    fn indifference_at_the_index() {
        let q = value_iteration_lambda(&lift_arm(), 0.9, 0.9, 1e-12, VI_MAX_ITER).unwrap();
        assert_relative_eq!(q[1], q[0], epsilon = 1e-9);
    }

    #[test]
    fn non_convergence_is_reported() {
        let arm = lift_arm();
        assert!(matches!(
            value_iteration_lambda(&arm, 0.0, 0.99, 1e-12, 3),
            Err(RmabError::NotConverged { iterations: 3, .. })
        ));
    }

    #[test]
    fn index_examples() {
        let idx = oracle_index(&lift_arm(), 0, 1, 0.9, 1e-9).unwrap();
        assert!((idx - 0.9).abs() < 1e-6, "{idx}");
        let flat = identity_arm(vec![0.0, 1.0], 1);
        assert_eq!(oracle_index(&flat, 0, 1, 0.9, 1e-9).unwrap(), 0.0);
    }

    #[test]
    fn not_indexable_pair() {
        // acting drops the arm from the paying state: the dearer action never wins
        let arm = ArmModel::new(
            vec![0.0, 1.0],
            vec![0.0, 1.0],
            vec![0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0],
        )
        .unwrap();
        assert!(matches!(
            oracle_index(&arm, 1, 1, 0.9, 1e-9),
            Err(RmabError::NotIndexable {
                state: 1,
                action: 1,
                ..
            })
        ));
        assert_eq!(
            oracle_index_with(&arm, 0, 1, 1, 0.9, 1e-9, IndexMode::Lenient).unwrap(),
            0.0
        );
    }

    #[test]
    fn grid_values_are_monotone() {
        let inst =
            RmabInstance::new(vec![lift_arm(), identity_arm(vec![0.0, 1.0], 2)], 1.0, 0.9).unwrap();
        let grid = LambdaGrid::new(10.0, 50).unwrap();
        let t = oracle_q_table(&inst, grid, VI_TOL, VI_MAX_ITER).unwrap();
        for s in 0..2 {
            for p in 0..50 {
                assert!(t.value(0, s, p + 1) <= t.value(0, s, p) + 1e-9);
            }
        }
    }

    #[test]
    fn twin_arms_share_tables() {
        let inst = RmabInstance::new(vec![lift_arm(), lift_arm()], 1.0, 0.9).unwrap();
        let grid = LambdaGrid::new(10.0, 20).unwrap();
        let t = oracle_q_table(&inst, grid, VI_TOL, VI_MAX_ITER).unwrap();
        assert_eq!(t.series(0, 0, 1), t.series(1, 0, 1));
        let idx = IndexTable::compute(&inst, 1e-9, IndexMode::Strict).unwrap();
        assert_eq!(idx.index(0, 0, 1), idx.index(1, 0, 1));
    }

    #[test]
    fn unconstrained_budget_picks_argmax() {
        let inst = RmabInstance::new(vec![lift_arm(); 3], 3.0, 0.9).unwrap();
        let grid = LambdaGrid::new(10.0, 100).unwrap();
        let t = oracle_q_table(&inst, grid, VI_TOL, VI_MAX_ITER).unwrap();
        let (a, p) = oracle_lp_policy(&inst, &t, &StateVector(vec![0, 0, 1]));
        assert_eq!(p, 0);
        assert_eq!(a.0, vec![1, 1, 0]);
        let broke = inst.with_budget(0.0).unwrap();
        let idx = IndexTable::compute(&broke, 1e-9, IndexMode::Strict).unwrap();
        assert_eq!(
            oracle_lp_index_policy(&broke, &idx, &StateVector(vec![0, 0, 0])),
            ActionVector::passive(3)
        );
    }
}
