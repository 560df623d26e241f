//! Exact multiple-choice knapsack: one action per arm, summed cost within the
//! budget, summed value maximized.
//!
//! [`solve`] is a depth-first branch and bound over arms in index order,
//! trying actions in ascending order, pruned by the LP relaxation of the
//! remaining arms. Because the search visits assignments in lexicographic
//! order and only replaces the incumbent on strict improvement, the result is
//! the lexicographically smallest optimal vector.
//!
//! [`solve_dp_integer`] is a dynamic program over integer budget levels for
//! problems whose costs are integral at some resolution.

use crate::error::{Result, RmabError};
use crate::model::{ActionVector, FEASIBILITY_TOL};

/// Default cap on `arms x budget levels` for [`solve_dp_integer`].
pub const DEFAULT_TABLE_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct KnapsackProblem {
    values: Vec<Vec<f64>>,
    costs: Vec<Vec<f64>>,
    budget: f64,
}

impl KnapsackProblem {
    /// `values[i][j]` and `costs[i][j]` describe action `j` of arm `i`.
    /// Every arm must offer a zero-cost action.
    pub fn new(values: Vec<Vec<f64>>, costs: Vec<Vec<f64>>, budget: f64) -> Result<Self> {
        if values.len() != costs.len() {
            return Err(RmabError::LengthMismatch {
                expected: costs.len(),
                got: values.len(),
            });
        }
        if !(budget >= 0.0 && budget.is_finite()) {
            return Err(RmabError::InvalidInstance(format!(
                "budget {budget} must be >= 0"
            )));
        }
        for (i, (v, c)) in values.iter().zip(&costs).enumerate() {
            if v.len() != c.len() || v.is_empty() {
                return Err(RmabError::InvalidInstance(format!(
                    "arm {i}: {} values for {} costs",
                    v.len(),
                    c.len()
                )));
            }
            if !c.iter().any(|&x| x == 0.0) {
                return Err(RmabError::InvalidInstance(format!(
                    "arm {i} has no zero-cost action"
                )));
            }
            if c.iter().any(|&x| !(x >= 0.0 && x.is_finite())) || v.iter().any(|x| !x.is_finite()) {
                return Err(RmabError::InvalidInstance(format!(
                    "arm {i} has non-finite entries"
                )));
            }
        }
        Ok(Self {
            values,
            costs,
            budget,
        })
    }

    pub fn n_arms(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn costs(&self) -> &[Vec<f64>] {
        &self.costs
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    /// Summed value of `a`, accumulated in arm order.
    pub fn objective(&self, a: &[usize]) -> f64 {
        a.iter().enumerate().map(|(i, &j)| self.values[i][j]).sum()
    }

    /// Summed cost of `a`, accumulated in arm order.
    pub fn cost(&self, a: &[usize]) -> f64 {
        a.iter().enumerate().map(|(i, &j)| self.costs[i][j]).sum()
    }

    pub fn is_feasible(&self, a: &[usize]) -> bool {
        self.cost(a) <= self.budget + FEASIBILITY_TOL
    }
}

/// One step along an arm's upper concave hull of (cost, value) points.
#[derive(Debug, Clone, Copy)]
struct Increment {
    arm: usize,
    dcost: f64,
    dvalue: f64,
}

/// Base value (best zero-cost option) plus hull increments with decreasing slope.
fn lp_hull(arm: usize, values: &[f64], costs: &[f64]) -> (f64, Vec<Increment>) {
    let mut pts: Vec<(f64, f64)> = costs.iter().copied().zip(values.iter().copied()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    // keep the best value per cost level, then drop points not better than a cheaper one
    let mut frontier: Vec<(f64, f64)> = Vec::new();
    for (c, v) in pts {
        match frontier.last() {
            Some(&(lc, lv)) if c == lc || v <= lv => continue,
            _ => frontier.push((c, v)),
        }
    }
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for p in frontier {
        while hull.len() >= 2 {
            let (c1, v1) = hull[hull.len() - 2];
            let (c2, v2) = hull[hull.len() - 1];
            // drop the middle point if it lies on or below the chord
            if (v2 - v1) * (p.0 - c1) <= (p.1 - v1) * (c2 - c1) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let base = hull[0].1;
    let incs = hull
        .windows(2)
        .map(|w| Increment {
            arm,
            dcost: w[1].0 - w[0].0,
            dvalue: w[1].1 - w[0].1,
        })
        .collect();
    (base, incs)
}

struct Search<'a> {
    p: &'a KnapsackProblem,
    /// `suffix_base[k]` = sum of hull bases of arms k..N.
    suffix_base: Vec<f64>,
    increments: Vec<Increment>,
    order: Vec<Vec<usize>>,
    current: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
    heuristic: f64,
    eps: f64,
}

impl Search<'_> {
    fn bound(&self, from: usize, remaining: f64) -> f64 {
        let mut total = self.suffix_base[from];
        let mut room = remaining.max(0.0);
        for inc in &self.increments {
            if inc.arm < from {
                continue;
            }
            if inc.dcost <= room {
                total += inc.dvalue;
                room -= inc.dcost;
            } else {
                total += inc.dvalue * room / inc.dcost;
                break;
            }
        }
        total
    }

    fn prune(&self, bound: f64) -> bool {
        if let Some((v, _)) = &self.best {
            if bound <= v + self.eps {
                return true;
            }
        }
        bound < self.heuristic - self.eps
    }

    fn dfs(&mut self, k: usize, value: f64, used: f64) {
        let n = self.p.n_arms();
        if k == n {
            if self.best.as_ref().is_none_or(|(v, _)| value > *v) {
                self.best = Some((value, self.current.clone()));
            }
            return;
        }
        for idx in 0..self.order[k].len() {
            let a = self.order[k][idx];
            let c = self.p.costs[k][a];
            let next_used = used + c;
            if next_used > self.p.budget + FEASIBILITY_TOL {
                continue;
            }
            let next_value = value + self.p.values[k][a];
            let ub = next_value + self.bound(k + 1, self.p.budget - next_used);
            if self.prune(ub) {
                continue;
            }
            self.current[k] = a;
            self.dfs(k + 1, next_value, next_used);
        }
        self.current[k] = 0;
    }
}

/// Greedy feasible assignment used only as a pruning threshold.
fn greedy_value(p: &KnapsackProblem) -> f64 {
    let mut choice: Vec<usize> = p
        .costs
        .iter()
        .map(|c| c.iter().position(|&x| x == 0.0).unwrap_or(0))
        .collect();
    let mut used = 0.0;
    loop {
        let mut pick: Option<(usize, usize, f64)> = None;
        for i in 0..p.n_arms() {
            let (cv, cc) = (p.values[i][choice[i]], p.costs[i][choice[i]]);
            for j in 0..p.values[i].len() {
                let (dv, dc) = (p.values[i][j] - cv, p.costs[i][j] - cc);
                if dv <= 0.0 || used + dc > p.budget + FEASIBILITY_TOL {
                    continue;
                }
                let score = if dc <= 0.0 { f64::INFINITY } else { dv / dc };
                if pick.is_none_or(|(_, _, s)| score > s) {
                    pick = Some((i, j, score));
                }
            }
        }
        match pick {
            Some((i, j, _)) => {
                used += p.costs[i][j] - p.costs[i][choice[i]];
                choice[i] = j;
            }
            None => break,
        }
    }
    if p.is_feasible(&choice) {
        p.objective(&choice)
    } else {
        f64::NEG_INFINITY
    }
}

/// Exactly optimal assignment; ties go to the lexicographically smallest vector.
///
/// Branches whose LP bound cannot beat the incumbent by more than a relative
/// `1e-12` of the value scale are pruned.
pub fn solve(p: &KnapsackProblem) -> ActionVector {
    let n = p.n_arms();
    let mut increments = Vec::new();
    let mut bases = Vec::with_capacity(n);
    for i in 0..n {
        let (base, incs) = lp_hull(i, &p.values[i], &p.costs[i]);
        bases.push(base);
        increments.extend(incs);
    }
    // stable: equal slopes keep arm order, and each arm's own slopes are decreasing
    increments.sort_by(|a, b| (b.dvalue / b.dcost).total_cmp(&(a.dvalue / a.dcost)));
    let mut suffix_base = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix_base[i] = suffix_base[i + 1] + bases[i];
    }
    let scale: f64 = p
        .values
        .iter()
        .map(|v| v.iter().fold(0.0f64, |m, x| m.max(x.abs())))
        .sum();
    let order = p.values.iter().map(|v| (0..v.len()).collect()).collect();
    let mut search = Search {
        p,
        suffix_base,
        increments,
        order,
        current: vec![0; n],
        best: None,
        heuristic: greedy_value(p),
        eps: 1e-12 * (1.0 + scale),
    };
    search.dfs(0, 0.0, 0.0);
    let (_, best) = search
        .best
        .expect("the all-passive assignment is always feasible");
    ActionVector(best)
}

/// Dynamic program over budget levels; costs and budget are scaled by
/// `1 / resolution` and must then be integral (within 1e-9).
pub fn solve_dp_integer(
    p: &KnapsackProblem,
    resolution: f64,
    table_limit: usize,
) -> Result<ActionVector> {
    let to_int = |x: f64| -> Option<usize> {
        let y = x / resolution;
        let r = y.round();
        ((y - r).abs() <= 1e-9 * y.abs().max(1.0)).then_some(r as usize)
    };
    let n = p.n_arms();
    let mut icosts = Vec::with_capacity(n);
    for c in &p.costs {
        let row: Option<Vec<usize>> = c.iter().map(|&x| to_int(x)).collect();
        icosts.push(row.ok_or(RmabError::NonIntegral { resolution })?);
    }
    let cap = (p.budget / resolution + 1e-9).floor() as usize;
    let cells = n.saturating_mul(cap + 1);
    if cells > table_limit {
        return Err(RmabError::TableTooLarge {
            cells,
            limit: table_limit,
        });
    }
    let width = cap + 1;
    // best[i][b]: optimum over arms i..n with b budget units left
    let mut best = vec![0.0f64; (n + 1) * width];
    let mut choice = vec![0usize; n * width];
    for i in (0..n).rev() {
        for b in 0..width {
            let mut top = f64::NEG_INFINITY;
            let mut arg = 0;
            for (j, &c) in icosts[i].iter().enumerate() {
                if c > b {
                    continue;
                }
                let v = p.values[i][j] + best[(i + 1) * width + b - c];
                if v > top {
                    top = v;
                    arg = j;
                }
            }
            best[i * width + b] = top;
            choice[i * width + b] = arg;
        }
    }
    let mut b = cap;
    let mut out = Vec::with_capacity(n);
    for (i, costs) in icosts.iter().enumerate() {
        let j = choice[i * width + b];
        out.push(j);
        b -= costs[j];
    }
    Ok(ActionVector(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(p: &KnapsackProblem) -> (f64, Vec<usize>) {
        let n = p.n_arms();
        let mut idx = vec![0usize; n];
        let mut best: Option<(f64, Vec<usize>)> = None;
        loop {
            if p.is_feasible(&idx) {
                let v = p.objective(&idx);
                if best.as_ref().is_none_or(|(b, _)| v > *b) {
                    best = Some((v, idx.clone()));
                }
            }
            // odometer increment, last arm fastest, so enumeration is lexicographic
            let mut k = n;
            loop {
                if k == 0 {
                    return best.unwrap();
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < p.values[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    fn random_problem(rng: &mut ChaCha8Rng, n: usize, m: usize, integer: bool) -> KnapsackProblem {
        let values = (0..n)
            .map(|_| (0..m).map(|_| rng.random_range(-1.0..2.0)).collect())
            .collect();
        let costs: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut c: Vec<f64> = (0..m)
                    .map(|j| {
                        if j == 0 {
                            0.0
                        } else if integer {
                            rng.random_range(0..4) as f64
                        } else {
                            rng.random_range(0.0..2.0)
                        }
                    })
                    .collect();
                c.sort_by(f64::total_cmp);
                c
            })
            .collect();
        let budget = if integer {
            rng.random_range(0..6) as f64
        } else {
            rng.random_range(0.0..4.0)
        };
        KnapsackProblem::new(values, costs, budget).unwrap()
    }

    #[test]
    fn zero_budget_is_all_passive() {
        let p = KnapsackProblem::new(
            vec![vec![0.0, 5.0], vec![-1.0, 9.0]],
            vec![vec![0.0, 1.0], vec![0.0, 1.0]],
            0.0,
        )
        .unwrap();
        assert_eq!(solve(&p).0, vec![0, 0]);
    }

    #[test]
    fn two_arm_example() {
        let p = KnapsackProblem::new(
            vec![vec![0.0, 1.0], vec![0.0, 0.5]],
            vec![vec![0.0, 1.0], vec![0.0, 1.0]],
            1.0,
        )
        .unwrap();
        assert_eq!(solve(&p).0, vec![1, 0]);
        assert_eq!(
            solve_dp_integer(&p, 1.0, DEFAULT_TABLE_LIMIT).unwrap().0,
            vec![1, 0]
        );
    }

    #[test]
    fn ties_are_lexicographic() {
        let p =
            KnapsackProblem::new(vec![vec![0.0; 3]; 4], vec![vec![0.0, 1.0, 2.0]; 4], 3.0).unwrap();
        assert_eq!(solve(&p).0, vec![0, 0, 0, 0]);
        let q =
            KnapsackProblem::new(vec![vec![0.0, 1.0]; 3], vec![vec![0.0, 1.0]; 3], 2.0).unwrap();
        assert_eq!(solve(&q).0, vec![0, 1, 1]);
    }

    #[test]
    fn negative_values_are_allowed() {
        let p = KnapsackProblem::new(
            vec![vec![-3.0, -1.0], vec![-2.0, -2.5]],
            vec![vec![0.0, 1.0], vec![0.0, 1.0]],
            1.0,
        )
        .unwrap();
        assert_eq!(solve(&p).0, vec![1, 0]);
    }

    #[test]
    fn three_by_three_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let values = (0..3)
                .map(|_| (0..3).map(|_| rng.random_range(0.0..1.0)).collect())
                .collect();
            let p = KnapsackProblem::new(values, vec![vec![0.0, 1.0, 2.0]; 3], 4.0).unwrap();
            let (v, a) = brute_force(&p);
            let got = solve(&p);
            assert_eq!(got.0, a);
            assert_eq!(p.objective(&got.0), v);
        }
    }

    #[test]
    fn mixed_random_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..400 {
            let n = rng.random_range(1..=4);
            let m = rng.random_range(1..=3);
            let p = random_problem(&mut rng, n, m, trial % 2 == 0);
            let (v, a) = brute_force(&p);
            let got = solve(&p);
            assert!(p.is_feasible(&got.0));
            assert_eq!(p.objective(&got.0), v, "trial {trial}");
            assert_eq!(got.0, a, "trial {trial}");
        }
    }

    #[test]
    fn dp_matches_enumeration_on_integer_costs() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..400 {
            let n = rng.random_range(1..=4);
            let m = rng.random_range(1..=3);
            let p = random_problem(&mut rng, n, m, true);
            let (v, _) = brute_force(&p);
            let got = solve_dp_integer(&p, 1.0, DEFAULT_TABLE_LIMIT).unwrap();
            assert!(p.is_feasible(&got.0));
            assert!((p.objective(&got.0) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn dp_edge_cases() {
        let only_passive =
            KnapsackProblem::new(vec![vec![1.0]; 3], vec![vec![0.0]; 3], 5.0).unwrap();
        assert_eq!(
            solve_dp_integer(&only_passive, 1.0, 100).unwrap().0,
            vec![0, 0, 0]
        );
        assert_eq!(solve(&only_passive).0, vec![0, 0, 0]);

        let tight = KnapsackProblem::new(
            vec![vec![0.0, 4.0], vec![0.0, 3.0]],
            vec![vec![0.0, 2.0], vec![0.0, 3.0]],
            1.0,
        )
        .unwrap();
        assert_eq!(solve_dp_integer(&tight, 1.0, 100).unwrap().0, vec![0, 0]);

        let real = KnapsackProblem::new(vec![vec![0.0, 1.0]], vec![vec![0.0, 0.3]], 1.0).unwrap();
        assert!(matches!(
            solve_dp_integer(&real, 1.0, 100),
            Err(RmabError::NonIntegral { .. })
        ));
        assert_eq!(solve_dp_integer(&real, 0.1, 100).unwrap().0, vec![1]);

        let big =
            KnapsackProblem::new(vec![vec![0.0, 1.0]; 10], vec![vec![0.0, 1.0]; 10], 1e6).unwrap();
        assert!(matches!(
            solve_dp_integer(&big, 1.0, DEFAULT_TABLE_LIMIT),
            Err(RmabError::TableTooLarge { .. })
        ));
    }

    #[test]
    fn rejects_malformed_problems() {
        assert!(KnapsackProblem::new(vec![vec![1.0]], vec![vec![1.0]], 1.0).is_err());
        assert!(KnapsackProblem::new(vec![vec![1.0, 2.0]], vec![vec![0.0]], 1.0).is_err());
        assert!(KnapsackProblem::new(vec![vec![1.0]], vec![vec![0.0]], -1.0).is_err());
    }

    #[test]
    fn large_instance_with_ties_terminates_quickly() {
        let p = KnapsackProblem::new(vec![vec![0.0; 3]; 48], vec![vec![0.0, 1.0, 2.0]; 48], 8.0)
            .unwrap();
        assert_eq!(solve(&p).0, vec![0; 48]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let values = (0..48)
            .map(|_| {
                let a = rng.random_range(0.0..1.0);
                vec![0.0, a, a + rng.random_range(0.0..0.5)]
            })
            .collect();
        let p = KnapsackProblem::new(values, vec![vec![0.0, 1.0, 2.0]; 48], 8.0).unwrap();
        let got = solve(&p);
        let dp = solve_dp_integer(&p, 1.0, DEFAULT_TABLE_LIMIT).unwrap();
        assert!((p.objective(&got.0) - p.objective(&dp.0)).abs() < 1e-9);
    }

    mod props {
        use super::{random_problem, solve, ChaCha8Rng, KnapsackProblem, SeedableRng};
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #[test]
            fn more_budget_never_hurts(seed in 0u64..10_000, extra in 0.0f64..3.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let p = random_problem(&mut rng, 4, 3, seed % 2 == 0);
                let richer = KnapsackProblem::new(
                    p.values().to_vec(), p.costs().to_vec(), p.budget() + extra).unwrap();
                let lo = p.objective(&solve(&p).0);
                let hi = richer.objective(&solve(&richer).0);
                prop_assert!(hi >= lo - 1e-12);
            }

            #[test]
            fn output_is_feasible(seed in 0u64..10_000) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let n = rng.random_range(1..=8);
                let p = random_problem(&mut rng, n, 4, false);
                prop_assert!(p.is_feasible(&solve(&p).0));
            }
        }
    }
}
