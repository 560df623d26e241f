//! Exact multiple-choice knapsack: one action per arm under a shared budget.

use rmab::knapsack::{solve, KnapsackProblem};

fn main() -> rmab::Result<()> {
    // three arms, actions cost 0/1/2, budget 3
    let values = vec![
        vec![0.0, 1.0, 1.5],
        vec![0.0, 0.8, 2.1],
        vec![0.0, 0.9, 1.0],
    ];
    let costs = vec![vec![0.0, 1.0, 2.0]; 3];
    let problem = KnapsackProblem::new(values, costs, 3.0)?;
    let best = solve(&problem);
    println!("actions {:?}", best.0);
    println!(
        "value {:.2} at cost {:.1}",
        problem.objective(&best.0),
        problem.cost(&best.0)
    );

    // real-valued costs take the branch-and-bound path
    let values = vec![vec![0.0, 0.7], vec![0.0, 0.4, 0.9], vec![0.0, 0.5]];
    let costs = vec![vec![0.0, 0.65], vec![0.0, 0.3, 0.95], vec![0.0, 0.35]];
    let problem = KnapsackProblem::new(values, costs, 1.0)?;
    let best = solve(&problem);
    println!(
        "actions {:?} value {:.2} cost {:.2}",
        best.0,
        problem.objective(&best.0),
        problem.cost(&best.0)
    );
    Ok(())
}
