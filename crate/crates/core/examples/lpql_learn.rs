//! LPQL online on a small Two-Process instance, compared with its exact Q.

use rmab::domains::two_process::gen_two_process;
use rmab::domains::TwoProcessParams;
use rmab::harness::config::DEFAULT_DISCOUNT;
use rmab::lpql::{LambdaGrid, Lpql};
use rmab::oracles::{oracle_lp_policy, oracle_q_table, VI_MAX_ITER, VI_TOL};
use rmab::rng::{stream, EXPLORATION_STREAM, INSTANCE_STREAM};
use rmab::schedules::ScheduleParams;
use rmab::simulator::{run_episode, Simulator};
use rmab::StateVector;

fn main() -> rmab::Result<()> {
    let (inst, _) = gen_two_process(
        8,
        &TwoProcessParams::default(),
        4.0,
        DEFAULT_DISCOUNT,
        &mut stream(5, INSTANCE_STREAM),
    )?;
    let grid = LambdaGrid::new(3.0, 300)?;
    let mut learner = Lpql::new(&inst, grid, ScheduleParams::new(0.4, 0.8, 500, 0.99)?);
    let mut sim = Simulator::new(&inst, 5);
    let mut rng = stream(5, EXPLORATION_STREAM);
    let mut total = 0.0;
    for t in 1..=20_000u64 {
        let s = sim.states().clone();
        let (a, _) = learner.select(&s, &inst, t, &mut rng);
        let (r, exps) = sim.step(&a)?;
        total += r.iter().sum::<f64>();
        learner.update(&exps);
        if t % 5000 == 0 {
            println!("t = {t:>5}: mean reward {:.3}", total / t as f64);
        }
    }

    let exact = oracle_q_table(&inst, grid, VI_TOL, VI_MAX_ITER)?;
    let start = StateVector(vec![1; inst.n_arms()]);
    let (p_learned, p_exact) = (learner.find_lambda_min(&start, inst.budget()), {
        let (_, p) = oracle_lp_policy(&inst, &exact, &start);
        p
    });
    println!(
        "λ chosen from all-good: learned {:.3}, exact {:.3}",
        grid.point(p_learned),
        grid.point(p_exact)
    );

    let mut frozen = |s: &StateVector, _t: u64| learner.greedy(s, &inst).0;
    let learned = run_episode(&inst, &mut frozen, 2000, 9)?.instant_rewards();
    let mut oracle = |s: &StateVector, _t: u64| oracle_lp_policy(&inst, &exact, s).0;
    let best = run_episode(&inst, &mut oracle, 2000, 9)?.instant_rewards();
    let avg = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    println!(
        "greedy policy {:.3} vs exact Lagrange policy {:.3}",
        avg(&learned),
        avg(&best)
    );
    Ok(())
}
