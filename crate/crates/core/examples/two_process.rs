//! Two-Process domain: exact Lagrange, λ = 0 and index policies side by side.

use rmab::domains::two_process::gen_two_process;
use rmab::domains::TwoProcessParams;
use rmab::harness::config::DEFAULT_DISCOUNT;
use rmab::lpql::LambdaGrid;
use rmab::oracles::*;
use rmab::rng::{stream, INSTANCE_STREAM};
use rmab::simulator::run_episode;
use rmab::StateVector;

fn main() -> rmab::Result<()> {
    let params = TwoProcessParams::default();
    let (inst, type_a) = gen_two_process(
        16,
        &params,
        8.0,
        DEFAULT_DISCOUNT,
        &mut stream(0, INSTANCE_STREAM),
    )?;
    let kinds: String = type_a.iter().map(|&a| if a { 'A' } else { 'B' }).collect();
    println!("arm types {kinds}");

    let lp = oracle_q_table(&inst, LambdaGrid::new(3.0, 600)?, VI_TOL, VI_MAX_ITER)?;
    let l0 = oracle_lambda0_table(&inst, VI_TOL, VI_MAX_ITER)?;
    let idx = IndexTable::compute(&inst, 1e-7, IndexMode::Lenient)?;
    let horizon = 3000;
    let mean = |r: Vec<f64>| r[1000..].iter().sum::<f64>() / (r.len() - 1000) as f64;

    let mut lp_policy = |s: &StateVector, _t: u64| oracle_lp_policy(&inst, &lp, s).0;
    let lp_level = mean(run_episode(&inst, &mut lp_policy, horizon, 1)?.instant_rewards());
    let mut l0_policy = |s: &StateVector, _t: u64| oracle_lambda0_policy(&inst, &l0, s);
    let l0_level = mean(run_episode(&inst, &mut l0_policy, horizon, 1)?.instant_rewards());
    let mut idx_policy = |s: &StateVector, _t: u64| oracle_lp_index_policy(&inst, &idx, s);
    let idx_level = mean(run_episode(&inst, &mut idx_policy, horizon, 1)?.instant_rewards());
    println!(
        "mean reward per round: Lagrange {lp_level:.3}, λ = 0 {l0_level:.3}, index {idx_level:.3}"
    );
    Ok(())
}
