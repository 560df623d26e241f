//! Every harness policy on one Two-Process instance for a short horizon.

use rmab::domains::two_process::gen_two_process;
use rmab::domains::TwoProcessParams;
use rmab::harness::config::DEFAULT_DISCOUNT;
use rmab::harness::{default_hyper, Algorithm, DomainKind, HarnessAgent};
use rmab::rng::{stream, INSTANCE_STREAM};
use rmab::simulator::run_episode;

fn main() -> rmab::Result<()> {
    let (inst, _) = gen_two_process(
        16,
        &TwoProcessParams::default(),
        8.0,
        DEFAULT_DISCOUNT,
        &mut stream(2, INSTANCE_STREAM),
    )?;
    for alg in Algorithm::ALL {
        let mut hyper = default_hyper(DomainKind::TwoProcess, alg);
        hyper.n_lam = 300;
        let mut agent = HarnessAgent::new(alg, &hyper, &inst, 2)?;
        let rewards = run_episode(&inst, &mut agent, 5000, 2)?.instant_rewards();
        let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
        println!(
            "{:>16}: mean reward {mean:.3} over {} rounds",
            alg.to_string(),
            rewards.len()
        );
    }
    Ok(())
}
