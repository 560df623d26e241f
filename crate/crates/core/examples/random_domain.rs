//! Random domain: arms with uniform rewards, increasing costs and random rows.

use rmab::domains::random::gen_random;
use rmab::domains::{random_budget, RandomParams};
use rmab::harness::config::DEFAULT_DISCOUNT;
use rmab::lpql::lambda_max_bound;
use rmab::rng::{stream, INSTANCE_STREAM};

fn main() -> rmab::Result<()> {
    let params = RandomParams {
        n_states: 5,
        n_actions: 5,
        ..Default::default()
    };
    let n = 16;
    let inst = gen_random(
        n,
        &params,
        random_budget(n, params.n_actions),
        DEFAULT_DISCOUNT,
        &mut stream(3, INSTANCE_STREAM),
    )?;
    println!(
        "{} arms, budget {}, λ bound {:.3}",
        inst.n_arms(),
        inst.budget(),
        lambda_max_bound(&inst)?
    );
    for (i, arm) in inst.arms().iter().take(3).enumerate() {
        let costs: Vec<String> = arm.costs().iter().map(|c| format!("{c:.2}")).collect();
        let rewards: Vec<String> = arm.rewards().iter().map(|r| format!("{r:.2}")).collect();
        println!(
            "arm {i}: costs [{}] rewards [{}]",
            costs.join(", "),
            rewards.join(", ")
        );
    }
    let text = inst.to_toml()?;
    let back = rmab::RmabInstance::from_toml(&text)?;
    println!(
        "TOML round trip: {} bytes, identical {}",
        text.len(),
        back == inst
    );
    Ok(())
}
