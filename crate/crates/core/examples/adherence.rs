//! Adherence domain: traces to clustered counts to sampled history-based arms.

use rmab::domains::adherence::*;
use rmab::domains::{AdherenceConfig, TwoProcessParams};
use rmab::harness::config::DEFAULT_DISCOUNT;
use rmab::rng::stream;

fn main() -> rmab::Result<()> {
    let traces = gen_synthetic_traces(300, &default_modes(), TRACE_DAYS, &mut stream(1, 0));
    let adherent: f64 =
        traces.iter().flatten().map(|&d| d as f64).sum::<f64>() / (300 * TRACE_DAYS) as f64;
    println!(
        "{} synthetic patients, {:.1}% adherent days",
        traces.len(),
        100.0 * adherent
    );

    let config = AdherenceConfig {
        history_length: 3,
        ..Default::default()
    };
    let priors = priors_from_traces(&traces, &config)?;
    println!("cluster sizes {:?}", priors.sizes);

    let type_a = TwoProcessParams::default_type_a();
    let (inst, is_a) = gen_adherence_instance(
        &config,
        &priors,
        &type_a,
        12,
        4.0,
        DEFAULT_DISCOUNT,
        &mut stream(1, 1),
    )?;
    println!(
        "{} arms with {} states each, {} Type-A",
        inst.n_arms(),
        inst.arm(0).n_states(),
        is_a.iter().filter(|&&a| a).count()
    );
    let arm = inst.arms().iter().zip(&is_a).find(|(_, &a)| !a).unwrap().0;
    for s in 0..arm.n_states() {
        let p: Vec<String> = (0..3)
            .map(|a| format!("{:.2}", arm.prob(s, a, next_state(s, 1, 3))))
            .collect();
        println!(
            "history {s:03b}: P(adherent tomorrow | a = 0, 1, 2) = [{}]",
            p.join(", ")
        );
    }
    Ok(())
}
