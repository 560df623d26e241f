//! MAIQL learns multi-action indexes of a 3-action arm from random play.

use rand::Rng;
use rmab::maiql::Maiql;
use rmab::oracles::oracle_index;
use rmab::rng::stream;
use rmab::schedules::ScheduleParams;
use rmab::simulator::Experience;
use rmab::{ArmModel, RmabInstance};

fn main() -> rmab::Result<()> {
    let mut t = Vec::new();
    for row in [[0.1, 0.4, 0.6], [0.5, 0.8, 0.9]] {
        for p in row {
            t.extend([1.0 - p, p]);
        }
    }
    let arm = ArmModel::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0], t)?;
    let beta = 0.9;
    let inst = RmabInstance::new(vec![arm.clone()], 2.0, beta)?;
    let mut learner = Maiql::new(&inst, ScheduleParams::new(0.4, 0.2, 500, 0.99)?, 10.0);
    let mut rng = stream(4, 0);
    let mut s = 0;
    for t in 1..=200_000u64 {
        let a = rng.random_range(0..3);
        let next = usize::from(rng.random::<f64>() < arm.prob(s, a, 1));
        let e = Experience {
            arm: 0,
            state: s,
            action: a,
            reward: arm.reward(s),
            next_state: next,
            use_count: 0,
        };
        learner.update(&[e], t);
        s = next;
    }
    for s in 0..2 {
        for j in 1..3 {
            println!(
                "state {s} action {j}: learned {:.3}, exact {:.3}",
                learner.index(0, s, j),
                oracle_index(&arm, s, j, beta, 1e-9)?
            );
        }
    }
    Ok(())
}
