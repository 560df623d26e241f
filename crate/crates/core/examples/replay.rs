//! Replay buffer: tuples used less often are drawn more often.

use rmab::replay::{ReplayBuffer, ReplaySchedule};
use rmab::rng::stream;
use rmab::simulator::Experience;

fn main() -> rmab::Result<()> {
    let tuple = |arm, use_count| Experience {
        arm,
        state: 0,
        action: 0,
        reward: 0.0,
        next_state: 0,
        use_count,
    };
    let mut rng = stream(0, 0);
    let n = 100_000;
    let mut fresh = 0;
    for _ in 0..n {
        let mut b = ReplayBuffer::default();
        b.push(tuple(0, 0));
        b.restore(tuple(1, 3));
        fresh += usize::from(b.sample(1, &mut rng)?[0].arm == 0);
    }
    println!(
        "unused vs thrice-used tuple: drawn {:.3} of the time (weights 1 and 1/4)",
        fresh as f64 / n as f64
    );

    let schedule = ReplaySchedule::new(1000, 10);
    let mut b = ReplayBuffer::default();
    for t in 1..=50u64 {
        b.push(tuple(t as usize, 0));
        if schedule.is_due(t) {
            b.sample(schedule.per_dream, &mut rng)?;
        }
    }
    let counts: Vec<u64> = b.entries().map(|e| e.use_count).collect();
    println!("use counts after 5 dreams: {counts:?}");
    Ok(())
}
