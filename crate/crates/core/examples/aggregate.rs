//! Per-seed CSVs to mean and quartile envelopes, plain and moving-average.

use std::path::Path;

use rmab::domains::TwoProcessParams;
use rmab::harness::run::seed_file;
use rmab::harness::{aggregate_files, run, Algorithm, DomainSpec, RunConfig, Series};

fn main() -> rmab::Result<()> {
    let domain = DomainSpec::TwoProcess {
        n_arms: 8,
        budget: 4.0,
        params: TwoProcessParams::default(),
    };
    let cfg = RunConfig::new(domain, vec![Algorithm::Ql0], 1000, vec![0, 1, 2, 3]);
    let out = std::env::temp_dir().join("rmab_aggregate");
    run(&cfg, Path::new("."), &out)?;
    let inputs: Vec<_> = cfg
        .seeds
        .iter()
        .map(|&s| seed_file(&out, Algorithm::Ql0, s))
        .collect();
    let plain = aggregate_files(&inputs, Series::MeanCumulative, &out.join("ql0_mean.csv"))?;
    let smooth = aggregate_files(
        &inputs,
        Series::MovingAverage(50),
        &out.join("ql0_ma50.csv"),
    )?;
    for k in [99, 499, 999] {
        let (a, b) = (&plain[k], &smooth[k]);
        println!(
            "t = {:>4}: mean cumulative {:.3} [{:.3}, {:.3}], moving average {:.3} [{:.3}, {:.3}]",
            a.t, a.mean, a.p25, a.p75, b.mean, b.p25, b.p75
        );
    }
    Ok(())
}
