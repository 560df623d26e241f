//! Seeded runs and CSV output.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;

use crate::error::{Result, RmabError};
use crate::model::RmabInstance;
use crate::rng::derive_seed;
use crate::simulator::{Agent, Simulator};

use super::agent::HarnessAgent;
use super::config::{Algorithm, Hyper, OracleSettings, RunConfig};
use super::metrics::{
    aggregate, extrapolate_oracle, moving_average, records_from_rewards, AggregateRow, RunRecord,
};

pub const HASH_PREFIX: &str = "# config-sha256: ";

/// Runs one algorithm on one instance.
///
/// Learners and the random policy are simulated for `horizon` steps. Oracles are
/// simulated for `min(warmup, horizon)` steps and extended to `horizon` at the
/// level of their last `settle` rewards.
pub fn run_on_instance(
    instance: &RmabInstance,
    algorithm: Algorithm,
    hyper: &Hyper,
    horizon: u64,
    oracle: OracleSettings,
    seed: u64,
    run_seed: u64,
) -> Result<Vec<RunRecord>> {
    let mut agent = HarnessAgent::new(algorithm, hyper, instance, run_seed)?;
    let steps = if algorithm.is_oracle() {
        oracle.warmup.min(horizon)
    } else {
        horizon
    };
    let mut sim = Simulator::new(instance, run_seed);
    let mut instant = Vec::with_capacity(steps as usize);
    let mut eps = Vec::with_capacity(steps as usize);
    let mut lam = Vec::with_capacity(steps as usize);
    for t in 1..=steps {
        let s = sim.states().clone();
        let a = agent.act(&s, t)?;
        if !instance.is_feasible(&a)? {
            return Err(RmabError::Infeasible {
                cost: instance.action_cost(&a)?,
                budget: instance.budget(),
            });
        }
        let (rewards, exps) = sim.step(&a)?;
        instant.push(rewards.iter().sum());
        eps.push(agent.epsilon(t));
        lam.push(agent.last_lambda().map_or(-1, |p| p as i64));
        agent.learn(&exps, t);
    }
    let records = records_from_rewards(seed, &instant, &eps, &lam);
    if algorithm.is_oracle() {
        extrapolate_oracle(&records, oracle.settle.min(records.len()), horizon)
    } else {
        Ok(records)
    }
}

/// Runs one (algorithm, seed) pair of a config, sampling that seed's instance.
///
/// `base` resolves relative paths inside the domain spec.
pub fn run_seed(
    config: &RunConfig,
    algorithm: Algorithm,
    seed: u64,
    base: &Path,
) -> Result<Vec<RunRecord>> {
    let run_seed = derive_seed(config.master_seed, seed);
    let instance = config.domain.build(config.discount, run_seed, base)?;
    run_on_instance(
        &instance,
        algorithm,
        &config.hyper(algorithm),
        config.horizon,
        config.oracle,
        seed,
        run_seed,
    )
}

/// The instance a config gives to `seed`.
pub fn seed_instance(config: &RunConfig, seed: u64, base: &Path) -> Result<RmabInstance> {
    config
        .domain
        .build(config.discount, derive_seed(config.master_seed, seed), base)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_rows<T: serde::Serialize>(path: &Path, hash: &str, rows: &[T]) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "{HASH_PREFIX}{hash}")?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_records(path: &Path, hash: &str, records: &[RunRecord]) -> Result<()> {
    write_rows(path, hash, records)
}

pub fn write_aggregate(path: &Path, hash: &str, rows: &[AggregateRow]) -> Result<()> {
    write_rows(path, hash, rows)
}

/// Reads a per-seed CSV; returns the embedded config hash, if any, and the rows.
pub fn read_records(path: &Path) -> Result<(Option<String>, Vec<RunRecord>)> {
    let mut first = String::new();
    BufReader::new(File::open(path)?).read_line(&mut first)?;
    let hash = first
        .trim_end()
        .strip_prefix(HASH_PREFIX)
        .map(str::to_string);
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)?;
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<RunRecord>, _>>()?;
    Ok((hash, rows))
}

/// Which per-seed series an aggregate summarizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Series {
    MeanCumulative,
    /// Trailing moving average of instant reward.
    MovingAverage(usize),
}

pub fn series_of(records: &[RunRecord], which: Series) -> Vec<f64> {
    match which {
        Series::MeanCumulative => records.iter().map(|r| r.mean_cumulative_reward).collect(),
        Series::MovingAverage(w) => {
            let x: Vec<f64> = records.iter().map(|r| r.instant_reward).collect();
            moving_average(&x, w)
        }
    }
}

/// Aggregates per-seed CSVs into `out`. All inputs must carry the same hash.
pub fn aggregate_files(inputs: &[PathBuf], which: Series, out: &Path) -> Result<Vec<AggregateRow>> {
    let mut hash: Option<Option<String>> = None;
    let mut series = Vec::with_capacity(inputs.len());
    for p in inputs {
        let (h, recs) = read_records(p)?;
        match &hash {
            None => hash = Some(h),
            Some(prev) if *prev != h => {
                return Err(RmabError::Config(format!(
                    "{} was produced by a different config",
                    p.display()
                )))
            }
            _ => {}
        }
        series.push(series_of(&recs, which));
    }
    let rows = aggregate(&series)?;
    write_aggregate(out, hash.flatten().as_deref().unwrap_or("unknown"), &rows)?;
    Ok(rows)
}

pub fn seed_file(dir: &Path, algorithm: Algorithm, seed: u64) -> PathBuf {
    dir.join(format!("{algorithm}_seed{seed}.csv"))
}

pub fn aggregate_file(dir: &Path, algorithm: Algorithm) -> PathBuf {
    dir.join(format!("{algorithm}_aggregate.csv"))
}

pub fn moving_aggregate_file(dir: &Path, algorithm: Algorithm, window: usize) -> PathBuf {
    dir.join(format!("{algorithm}_aggregate_ma{window}.csv"))
}

/// What a finished run wrote.
#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    /// Final mean cumulative reward per algorithm, in seed order.
    pub finals: BTreeMap<Algorithm, Vec<f64>>,
}

/// Executes every (algorithm, seed) pair of `config` and writes the CSVs under `out_dir`.
///
/// Seeds of one algorithm run in parallel. If any seed fails, a
/// `<algorithm>_aggregate.partial` marker naming the failures is written in place
/// of the aggregate and the first error is returned.
pub fn run(config: &RunConfig, base: &Path, out_dir: &Path) -> Result<RunSummary> {
    config.validate()?;
    let hash = config.hash();
    fs::create_dir_all(out_dir)?;
    let mut summary = RunSummary::default();
    for &alg in &config.algorithms {
        info!(
            "{alg}: {} seeds x {} steps",
            config.seeds.len(),
            config.horizon
        );
        let results: Vec<(u64, Result<Vec<RunRecord>>)> = config
            .seeds
            .par_iter()
            .map(|&seed| (seed, run_seed(config, alg, seed, base)))
            .collect();
        let mut ok = Vec::with_capacity(results.len());
        let mut failed = Vec::new();
        for (seed, res) in results {
            match res {
                Ok(recs) => {
                    let path = seed_file(out_dir, alg, seed);
                    write_records(&path, &hash, &recs)?;
                    summary.files.push(path);
                    ok.push(recs);
                }
                Err(e) => failed.push((seed, e)),
            }
        }
        if !failed.is_empty() {
            let marker = out_dir.join(format!("{alg}_aggregate.partial"));
            let mut m = create(&marker)?;
            writeln!(m, "{HASH_PREFIX}{hash}")?;
            for (seed, e) in &failed {
                writeln!(m, "seed {seed}: {e}")?;
            }
            m.flush()?;
            return Err(failed.remove(0).1);
        }
        let mc: Vec<Vec<f64>> = ok
            .iter()
            .map(|r| series_of(r, Series::MeanCumulative))
            .collect();
        summary.finals.insert(
            alg,
            mc.iter()
                .map(|s| s.last().copied().unwrap_or(0.0))
                .collect(),
        );
        let path = aggregate_file(out_dir, alg);
        write_aggregate(&path, &hash, &aggregate(&mc)?)?;
        summary.files.push(path);
        if let Some(w) = config.moving_average_window {
            let ma: Vec<Vec<f64>> = ok
                .iter()
                .map(|r| series_of(r, Series::MovingAverage(w)))
                .collect();
            let path = moving_aggregate_file(out_dir, alg, w);
            write_aggregate(&path, &hash, &aggregate(&ma)?)?;
            summary.files.push(path);
        }
    }
    Ok(summary)
}
