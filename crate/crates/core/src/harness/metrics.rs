//! Per-step records, smoothing, oracle extrapolation and cross-seed aggregation.

use crate::error::{Result, RmabError};

/// One row of a per-seed CSV.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub t: u64,
    pub instant_reward: f64,
    pub cumulative_reward: f64,
    pub mean_cumulative_reward: f64,
    pub epsilon: f64,
    /// Grid index chosen by LPQL, -1 otherwise.
    pub lambda_index: i64,
}

/// One row of an aggregate CSV.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AggregateRow {
    pub t: u64,
    pub mean: f64,
    pub p25: f64,
    pub p75: f64,
    pub n_seeds: usize,
}

/// Builds records from instant rewards at t = 1, 2, ...
pub fn records_from_rewards(
    seed: u64,
    rewards: &[f64],
    epsilon: &[f64],
    lambda: &[i64],
) -> Vec<RunRecord> {
    let mut cum = 0.0;
    rewards
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            cum += r;
            let t = k as u64 + 1;
            RunRecord {
                seed,
                t,
                instant_reward: r,
                cumulative_reward: cum,
                mean_cumulative_reward: cum / t as f64,
                epsilon: epsilon[k],
                lambda_index: lambda[k],
            }
        })
        .collect()
}

/// Trailing mean over the last `min(window, t)` points.
pub fn moving_average(series: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for (i, &x) in series.iter().enumerate() {
        sum += x;
        if i >= w {
            sum -= series[i - w];
        }
        out.push(sum / (i + 1).min(w) as f64);
    }
    out
}

/// Mean instant reward over the final `settle_window` entries.
pub fn settled_level(instant: &[f64], settle_window: usize) -> Result<f64> {
    if settle_window == 0 || instant.len() < settle_window {
        return Err(RmabError::TooShort {
            len: instant.len(),
            needed: settle_window.max(1),
        });
    }
    let tail = &instant[instant.len() - settle_window..];
    Ok(tail.iter().sum::<f64>() / settle_window as f64)
}

/// Flat mean-cumulative-reward reference at the settled level, `horizon` rows long.
///
/// Simulated rows keep their instant reward; later rows carry the level.
pub fn extrapolate_oracle(
    records: &[RunRecord],
    settle_window: usize,
    horizon: u64,
) -> Result<Vec<RunRecord>> {
    let instant: Vec<f64> = records.iter().map(|r| r.instant_reward).collect();
    let level = settled_level(&instant, settle_window)?;
    let seed = records.first().map_or(0, |r| r.seed);
    Ok((1..=horizon)
        .map(|t| {
            let cum = level * t as f64;
            RunRecord {
                seed,
                t,
                instant_reward: instant.get(t as usize - 1).copied().unwrap_or(level),
                cumulative_reward: cum,
                mean_cumulative_reward: cum / t as f64,
                epsilon: 0.0,
                lambda_index: -1,
            }
        })
        .collect())
}

/// Linear-interpolation percentile of a sorted slice, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty slice");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Per-timestep mean and quartiles across seeds. Every series must have the same length.
pub fn aggregate(series: &[Vec<f64>]) -> Result<Vec<AggregateRow>> {
    let Some(first) = series.first() else {
        return Err(RmabError::Config("nothing to aggregate".into()));
    };
    let len = first.len();
    if let Some(bad) = series.iter().find(|s| s.len() != len) {
        return Err(RmabError::TooShort {
            len: bad.len().min(len),
            needed: bad.len().max(len),
        });
    }
    let mut col = vec![0.0; series.len()];
    Ok((0..len)
        .map(|k| {
            for (c, s) in col.iter_mut().zip(series) {
                *c = s[k];
            }
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            col.sort_by(f64::total_cmp);
            AggregateRow {
                t: k as u64 + 1,
                mean,
                p25: percentile(&col, 0.25),
                p75: percentile(&col, 0.75),
                n_seeds: col.len(),
            }
        })
        .collect())
}
