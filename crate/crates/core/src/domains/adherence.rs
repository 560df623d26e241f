//! Adherence-style arms built from daily 0/1 traces.
//!
//! A state is the last `L` days, oldest day in the highest bit and the most
//! recent day in bit 0, so the next state is `((s << 1) | day) & (2^L - 1)`.
//! Per-patient transition counts are clustered with k-means; an arm is drawn by
//! picking a cluster in proportion to its size and sampling each row's
//! probability of an adherent next day from a Beta prior built from the
//! cluster's counts, with the adherent pseudo-count scaled up by the action.

use std::fs;
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use super::kmeans::kmeans;
use super::two_process::BinaryChain;
use crate::error::{Result, RmabError};
use crate::model::{ArmModel, RmabInstance};

pub const TRACE_DAYS: usize = 168;
pub const COSTS: [f64; 3] = [0.0, 1.0, 2.0];

/// Parses one patient per line, `TRACE_DAYS` comma-separated 0/1 values.
pub fn parse_traces(text: &str) -> Result<Vec<Vec<u8>>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut days = Vec::with_capacity(TRACE_DAYS);
        for field in line.split(',') {
            match field.trim() {
                "0" => days.push(0),
                "1" => days.push(1),
                other => {
                    return Err(RmabError::MalformedTrace {
                        line: i + 1,
                        reason: format!("value {other:?} is not 0 or 1"),
                    })
                }
            }
        }
        if days.len() != TRACE_DAYS {
            return Err(RmabError::MalformedTrace {
                line: i + 1,
                reason: format!("{} days, expected {TRACE_DAYS}", days.len()),
            });
        }
        out.push(days);
    }
    Ok(out)
}

pub fn format_traces(traces: &[Vec<u8>]) -> String {
    let mut s = String::new();
    for t in traces {
        let line: Vec<&str> = t.iter().map(|&d| if d == 1 { "1" } else { "0" }).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

pub fn read_traces(path: impl AsRef<Path>) -> Result<Vec<Vec<u8>>> {
    parse_traces(&fs::read_to_string(path)?)
}

pub fn write_traces(path: impl AsRef<Path>, traces: &[Vec<u8>]) -> Result<()> {
    fs::write(path, format_traces(traces))?;
    Ok(())
}

/// Successor of history state `s` after observing `day`.
pub fn next_state(s: usize, day: u8, history: usize) -> usize {
    ((s << 1) | day as usize) & ((1 << history) - 1)
}

/// Flattened `2^L x 2^L` counts of history-state transitions in one trace.
pub fn count_transitions(trace: &[u8], history: usize) -> Vec<u64> {
    let ns = 1usize << history;
    let mut counts = vec![0u64; ns * ns];
    if trace.len() < history + 1 {
        warn!(
            "trace of {} days has no full window for history length {history}",
            trace.len()
        );
        return counts;
    }
    let mut s = trace[..history]
        .iter()
        .fold(0usize, |acc, &d| next_state(acc, d, history));
    for &d in &trace[history..] {
        let n = next_state(s, d, history);
        counts[s * ns + n] += 1;
        s = n;
    }
    counts
}

/// A 2-state Markov mixture component for synthetic traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticMode {
    pub weight: f64,
    /// `P(adherent tomorrow | adherent today)`
    pub stay: f64,
    /// `P(adherent tomorrow | not adherent today)`
    pub recover: f64,
}

impl SyntheticMode {
    pub fn stationary(&self) -> f64 {
        let denom = self.recover + 1.0 - self.stay;
        if denom <= 0.0 {
            1.0
        } else {
            self.recover / denom
        }
    }
}

pub fn default_modes() -> Vec<SyntheticMode> {
    vec![
        SyntheticMode {
            weight: 0.5,
            stay: 0.95,
            recover: 0.5,
        },
        SyntheticMode {
            weight: 0.3,
            stay: 0.8,
            recover: 0.3,
        },
        SyntheticMode {
            weight: 0.2,
            stay: 0.6,
            recover: 0.1,
        },
    ]
}

/// Traces of `days` days from a mixture of 2-state chains started at stationarity.
pub fn gen_synthetic_traces<R: Rng + ?Sized>(
    n_patients: usize,
    modes: &[SyntheticMode],
    days: usize,
    rng: &mut R,
) -> Vec<Vec<u8>> {
    let total: f64 = modes.iter().map(|m| m.weight).sum();
    (0..n_patients)
        .map(|_| {
            let mut u = rng.random::<f64>() * total;
            let mut mode = modes[modes.len() - 1];
            for m in modes {
                if u < m.weight {
                    mode = *m;
                    break;
                }
                u -= m.weight;
            }
            let mut day = u8::from(rng.random::<f64>() < mode.stationary());
            let mut trace = Vec::with_capacity(days);
            for _ in 0..days {
                trace.push(day);
                let p = if day == 1 { mode.stay } else { mode.recover };
                day = u8::from(rng.random::<f64>() < p);
            }
            trace
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdherenceConfig {
    pub history_length: usize,
    pub k_clusters: usize,
    pub restarts: usize,
    pub kmeans_seed: u64,
    /// Multiplier on the adherent pseudo-count, one per action.
    pub action_scale: Vec<f64>,
    /// Added to both Beta parameters.
    pub smoothing: f64,
    pub fraction_type_a: f64,
}

impl Default for AdherenceConfig {
    fn default() -> Self {
        Self {
            history_length: 2,
            k_clusters: 10,
            restarts: 10,
            kmeans_seed: 0,
            action_scale: vec![1.0, 1.5, 2.0],
            smoothing: 1.0,
            fraction_type_a: 0.25,
        }
    }
}

impl AdherenceConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(RmabError::Config(m));
        if !(1..=6).contains(&self.history_length) {
            return bad(format!(
                "history_length {} outside 1..=6",
                self.history_length
            ));
        }
        if self.k_clusters == 0 {
            return bad("k_clusters must be >= 1".into());
        }
        if self.action_scale.len() != COSTS.len() {
            return bad(format!("need {} action scale factors", COSTS.len()));
        }
        if self.action_scale.iter().any(|&s| s < 1.0)
            || self.action_scale.windows(2).any(|w| w[1] < w[0])
        {
            return bad("action scale factors must be >= 1 and non-decreasing".into());
        }
        if !(self.smoothing > 0.0) {
            return bad("smoothing must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.fraction_type_a) {
            return bad("fraction_type_a must lie in [0, 1]".into());
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        1 << self.history_length
    }
}

/// Pooled counts per cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPriors {
    pub history_length: usize,
    pub sizes: Vec<usize>,
    /// Flattened `2^L x 2^L` counts per cluster.
    pub counts: Vec<Vec<u64>>,
}

impl ClusterPriors {
    /// `(adherent, non-adherent)` next-day counts out of state `s` in cluster `c`.
    pub fn row_counts(&self, c: usize, s: usize) -> (f64, f64) {
        let l = self.history_length;
        let ns = 1 << l;
        let row = &self.counts[c][s * ns..(s + 1) * ns];
        (
            row[next_state(s, 1, l)] as f64,
            row[next_state(s, 0, l)] as f64,
        )
    }
}

/// Clusters per-patient counts and pools them within each cluster.
pub fn cluster_counts(per_patient: &[Vec<u64>], config: &AdherenceConfig) -> Result<ClusterPriors> {
    config.validate()?;
    if per_patient.is_empty() {
        return Err(RmabError::Config("no patients to cluster".into()));
    }
    let features: Vec<Vec<f64>> = per_patient
        .iter()
        .map(|c| c.iter().map(|&x| x as f64).collect())
        .collect();
    let clustering = kmeans(
        &features,
        config.k_clusters,
        config.restarts,
        config.kmeans_seed,
    );
    let dim = per_patient[0].len();
    let mut counts = vec![vec![0u64; dim]; clustering.n_clusters()];
    for (c, &l) in per_patient.iter().zip(&clustering.labels) {
        counts[l].iter_mut().zip(c).for_each(|(a, b)| *a += b);
    }
    Ok(ClusterPriors {
        history_length: config.history_length,
        sizes: clustering.sizes(),
        counts,
    })
}

/// Runs ingestion and clustering over raw traces.
pub fn priors_from_traces(traces: &[Vec<u8>], config: &AdherenceConfig) -> Result<ClusterPriors> {
    let counts: Vec<Vec<u64>> = traces
        .iter()
        .map(|t| count_transitions(t, config.history_length))
        .collect();
    cluster_counts(&counts, config)
}

/// Builds a history-`L` arm from per-`(last day, action)` next-day probabilities.
fn history_arm(history: usize, p_adherent: impl Fn(usize, usize) -> f64) -> Result<ArmModel> {
    let ns = 1 << history;
    let na = COSTS.len();
    let mut t = vec![0.0; ns * na * ns];
    for s in 0..ns {
        for a in 0..na {
            let p = p_adherent(s, a);
            let base = (s * na + a) * ns;
            t[base + next_state(s, 1, history)] += p;
            t[base + next_state(s, 0, history)] += 1.0 - p;
        }
    }
    let rewards = (0..ns).map(|s| (s & 1) as f64).collect();
    ArmModel::new(COSTS.to_vec(), rewards, t)
}

/// One arm sampled from the cluster priors.
pub fn sample_adherence_arm<R: Rng + ?Sized>(
    priors: &ClusterPriors,
    config: &AdherenceConfig,
    rng: &mut R,
) -> Result<ArmModel> {
    let total: usize = priors.sizes.iter().sum();
    let mut u = rng.random_range(0..total);
    let mut cluster = 0;
    for (c, &n) in priors.sizes.iter().enumerate() {
        if u < n {
            cluster = c;
            break;
        }
        u -= n;
    }
    let ns = 1 << priors.history_length;
    let mut probs = vec![0.0; ns * COSTS.len()];
    for s in 0..ns {
        let (yes, no) = priors.row_counts(cluster, s);
        for (a, &scale) in config.action_scale.iter().enumerate() {
            let beta = Beta::new(yes * scale + config.smoothing, no + config.smoothing)
                .map_err(|e| RmabError::Config(format!("beta prior: {e}")))?;
            probs[s * COSTS.len() + a] = beta.sample(rng);
        }
    }
    history_arm(priors.history_length, |s, a| probs[s * COSTS.len() + a])
}

/// A two-state chain lifted to history length `L`; only the last day matters.
pub fn history_chain_arm(chain: &BinaryChain, history: usize) -> Result<ArmModel> {
    history_arm(history, |s, a| chain.p_good(s & 1 == 1, a))
}

/// `N` arms: `ceil(fraction N)` lifted Type-A chains, the rest sampled from the priors.
///
/// Returns the instance and a flag per arm, true for Type-A.
pub fn gen_adherence_instance<R: Rng + ?Sized>(
    config: &AdherenceConfig,
    priors: &ClusterPriors,
    type_a: &BinaryChain,
    n: usize,
    budget: f64,
    discount: f64,
    rng: &mut R,
) -> Result<(RmabInstance, Vec<bool>)> {
    config.validate()?;
    if priors.history_length != config.history_length {
        return Err(RmabError::Config(format!(
            "priors built for history {}, config asks for {}",
            priors.history_length, config.history_length
        )));
    }
    let n_a = (((config.fraction_type_a * n as f64) - 1e-9).ceil().max(0.0) as usize).min(n);
    let mut kinds: Vec<bool> = (0..n).map(|i| i < n_a).collect();
    kinds.shuffle(rng);
    let lifted = history_chain_arm(type_a, config.history_length)?;
    let arms = kinds
        .iter()
        .map(|&is_a| {
            if is_a {
                Ok(lifted.clone())
            } else {
                sample_adherence_arm(priors, config, rng)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((RmabInstance::new(arms, budget, discount)?, kinds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::two_process::TwoProcessParams;
    use crate::rng::stream;

    #[test]
    fn all_ones_trace() {
        let c = count_transitions(&[1; 10], 2);
        assert_eq!(c[3 * 4 + 3], 8);
        assert_eq!(c.iter().sum::<u64>(), 8);
    }

    #[test]
    fn alternating_trace() {
        let trace: Vec<u8> = (0..10).map(|i| (i % 2) as u8).collect();
        let c = count_transitions(&trace, 2);
        // states 01 = 1 and 10 = 2 alternate
        assert_eq!(c[4 + 2] + c[2 * 4 + 1], 8);
        assert_eq!(c[4 + 2], 4);
        assert_eq!(c[2 * 4 + 1], 4);
    }

    #[test]
    fn short_trace_has_no_counts() {
        assert!(count_transitions(&[1, 0], 2).iter().all(|&x| x == 0));
    }

    #[test]
    fn parse_rejects_bad_rows() {
        let good = format_traces(&[vec![1; TRACE_DAYS]]);
        assert_eq!(parse_traces(&good).unwrap().len(), 1);
        let short = "1,0,1\n";
        assert!(matches!(
            parse_traces(short),
            Err(RmabError::MalformedTrace { line: 1, .. })
        ));
        let mut bad = good.clone();
        bad.push_str(&good.replacen('1', "2", 1));
        assert!(matches!(
            parse_traces(&bad),
            Err(RmabError::MalformedTrace { line: 2, .. })
        ));
    }

    #[test]
    fn synthetic_mode_adherence() {
        let mode = SyntheticMode {
            weight: 1.0,
            stay: 0.95,
            recover: 0.5,
        };
        let traces = gen_synthetic_traces(1000, &[mode], TRACE_DAYS, &mut stream(1, 0));
        let total: usize = traces.iter().flatten().map(|&d| d as usize).sum();
        let mean = total as f64 / (1000 * TRACE_DAYS) as f64;
        assert!(mean > 0.8, "{mean}");
    }

    #[test]
    fn pipeline_produces_valid_arms() {
        let config = AdherenceConfig {
            history_length: 3,
            ..Default::default()
        };
        let traces = gen_synthetic_traces(200, &default_modes(), TRACE_DAYS, &mut stream(2, 0));
        let priors = priors_from_traces(&traces, &config).unwrap();
        assert!(priors.sizes.iter().sum::<usize>() == 200);
        let (inst, kinds) = gen_adherence_instance(
            &config,
            &priors,
            &TwoProcessParams::default_type_a(),
            16,
            4.0,
            0.9,
            &mut stream(3, 0),
        )
        .unwrap();
        assert_eq!(kinds.iter().filter(|&&k| k).count(), 4);
        for arm in inst.arms() {
            assert!(arm.validate().is_ok());
            for s in 0..8 {
                for a in 0..3 {
                    assert!(arm.row(s, a).iter().filter(|&&p| p > 0.0).count() <= 2);
                }
            }
        }
    }

    #[test]
    fn config_validation() {
        let mut c = AdherenceConfig::default();
        assert!(c.validate().is_ok());
        c.action_scale = vec![1.0, 2.0, 1.5];
        assert!(c.validate().is_err());
        c.action_scale = vec![1.0, 1.5, 2.0];
        c.history_length = 7;
        assert!(c.validate().is_err());
    }
}
