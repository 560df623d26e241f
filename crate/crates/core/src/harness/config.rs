//! Run configuration: domain, algorithms, seeds and per-algorithm hyperparameters.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domains::adherence::{
    default_modes, gen_adherence_instance, gen_synthetic_traces, priors_from_traces, read_traces,
    TRACE_DAYS,
};
use crate::domains::random::gen_random;
use crate::domains::two_process::gen_two_process;
use crate::domains::{random_budget, AdherenceConfig, RandomParams, TwoProcessParams};
use crate::error::{Result, RmabError};
use crate::maiql::RewardMode;
use crate::model::RmabInstance;
use crate::replay::ReplaySchedule;
use crate::rng::{stream, INSTANCE_STREAM};
use crate::schedules::ScheduleParams;

pub const DEFAULT_DISCOUNT: f64 = 0.97;
pub const TWO_PROCESS_LAMBDA_MAX: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Maiql,
    MaiqlAprx,
    Lpql,
    Wibql,
    Ql0,
    OracleLp,
    OracleLambda0,
    OracleLpIndex,
    Random,
}

impl Algorithm {
    pub const ALL: [Algorithm; 9] = [
        Algorithm::Maiql,
        Algorithm::MaiqlAprx,
        Algorithm::Lpql,
        Algorithm::Wibql,
        Algorithm::Ql0,
        Algorithm::OracleLp,
        Algorithm::OracleLambda0,
        Algorithm::OracleLpIndex,
        Algorithm::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Maiql => "maiql",
            Algorithm::MaiqlAprx => "maiql_aprx",
            Algorithm::Lpql => "lpql",
            Algorithm::Wibql => "wibql",
            Algorithm::Ql0 => "ql0",
            Algorithm::OracleLp => "oracle_lp",
            Algorithm::OracleLambda0 => "oracle_lambda0",
            Algorithm::OracleLpIndex => "oracle_lp_index",
            Algorithm::Random => "random",
        }
    }

    pub fn is_oracle(self) -> bool {
        matches!(
            self,
            Algorithm::OracleLp | Algorithm::OracleLambda0 | Algorithm::OracleLpIndex
        )
    }

    /// Learners with an ε-greedy schedule.
    pub fn is_learner(self) -> bool {
        !self.is_oracle() && self != Algorithm::Random
    }

    /// Uses a λ grid (learned or exact).
    pub fn uses_grid(self) -> bool {
        matches!(
            self,
            Algorithm::MaiqlAprx | Algorithm::Lpql | Algorithm::OracleLp
        )
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = RmabError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| RmabError::Config(format!("unknown algorithm `{s}`")))
    }
}

/// Where instances come from. One instance is drawn per seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    TwoProcess {
        n_arms: usize,
        budget: f64,
        #[serde(default)]
        params: TwoProcessParams,
    },
    Random {
        n_arms: usize,
        /// Defaults to `N |A| / 2`.
        budget: Option<f64>,
        #[serde(default)]
        params: RandomParams,
    },
    Adherence {
        n_arms: usize,
        budget: f64,
        #[serde(default)]
        config: AdherenceConfig,
        /// Trace file; synthetic patients are generated when absent.
        traces: Option<PathBuf>,
        #[serde(default = "default_patients")]
        n_patients: usize,
        #[serde(default)]
        trace_seed: u64,
        #[serde(default)]
        type_a: Option<crate::domains::BinaryChain>,
    },
    /// A fixed instance file, shared by every seed.
    File { path: PathBuf },
}

fn default_patients() -> usize {
    500
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    TwoProcess,
    Random,
    Adherence,
    File,
}

impl DomainSpec {
    pub fn kind(&self) -> DomainKind {
        match self {
            DomainSpec::TwoProcess { .. } => DomainKind::TwoProcess,
            DomainSpec::Random { .. } => DomainKind::Random,
            DomainSpec::Adherence { .. } => DomainKind::Adherence,
            DomainSpec::File { .. } => DomainKind::File,
        }
    }

    /// Builds the instance for one seed. `instance_seed` feeds the instance stream.
    pub fn build(&self, discount: f64, instance_seed: u64, base: &Path) -> Result<RmabInstance> {
        let mut rng = stream(instance_seed, INSTANCE_STREAM);
        match self {
            DomainSpec::TwoProcess {
                n_arms,
                budget,
                params,
            } => Ok(gen_two_process(*n_arms, params, *budget, discount, &mut rng)?.0),
            DomainSpec::Random {
                n_arms,
                budget,
                params,
            } => {
                let b = budget.unwrap_or_else(|| random_budget(*n_arms, params.n_actions));
                gen_random(*n_arms, params, b, discount, &mut rng)
            }
            DomainSpec::Adherence {
                n_arms,
                budget,
                config,
                traces,
                n_patients,
                trace_seed,
                type_a,
            } => {
                let traces = match traces {
                    Some(p) => read_traces(base.join(p))?,
                    None => gen_synthetic_traces(
                        *n_patients,
                        &default_modes(),
                        TRACE_DAYS,
                        &mut stream(*trace_seed, INSTANCE_STREAM),
                    ),
                };
                let priors = priors_from_traces(&traces, config)?;
                let chain = type_a
                    .clone()
                    .unwrap_or_else(TwoProcessParams::default_type_a);
                Ok(gen_adherence_instance(
                    config, &priors, &chain, *n_arms, *budget, discount, &mut rng,
                )?
                .0)
            }
            DomainSpec::File { path } => RmabInstance::load(base.join(path)),
        }
    }
}

/// Fully resolved hyperparameters of one algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub c: f64,
    pub c_prime: f64,
    pub d: u64,
    pub epsilon0: f64,
    /// Tuples per replay; 0 disables replay.
    pub replay_per_dream: usize,
    pub replay_period: u64,
    pub n_lam: usize,
    /// Index clamp and grid upper end. `None` takes the instance's reward/cost bound.
    pub lambda_max: Option<f64>,
    pub reward_mode: RewardMode,
    /// Non-passive action of the binary reduction.
    pub wibql_action: usize,
}

impl Hyper {
    pub fn schedule(&self) -> Result<ScheduleParams> {
        ScheduleParams::new(self.c, self.c_prime, self.d, self.epsilon0)
    }

    pub fn replay(&self) -> ReplaySchedule {
        if self.replay_per_dream == 0 || self.replay_period == 0 {
            ReplaySchedule::NEVER
        } else {
            ReplaySchedule::new(self.replay_per_dream, self.replay_period)
        }
    }

    fn apply(&mut self, o: &HyperOverride) {
        macro_rules! take {
            ($($f:ident),*) => {$(if let Some(v) = o.$f { self.$f = v; })*};
        }
        take!(
            c,
            c_prime,
            d,
            epsilon0,
            replay_per_dream,
            replay_period,
            n_lam,
            reward_mode,
            wibql_action
        );
        if o.lambda_max.is_some() {
            self.lambda_max = o.lambda_max;
        }
    }
}

/// Partial [`Hyper`] as written in a config file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperOverride {
    pub c: Option<f64>,
    pub c_prime: Option<f64>,
    pub d: Option<u64>,
    pub epsilon0: Option<f64>,
    pub replay_per_dream: Option<usize>,
    pub replay_period: Option<u64>,
    pub n_lam: Option<usize>,
    pub lambda_max: Option<f64>,
    pub reward_mode: Option<RewardMode>,
    pub wibql_action: Option<usize>,
}

fn row(
    c: f64,
    c_prime: f64,
    d: u64,
    replay: (usize, u64),
    n_lam: usize,
    lambda_max: Option<f64>,
) -> Hyper {
    Hyper {
        c,
        c_prime,
        d,
        epsilon0: 0.99,
        replay_per_dream: replay.0,
        replay_period: replay.1,
        n_lam,
        lambda_max,
        reward_mode: RewardMode::Discounted,
        wibql_action: 1,
    }
}

const NO_REPLAY: (usize, u64) = (0, 0);

/// Published defaults per domain. Rows absent from the tables borrow the
/// closest learner: WIBQL the MAIQL row and QL0 the LPQL row.
pub fn default_hyper(domain: DomainKind, algorithm: Algorithm) -> Hyper {
    use Algorithm::*;
    match domain {
        DomainKind::TwoProcess | DomainKind::File => {
            let lm = Some(TWO_PROCESS_LAMBDA_MAX);
            match algorithm {
                Wibql => row(0.1, 0.2, 500, NO_REPLAY, 3000, lm),
                Ql0 => row(0.2, 0.4, 500, (1000, 100), 3000, lm),
                Maiql => row(0.1, 0.2, 500, (1000, 10), 3000, lm),
                MaiqlAprx => row(0.4, 0.8, 500, (1000, 100), 3000, lm),
                _ => row(0.4, 0.8, 500, NO_REPLAY, 3000, lm),
            }
        }
        DomainKind::Random => match algorithm {
            Maiql | Wibql => row(0.2, 0.4, 500, (1000, 100), 2000, None),
            _ => row(0.8, 1.6, 500, NO_REPLAY, 2000, None),
        },
        DomainKind::Adherence => match algorithm {
            Ql0 => row(0.8, 1.6, 1000, (1000, 10), 2000, None),
            Maiql | Wibql => row(0.05, 0.1, 2000, (1000, 5), 2000, None),
            _ => row(0.8, 1.6, 1000, (1000, 5), 2000, None),
        },
    }
}

/// Exact-oracle runs: simulate `warmup` steps, average the last `settle`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleSettings {
    pub warmup: u64,
    pub settle: usize,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            warmup: 1000,
            settle: 500,
        }
    }
}

/// A run config as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithms: Vec<Algorithm>,
    pub domain: DomainSpec,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_discount")]
    pub discount: f64,
    #[serde(default)]
    pub oracle: OracleSettings,
    /// Extra aggregate over trailing moving averages of instant reward.
    #[serde(default)]
    pub moving_average_window: Option<usize>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub hyper: BTreeMap<Algorithm, HyperOverride>,
}

fn default_discount() -> f64 {
    DEFAULT_DISCOUNT
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

impl RunConfig {
    pub fn new(
        domain: DomainSpec,
        algorithms: Vec<Algorithm>,
        horizon: u64,
        seeds: Vec<u64>,
    ) -> Self {
        Self {
            algorithms,
            domain,
            horizon,
            seeds,
            master_seed: 0,
            discount: DEFAULT_DISCOUNT,
            oracle: OracleSettings::default(),
            moving_average_window: None,
            output: default_output(),
            hyper: BTreeMap::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| RmabError::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(RmabError::Config(m.to_string()));
        if self.horizon < 1 {
            return bad("horizon must be >= 1");
        }
        if self.seeds.is_empty() {
            return bad("seed list is empty");
        }
        if self.algorithms.is_empty() {
            return bad("no algorithm selected");
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return bad("discount must lie in (0, 1)");
        }
        if self.oracle.settle == 0 || self.oracle.settle as u64 > self.oracle.warmup {
            return bad("oracle settle window must lie in 1..=warmup");
        }
        if self.moving_average_window == Some(0) {
            return bad("moving average window must be >= 1");
        }
        for a in &self.algorithms {
            let h = self.hyper(*a);
            h.schedule()?;
            if a.uses_grid() && h.n_lam == 0 {
                return bad("n_lam must be >= 1");
            }
            if h.lambda_max.is_some_and(|l| !(l > 0.0)) {
                return bad("lambda_max must be positive");
            }
        }
        Ok(())
    }

    /// Table defaults for the domain, then the file's overrides.
    pub fn hyper(&self, algorithm: Algorithm) -> Hyper {
        let mut h = default_hyper(self.domain.kind(), algorithm);
        if let Some(o) = self.hyper.get(&algorithm) {
            h.apply(o);
        }
        h
    }

    /// The config with every algorithm's hyperparameters spelled out.
    pub fn resolved(&self) -> ResolvedConfig {
        ResolvedConfig {
            config: self.clone(),
            resolved: self
                .algorithms
                .iter()
                .map(|&a| (a, self.hyper(a)))
                .collect(),
        }
    }

    /// SHA-256 of the resolved config rendered as TOML.
    pub fn hash(&self) -> String {
        let text = toml::to_string(&self.resolved()).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    #[serde(flatten)]
    pub config: RunConfig,
    pub resolved: BTreeMap<Algorithm, Hyper>,
}

#[cfg(test)]
mod tests {
    use super::*;

    const TP: &str = r#"
algorithms = ["lpql", "ql0"]
horizon = 100
seeds = [0, 1]

[domain]
kind = "two_process"
n_arms = 16
budget = 8.0

[hyper.lpql]
n_lam = 50
"#;

    #[test]
    fn parse_and_defaults() {
        let c = RunConfig::from_toml(TP).unwrap();
        assert_eq!(c.discount, DEFAULT_DISCOUNT);
        let h = c.hyper(Algorithm::Lpql);
        assert_eq!(h.n_lam, 50);
        assert_eq!(h.c, 0.4);
        assert_eq!(h.lambda_max, Some(3.0));
        let q = c.hyper(Algorithm::Ql0);
        assert_eq!((q.c, q.replay_per_dream, q.replay_period), (0.2, 1000, 100));
    }

    #[test]
    fn hash_tracks_resolved_values() {
        let a = RunConfig::from_toml(TP).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.hyper.get_mut(&Algorithm::Lpql).unwrap().n_lam = Some(51);
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(RunConfig::from_toml(&TP.replace("horizon = 100", "horizon = 0")).is_err());
        assert!(RunConfig::from_toml(&TP.replace("seeds = [0, 1]", "seeds = []")).is_err());
        assert!(RunConfig::from_toml(&TP.replace("\"ql0\"", "\"ql1\"")).is_err());
        assert!("nope".parse::<Algorithm>().is_err());
        assert_eq!(
            "oracle_lp_index".parse::<Algorithm>().unwrap(),
            Algorithm::OracleLpIndex
        );
    }
}
