//! Uniform wrapper that turns every algorithm into an [`Agent`].

use crate::baselines::{PlainQTable, Ql0};
use crate::error::{Result, RmabError};
use crate::lpql::{lambda_max_bound, LambdaGrid, LambdaQTable, Lpql};
use crate::maiql::{Maiql, Wibql};
use crate::model::{ActionVector, RmabInstance, StateVector};
use crate::oracles::{
    oracle_lambda0_policy, oracle_lambda0_table, oracle_lp_index_policy, oracle_lp_policy,
    oracle_q_table, IndexMode, IndexTable, VI_MAX_ITER, VI_TOL,
};
use crate::replay::{ReplayBuffer, ReplaySchedule};
use crate::rng::{stream, StreamRng, EXPLORATION_STREAM, REPLAY_STREAM};
use crate::schedules::{random_action, ScheduleParams};
use crate::simulator::{Agent, Experience};

use super::config::{Algorithm, Hyper};

/// Bisection tolerance for oracle indexes used as a policy.
pub const ORACLE_INDEX_TOL: f64 = 1e-7;

enum Policy {
    Maiql(Box<Maiql>),
    MaiqlAprx(Box<Lpql>),
    Lpql(Box<Lpql>),
    Wibql(Box<Wibql>),
    Ql0(Box<Ql0>),
    OracleLp(Box<LambdaQTable>),
    OracleLambda0(Box<PlainQTable>),
    OracleLpIndex(Box<IndexTable>),
    Random,
}

/// One algorithm bound to one instance, with its own exploration and replay streams.
pub struct HarnessAgent {
    algorithm: Algorithm,
    policy: Policy,
    instance: RmabInstance,
    schedule: Option<ScheduleParams>,
    replay: ReplaySchedule,
    buffer: ReplayBuffer,
    explore_rng: StreamRng,
    replay_rng: StreamRng,
    last_lambda: Option<usize>,
}

/// Grid upper end / index clamp: the configured value or the instance bound.
pub fn resolve_lambda_max(hyper: &Hyper, instance: &RmabInstance) -> Result<f64> {
    match hyper.lambda_max {
        Some(l) => Ok(l),
        None => lambda_max_bound(instance),
    }
}

impl HarnessAgent {
    pub fn new(
        algorithm: Algorithm,
        hyper: &Hyper,
        instance: &RmabInstance,
        seed: u64,
    ) -> Result<Self> {
        let schedule = hyper.schedule()?;
        let grid = || -> Result<LambdaGrid> {
            LambdaGrid::new(resolve_lambda_max(hyper, instance)?, hyper.n_lam)
        };
        let policy = match algorithm {
            Algorithm::Maiql => Policy::Maiql(Box::new(
                Maiql::new(instance, schedule, resolve_lambda_max(hyper, instance)?)
                    .with_mode(hyper.reward_mode),
            )),
            Algorithm::MaiqlAprx => {
                Policy::MaiqlAprx(Box::new(Lpql::new(instance, grid()?, schedule)))
            }
            Algorithm::Lpql => Policy::Lpql(Box::new(Lpql::new(instance, grid()?, schedule))),
            Algorithm::Wibql => Policy::Wibql(Box::new(Wibql::new(
                instance,
                hyper.wibql_action,
                schedule,
                resolve_lambda_max(hyper, instance)?,
            )?)),
            Algorithm::Ql0 => Policy::Ql0(Box::new(Ql0::new(instance, schedule))),
            Algorithm::OracleLp => Policy::OracleLp(Box::new(oracle_q_table(
                instance,
                grid()?,
                VI_TOL,
                VI_MAX_ITER,
            )?)),
            Algorithm::OracleLambda0 => Policy::OracleLambda0(Box::new(oracle_lambda0_table(
                instance,
                VI_TOL,
                VI_MAX_ITER,
            )?)),
            Algorithm::OracleLpIndex => Policy::OracleLpIndex(Box::new(IndexTable::compute(
                instance,
                ORACLE_INDEX_TOL,
                IndexMode::Lenient,
            )?)),
            Algorithm::Random => Policy::Random,
        };
        let learner = algorithm.is_learner();
        Ok(Self {
            algorithm,
            policy,
            instance: instance.clone(),
            schedule: learner.then_some(schedule),
            replay: if learner {
                hyper.replay()
            } else {
                ReplaySchedule::NEVER
            },
            buffer: ReplayBuffer::new(None),
            explore_rng: stream(seed, EXPLORATION_STREAM),
            replay_rng: stream(seed, REPLAY_STREAM),
            last_lambda: None,
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn instance(&self) -> &RmabInstance {
        &self.instance
    }

    /// ε(t) for learners, 1 for the random policy, 0 for oracles.
    pub fn epsilon(&self, t: u64) -> f64 {
        match (&self.policy, self.schedule) {
            (Policy::Random, _) => 1.0,
            (_, Some(s)) => s.epsilon(t.max(1)).unwrap_or(1.0),
            _ => 0.0,
        }
    }

    /// Grid index chosen by the last LPQL exploitation round.
    pub fn last_lambda(&self) -> Option<usize> {
        self.last_lambda
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    fn update(&mut self, batch: &[Experience], t: u64) {
        match &mut self.policy {
            Policy::Maiql(m) => m.update(batch, t),
            Policy::MaiqlAprx(l) | Policy::Lpql(l) => l.update(batch),
            Policy::Wibql(w) => w.update(batch, t),
            Policy::Ql0(q) => q.update(batch),
            _ => {}
        }
    }
}

impl Agent for HarnessAgent {
    fn act(&mut self, states: &StateVector, t: u64) -> Result<ActionVector> {
        let inst = &self.instance;
        let rng = &mut self.explore_rng;
        self.last_lambda = None;
        let a = match &self.policy {
            Policy::Maiql(m) => m.select(states, inst, t, rng),
            Policy::MaiqlAprx(l) => l.aprx_select(states, inst, t, rng),
            Policy::Lpql(l) => {
                let (a, p) = l.select(states, inst, t, rng);
                self.last_lambda = p;
                a
            }
            Policy::Wibql(w) => w.select(states, inst, t, rng),
            Policy::Ql0(q) => q.select(states, inst, t, rng),
            Policy::OracleLp(table) => oracle_lp_policy(inst, table, states).0,
            Policy::OracleLambda0(table) => oracle_lambda0_policy(inst, table, states),
            Policy::OracleLpIndex(idx) => oracle_lp_index_policy(inst, idx, states),
            Policy::Random => random_action(inst, rng),
        };
        if !inst.is_feasible(&a)? {
            return Err(RmabError::Infeasible {
                cost: inst.action_cost(&a)?,
                budget: inst.budget(),
            });
        }
        Ok(a)
    }

    /// Learns from the fresh tuples, stores them, then dreams if due.
    fn learn(&mut self, experiences: &[Experience], t: u64) {
        if self.schedule.is_none() {
            return;
        }
        self.update(experiences, t);
        if self.replay.per_dream == 0 {
            return;
        }
        for e in experiences {
            self.buffer.push(e.clone());
        }
        if self.replay.is_due(t) {
            let batch = self
                .buffer
                .sample(self.replay.per_dream, &mut self.replay_rng)
                .expect("buffer holds this step's tuples");
            self.update(&batch, t);
        }
    }
}
