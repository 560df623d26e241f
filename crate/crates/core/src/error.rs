use thiserror::Error;

use crate::model::Violation;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum RmabError {
    #[error("vector has {got} entries but the instance has {expected} arms")]
    LengthMismatch { expected: usize, got: usize },

    #[error("arm {arm}: action {action} out of range (arm has {n_actions} actions)")]
    ActionOutOfRange {
        arm: usize,
        action: usize,
        n_actions: usize,
    },

    #[error("arm {arm}: state {state} out of range (arm has {n_states} states)")]
    StateOutOfRange {
        arm: usize,
        state: usize,
        n_states: usize,
    },

    #[error("action vector costs {cost} which exceeds the budget {budget}")]
    Infeasible { cost: f64, budget: f64 },

    #[error("arm {arm} failed validation: {}", join_violations(.violations))]
    InvalidArm {
        arm: usize,
        violations: Vec<Violation>,
    },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("schedule clock must be >= 1")]
    ZeroClock,

    #[error("replay buffer is empty")]
    EmptyBuffer,

    #[error("value iteration stopped after {iterations} iterations with residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("arm {arm}: not indexable for action {action} in state {state} on [0, {lambda_max}]")]
    NotIndexable {
        arm: usize,
        state: usize,
        action: usize,
        lambda_max: f64,
    },

    #[error("lambda bound is undefined: no arm has a strictly positive cost")]
    NoPositiveCost,

    #[error("arm {arm}: actions {action} and {prev} have equal cost")]
    EqualCosts {
        arm: usize,
        action: usize,
        prev: usize,
    },

    #[error("knapsack is not integral at resolution {resolution}")]
    NonIntegral { resolution: f64 },

    #[error("knapsack table needs {cells} cells, limit is {limit}")]
    TableTooLarge { cells: usize, limit: usize },

    #[error("trace line {line}: {reason}")]
    MalformedTrace { line: usize, reason: String },

    #[error("record has {len} rows, need at least {needed}")]
    TooShort { len: usize, needed: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("{0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, RmabError>;
