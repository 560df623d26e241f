//! Online learning for multi-action restless bandits.

pub mod baselines;
pub mod domains;
pub mod error;
pub mod harness;
pub mod knapsack;
pub mod lpql;
pub mod maiql;
pub mod model;
pub mod oracles;
pub mod replay;
pub mod rng;
pub mod schedules;
pub mod simulator;

pub use error::{Result, RmabError};
pub use model::{ActionVector, ArmModel, RmabInstance, StateVector};
