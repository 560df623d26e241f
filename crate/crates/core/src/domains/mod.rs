//! Instance generators for the three experimental settings.

pub mod adherence;
pub mod kmeans;
pub mod random;
pub mod two_process;

pub use adherence::{AdherenceConfig, SyntheticMode};
pub use random::{random_budget, RandomParams, RowSampling};
pub use two_process::{BinaryChain, TwoProcessParams};
