//! Cold-start preference elicitation with decision trees over a matrix
//! factorization recommender, plus the offline simulation used to compare
//! elicitation strategies.

#![no_std]
extern crate alloc;

pub mod baseline;
pub mod data;
pub mod error;
pub mod mf;
pub mod partition;
pub mod rng;
pub mod sim;
pub mod synthetic;
pub mod tree;

/// Version of this crate.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use data::{ItemId, ItemType, RatingMatrix, Scale, UserId};
pub use error::{Error, Result};
pub use mf::{MfHyperparams, MfModel};
pub use partition::{PartitionState, SplitConfig};
pub use sim::{SimConfig, Simulation, SimulationOutcome, Strategy, StrategyParams};
pub use tree::{build_tree, ElicitationTree, PairStrategy, Query, TreeConfig, TreeMode};
