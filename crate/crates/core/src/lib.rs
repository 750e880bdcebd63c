//! Discrete-event simulator of an integrated vaccine manufacturing supply
//! chain: batch production through a chain of process stages, QA/QC with
//! finite personnel, raw-material procurement, time-windowed scenario
//! overrides, and the statistics used to compare scenario ensembles.
//!
//! The crate is `no_std` (with `alloc`). Reading configs from disk, running
//! replications in parallel and writing results live in the `vaxsim` CLI
//! crate.
//!
//! ```
//! use vaxsim_core::prelude::*;
//!
//! let cfg: ModelConfig = vaxsim_core::testing::chain_config(&[1.0, 2.0, 3.0]);
//! let (plan, params) = cfg.compile().unwrap();
//! let result = run_replication(&plan, &params, &CompiledScenario::base(), 1);
//! assert!(result.census.is_conserved());
//! ```

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod config;
pub mod dist;
pub mod engine;
pub mod materials;
pub mod metrics;
pub mod plan;
pub mod production;
pub mod qaqc;
pub mod rng;
pub mod scenario;
pub mod series;
pub mod sim;
pub mod stats;
pub mod testing;

pub mod prelude {
    pub use crate::config::{ConfigError, ModelConfig};
    pub use crate::dist::Distribution;
    pub use crate::metrics::{ReplicationResult, RecoveryOptions};
    pub use crate::plan::{Params, Plan};
    pub use crate::scenario::{CompiledScenario, ScenarioSpec};
    pub use crate::sim::{run_replication, Model};
}
