//! Runner, result store and reports for the vaxsim simulator.
//!
//! The binary is a thin clap front end over these modules; integration
//! tests drive them directly.

pub mod harness;
pub mod input;
pub mod report;
pub mod store;

use std::path::Path;

use anyhow::Result;
use vaxsim_core::metrics::ReplicationResult;

use crate::harness::{run_replications, RunConfig};
use crate::input::{LoadedConfig, LoadedScenario};
use crate::store::{write_store, Manifest};

/// Run a scenario (or the base case) and persist the store in `out`.
pub fn run_to_store(
    cfg: &LoadedConfig,
    scenario: Option<&LoadedScenario>,
    rc: RunConfig,
    out: &Path,
    progress: impl Fn(usize) + Sync,
) -> Result<Vec<ReplicationResult>> {
    let base = vaxsim_core::scenario::CompiledScenario::base();
    let compiled = scenario.map_or(&base, |s| &s.compiled);
    let results = run_replications(&cfg.plan, &cfg.params, compiled, rc, progress)?;
    write_store(out, &Manifest::new(cfg, scenario, rc), &cfg.plan, &results)?;
    Ok(results)
}
