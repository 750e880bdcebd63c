//! Parallel replication runner.
//!
//! Replication `i` runs with seed `base_seed + i` (wrapping), so replication
//! `i` of a scenario and of the base case share their random streams.

use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use vaxsim_core::metrics::ReplicationResult;
use vaxsim_core::plan::{Params, Plan};
use vaxsim_core::scenario::CompiledScenario;
use vaxsim_core::sim::run_replication;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunConfig {
    pub replications: usize,
    pub seed: u64,
    /// Worker threads; 0 lets the pool pick one per core.
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            replications: 100,
            seed: 1,
            jobs: 0,
        }
    }
}

impl RunConfig {
    pub fn seed_of(&self, replication: usize) -> u64 {
        self.seed.wrapping_add(replication as u64)
    }
}

/// A replication that panicked; rerun its seed alone to reproduce.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fault {
    pub replication: usize,
    pub seed: u64,
    pub message: String,
}

impl std::fmt::Display for Fault {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "replication {} (seed {}) failed: {}; replay with --seed {} --replications 1",
            self.replication, self.seed, self.message, self.seed
        )
    }
}

impl std::error::Error for Fault {}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| String::from("panic"))
}

/// Run all replications; results come back in replication order whatever
/// the thread count. `progress` sees the number finished so far.
pub fn run_replications(
    plan: &Plan,
    params: &Params,
    scenario: &CompiledScenario,
    rc: RunConfig,
    progress: impl Fn(usize) + Sync,
) -> Result<Vec<ReplicationResult>, Fault> {
    assert!(rc.replications >= 1, "at least one replication");
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(rc.jobs)
        .build()
        .expect("thread pool");
    let done = AtomicUsize::new(0);
    let outcomes: Vec<Result<ReplicationResult, Fault>> = pool.install(|| {
        (0..rc.replications)
            .into_par_iter()
            .map(|i| {
                let seed = rc.seed_of(i);
                let r = panic::catch_unwind(AssertUnwindSafe(|| run_replication(plan, params, scenario, seed)));
                progress(done.fetch_add(1, Ordering::Relaxed) + 1);
                r.map_err(|p| Fault {
                    replication: i,
                    seed,
                    message: panic_message(p.as_ref()),
                })
            })
            .collect()
    });
    outcomes.into_iter().collect()
}
