//! Compiled, index-based form of a validated [`ModelConfig`].
//!
//! [`Plan`] carries the static topology (stages, machines, pools, materials)
//! and [`Params`] the tunables that scenarios may change while a
//! replication runs. Both are derived from the config once per run.
//!
//! [`ModelConfig`]: crate::config::ModelConfig

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dist::Distribution;
use crate::engine::{SimClock, Time};

pub type StageIdx = usize;
pub type MachineIdx = usize;
pub type InventoryIdx = usize;
pub type TestIdx = usize;
pub type PoolIdx = usize;
pub type MaterialIdx = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InventoryKind {
    /// A named buffer between two processes.
    Intermediate,
    /// In-line hand-off between consecutive steps of one process.
    Transfer,
    /// Finished goods awaiting release.
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Technician,
    Supervisor,
    Reviewer,
    Investigator,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Technician => "technician",
            Role::Supervisor => "supervisor",
            Role::Reviewer => "reviewer",
            Role::Investigator => "investigator",
        }
    }
}

/// When a sample is drawn relative to processing at a stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplePoint {
    Start,
    End,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InventoryPlan {
    pub id: String,
    pub capacity: Option<usize>,
    pub kind: InventoryKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePlan {
    pub at: SamplePoint,
    pub tests: Vec<TestIdx>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StagePlan {
    pub id: String,
    pub machines: Vec<MachineIdx>,
    pub input: Option<InventoryIdx>,
    pub output: InventoryIdx,
    pub doses_per_output_batch: Option<f64>,
    pub materials: Vec<(MaterialIdx, f64)>,
    pub ipc_tests: Vec<TestIdx>,
    pub samples: Vec<SamplePlan>,
    pub document_review: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MachinePlan {
    pub id: String,
    pub stage: StageIdx,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestPlan {
    pub id: String,
    pub team: usize,
    pub prerequisites: Vec<TestIdx>,
    pub ipc: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolPlan {
    /// `None` for the QA department.
    pub team: Option<usize>,
    pub role: Role,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupplierPlan {
    pub id: String,
    pub split: f64,
    pub min_interarrival: Time,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialPlan {
    pub id: String,
    pub name: String,
    pub initial_stockpile: f64,
    pub safety_stock: f64,
    pub reorder_point: f64,
    pub lot_size: f64,
    pub replace_rejected: bool,
    pub suppliers: Vec<SupplierPlan>,
    /// `(stage, quantity per batch)` for every consuming stage.
    pub consumers: Vec<(StageIdx, f64)>,
}

impl MaterialPlan {
    /// Quantity consumed per batch at the first consuming stage; the unit
    /// of a "batch equivalent".
    pub fn batch_equivalent(&self) -> Option<f64> {
        self.consumers.first().map(|c| c.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QaPlan {
    pub reviewer: PoolIdx,
    pub supervisor: PoolIdx,
    pub investigator: PoolIdx,
    pub max_retests: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub clock: SimClock,
    pub target_doses: f64,
    /// Merged production maintenance windows `[start, end)` in days.
    pub maintenance: Vec<(Time, Time)>,
    pub inventories: Vec<InventoryPlan>,
    pub stages: Vec<StagePlan>,
    pub machines: Vec<MachinePlan>,
    pub teams: Vec<String>,
    pub tests: Vec<TestPlan>,
    pub pools: Vec<PoolPlan>,
    pub qa: QaPlan,
    pub materials: Vec<MaterialPlan>,
}

impl Plan {
    pub fn final_inventory(&self) -> InventoryIdx {
        self.stages.last().expect("at least one stage").output
    }

    pub fn technician_pool(&self, team: usize) -> PoolIdx {
        self.pool(Some(team), Role::Technician)
    }

    pub fn supervisor_pool(&self, team: usize) -> PoolIdx {
        self.pool(Some(team), Role::Supervisor)
    }

    fn pool(&self, team: Option<usize>, role: Role) -> PoolIdx {
        self.pools
            .iter()
            .position(|p| p.team == team && p.role == role)
            .expect("pool exists for every team role")
    }

    /// Stage whose input is `inv`, if any.
    pub fn consumer_of(&self, inv: InventoryIdx) -> Option<StageIdx> {
        self.stages.iter().position(|s| s.input == Some(inv))
    }

    /// Stage whose output is `inv`.
    pub fn producer_of(&self, inv: InventoryIdx) -> StageIdx {
        self.stages
            .iter()
            .position(|s| s.output == inv)
            .expect("every inventory is a stage output")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageParams {
    pub processing_time: Distribution,
    pub time_multiplier: f64,
    pub yield_fraction: Distribution,
    pub deviation_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestParams {
    pub prep_time: Distribution,
    pub test_time: Distribution,
    pub check_time: Distribution,
    pub supervisory_check_time: Option<Distribution>,
    pub failure_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QaParams {
    pub document_review_time: Distribution,
    pub release_review_time: Option<Distribution>,
    pub release_check_time: Option<Distribution>,
    pub investigation_time: Distribution,
    pub deviation_investigation_time: Distribution,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupplierParams {
    pub lead_time: Distribution,
    pub transport_time: Distribution,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaterialParams {
    pub available: bool,
    pub receipt_qc_time: Distribution,
    pub receipt_rejection_prob: f64,
    pub suppliers: Vec<SupplierParams>,
}

/// Every parameter a scenario can override at runtime.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Params {
    pub machine_closed: Vec<bool>,
    pub stages: Vec<StageParams>,
    pub pool_capacity: Vec<u32>,
    pub tests: Vec<TestParams>,
    pub qa: QaParams,
    pub materials: Vec<MaterialParams>,
}
