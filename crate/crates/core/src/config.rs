//! Model configuration schema and validation.
//!
//! The config is a plain serde tree; the companion CLI crate reads it from
//! TOML. [`ModelConfig::compile`] checks every rule at once and, if the
//! config is sound, turns it into an index-based [`Plan`] and its baseline
//! [`Params`].

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::dist::{DistError, Distribution};
use crate::engine::{SimClock, Time};
use crate::plan::*;

/// One validation failure, addressed by a dotted path into the config.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default = "default_start")]
    pub start_date: NaiveDate,
    #[serde(default = "default_end")]
    pub end_date: NaiveDate,
    #[serde(default = "default_target")]
    pub target_doses: f64,
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2025, 4, 1).unwrap()
}

fn default_end() -> NaiveDate {
    NaiveDate::from_ymd_opt(2028, 3, 31).unwrap()
}

fn default_target() -> f64 {
    50e6
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            start_date: default_start(),
            end_date: default_end(),
            target_doses: default_target(),
        }
    }
}

/// Production maintenance window; `end` is exclusive (00:00 of that date).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaintenanceWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InventoryConfig {
    pub id: String,
    /// Maximum number of batches; unbounded when absent.
    #[serde(default)]
    pub capacity: Option<usize>,
    #[serde(default = "default_inventory_kind")]
    pub kind: InventoryKind,
}

fn default_inventory_kind() -> InventoryKind {
    InventoryKind::Intermediate
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub at: SamplePoint,
    pub tests: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    pub id: String,
    pub machines: Vec<String>,
    /// Input inventory; the first stage has none (unbounded batch source).
    #[serde(default)]
    pub input: Option<String>,
    pub output: String,
    pub processing_time: Distribution,
    #[serde(default = "unit_yield")]
    pub yield_fraction: Distribution,
    #[serde(default)]
    pub doses_per_output_batch: Option<f64>,
    /// Material id -> quantity consumed per batch at dispatch.
    #[serde(default)]
    pub materials: BTreeMap<String, f64>,
    #[serde(default)]
    pub ipc_tests: Vec<String>,
    #[serde(default)]
    pub samples: Vec<SampleConfig>,
    #[serde(default)]
    pub deviation_prob: f64,
    #[serde(default)]
    pub document_review: bool,
}

fn unit_yield() -> Distribution {
    Distribution::constant(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeamConfig {
    pub id: String,
    pub technicians: u32,
    pub supervisors: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QaConfig {
    pub reviewers: u32,
    pub supervisors: u32,
    pub investigators: u32,
    /// Per-stage batch-record review (stages with `document_review`).
    #[serde(default = "zero_time")]
    pub document_review_time: Distribution,
    /// Final release review by a reviewer; skipped when absent.
    #[serde(default)]
    pub release_review_time: Option<Distribution>,
    /// QA supervisor sign-off after the release review; skipped when absent.
    #[serde(default)]
    pub release_check_time: Option<Distribution>,
    pub investigation_time: Distribution,
    #[serde(default)]
    pub deviation_investigation_time: Option<Distribution>,
    #[serde(default = "default_retests")]
    pub max_retests: u32,
}

fn zero_time() -> Distribution {
    Distribution::constant(0.0)
}

fn default_retests() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestConfig {
    pub id: String,
    pub team: String,
    #[serde(default = "zero_time")]
    pub prep_time: Distribution,
    pub test_time: Distribution,
    #[serde(default = "zero_time")]
    pub check_time: Distribution,
    #[serde(default)]
    pub supervisory_check_time: Option<Distribution>,
    #[serde(default)]
    pub failure_prob: f64,
    #[serde(default)]
    pub prerequisites: Vec<String>,
    #[serde(default)]
    pub ipc: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupplierConfig {
    pub id: String,
    #[serde(default = "one")]
    pub split: f64,
    pub lead_time: Distribution,
    #[serde(default = "zero_time")]
    pub transport_time: Distribution,
    #[serde(default)]
    pub min_interarrival: f64,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub id: String,
    #[serde(default)]
    pub name: Option<String>,
    pub initial_stockpile: f64,
    #[serde(default)]
    pub safety_stock: f64,
    pub reorder_point: f64,
    pub lot_size: f64,
    #[serde(default = "zero_time")]
    pub receipt_qc_time: Distribution,
    #[serde(default)]
    pub receipt_rejection_prob: f64,
    #[serde(default = "yes")]
    pub replace_rejected: bool,
    pub suppliers: Vec<SupplierConfig>,
}

/// Root of the model config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub maintenance: Vec<MaintenanceWindow>,
    pub inventories: Vec<InventoryConfig>,
    pub stages: Vec<StageConfig>,
    #[serde(default)]
    pub teams: Vec<TeamConfig>,
    pub qa: QaConfig,
    #[serde(default)]
    pub tests: Vec<TestConfig>,
    #[serde(default)]
    pub materials: Vec<MaterialConfig>,
}

pub(crate) struct Checker {
    pub(crate) errors: Vec<ConfigError>,
}

impl Checker {
    pub(crate) fn err(&mut self, path: impl Into<String>, msg: impl Into<String>) {
        self.errors.push(ConfigError::new(path, msg));
    }

    pub(crate) fn dist(&mut self, path: &str, d: &Distribution) {
        if let Err(e) = d.validate() {
            let msg = match e {
                DistError::TriangularOrder => "min ≤ mode ≤ max violated".to_string(),
                other => other.to_string(),
            };
            self.err(path, msg);
        }
    }

    pub(crate) fn duration(&mut self, path: &str, d: &Distribution) {
        self.dist(path, d);
        if d.validate().is_ok() && d.support().0 < 0.0 {
            self.err(path, "durations must be non-negative");
        }
        if let Distribution::Bernoulli { .. } = d {
            self.err(path, "bernoulli is not a duration");
        }
    }

    pub(crate) fn yield_fraction(&mut self, path: &str, d: &Distribution) {
        self.dist(path, d);
        if d.validate().is_ok() {
            let (lo, hi) = d.support();
            let bounded = !matches!(d, Distribution::Lognormal { .. } | Distribution::Bernoulli { .. });
            if !bounded || lo <= 0.0 || hi > 1.0 {
                self.err(path, "yield samples must lie in (0, 1]");
            }
        }
    }

    pub(crate) fn prob(&mut self, path: &str, p: f64) {
        if !(0.0..=1.0).contains(&p) {
            self.err(path, "probability must lie in [0, 1]");
        }
    }

    pub(crate) fn nonneg(&mut self, path: &str, v: f64) {
        if !(v.is_finite() && v >= 0.0) {
            self.err(path, "must be a finite non-negative number");
        }
    }

    pub(crate) fn unique<'a>(&mut self, section: &str, ids: impl Iterator<Item = &'a String>) {
        let mut seen = BTreeSet::new();
        for id in ids {
            if !seen.insert(id.as_str()) {
                self.err(format!("{section}.{id}"), "duplicate id");
            }
        }
    }
}

fn index<'a>(ids: impl Iterator<Item = &'a String>) -> BTreeMap<&'a str, usize> {
    ids.enumerate().map(|(i, id)| (id.as_str(), i)).collect()
}

impl ModelConfig {
    /// Check every rule; returns all failures at once.
    pub fn validate(&self) -> Result<(), Vec<ConfigError>> {
        self.compile().map(|_| ())
    }

    /// Validate and build the indexed plan plus baseline parameters.
    pub fn compile(&self) -> Result<(Plan, Params), Vec<ConfigError>> {
        let mut c = Checker { errors: Vec::new() };
        let sim = &self.simulation;
        if sim.end_date <= sim.start_date {
            c.err("simulation.end_date", "end_date must be after start_date");
        }
        if sim.target_doses.is_nan() || sim.target_doses <= 0.0 {
            c.err("simulation.target_doses", "must be positive");
        }
        let clock = if sim.end_date > sim.start_date {
            SimClock::new(sim.start_date, sim.end_date)
        } else {
            SimClock::default()
        };
        let horizon = clock.horizon();

        // maintenance calendar
        let mut windows: Vec<(Time, Time)> = Vec::new();
        for (i, w) in self.maintenance.iter().enumerate() {
            let path = format!("maintenance[{i}]");
            let (s, e) = (clock.day_of(w.start), clock.day_of(w.end));
            if w.end <= w.start {
                c.err(&path, "window end must be after its start");
            } else if s < 0 {
                c.err(&path, "window starts before the simulation start date");
            } else if e as Time > horizon {
                c.err(&path, "window ends after the simulation end date");
            } else {
                windows.push((s as Time, e as Time));
            }
        }
        windows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut maintenance: Vec<(Time, Time)> = Vec::new();
        for w in windows {
            match maintenance.last_mut() {
                Some(last) if w.0 <= last.1 => last.1 = last.1.max(w.1),
                _ => maintenance.push(w),
            }
        }

        // identifiers
        c.unique("inventories", self.inventories.iter().map(|i| &i.id));
        c.unique("stages", self.stages.iter().map(|s| &s.id));
        c.unique("machines", self.stages.iter().flat_map(|s| s.machines.iter()));
        c.unique("teams", self.teams.iter().map(|t| &t.id));
        c.unique("tests", self.tests.iter().map(|t| &t.id));
        c.unique("materials", self.materials.iter().map(|m| &m.id));
        if self.teams.iter().any(|t| t.id == "qa") {
            c.err("teams.qa", "'qa' is reserved for the QA department");
        }
        let inv_ix = index(self.inventories.iter().map(|i| &i.id));
        let team_ix = index(self.teams.iter().map(|t| &t.id));
        let test_ix = index(self.tests.iter().map(|t| &t.id));
        let mat_ix = index(self.materials.iter().map(|m| &m.id));

        // inventories
        for inv in &self.inventories {
            if inv.capacity == Some(0) {
                c.err(format!("inventories.{}.capacity", inv.id), "capacity must be at least 1");
            }
        }
        let finals: Vec<&InventoryConfig> = self
            .inventories
            .iter()
            .filter(|i| i.kind == InventoryKind::Final)
            .collect();
        if finals.len() != 1 {
            c.err("inventories", "exactly one inventory must have kind = \"final\"");
        }

        // stages: a linear chain ending in the final inventory
        if self.stages.is_empty() {
            c.err("stages", "at least one stage is required");
        }
        let mut outputs = BTreeSet::new();
        for (k, st) in self.stages.iter().enumerate() {
            let p = format!("stages.{}", st.id);
            if st.machines.is_empty() {
                c.err(format!("{p}.machines"), "at least one machine is required");
            }
            match inv_ix.get(st.output.as_str()) {
                None => c.err(format!("{p}.output"), format!("unknown inventory '{}'", st.output)),
                Some(&ix) => {
                    if !outputs.insert(ix) {
                        c.err(format!("{p}.output"), "inventory already fed by another stage");
                    }
                    let is_final = self.inventories[ix].kind == InventoryKind::Final;
                    let is_last = k + 1 == self.stages.len();
                    if is_final != is_last {
                        c.err(
                            format!("{p}.output"),
                            "only the last stage may (and must) feed the final inventory",
                        );
                    }
                }
            }
            if k == 0 {
                if st.input.is_some() {
                    c.err(format!("{p}.input"), "the first stage draws from the unbounded source");
                }
            } else {
                let prev = &self.stages[k - 1].output;
                match &st.input {
                    Some(i) if i == prev => {}
                    Some(i) if !inv_ix.contains_key(i.as_str()) => {
                        c.err(format!("{p}.input"), format!("unknown inventory '{i}'"))
                    }
                    _ => c.err(
                        format!("{p}.input"),
                        format!("stages must form a chain: expected input '{prev}'"),
                    ),
                }
            }
            c.duration(&format!("{p}.processing_time"), &st.processing_time);
            c.yield_fraction(&format!("{p}.yield_fraction"), &st.yield_fraction);
            let is_last = k + 1 == self.stages.len();
            match (st.doses_per_output_batch, is_last) {
                (Some(d), true) if !(d > 0.0 && d.is_finite()) => {
                    c.err(format!("{p}.doses_per_output_batch"), "must be positive")
                }
                (None, true) => c.err(
                    format!("{p}.doses_per_output_batch"),
                    "the final stage must set doses_per_output_batch",
                ),
                (Some(_), false) => c.err(
                    format!("{p}.doses_per_output_batch"),
                    "only the final stage produces doses",
                ),
                _ => {}
            }
            for (m, q) in &st.materials {
                if !mat_ix.contains_key(m.as_str()) {
                    c.err(format!("{p}.materials.{m}"), "unknown material");
                }
                if !(q.is_finite() && *q > 0.0) {
                    c.err(format!("{p}.materials.{m}"), "quantity per batch must be positive");
                }
            }
            for t in &st.ipc_tests {
                match test_ix.get(t.as_str()) {
                    None => c.err(format!("{p}.ipc_tests"), format!("unknown test '{t}'")),
                    Some(&ti) if !self.tests[ti].ipc => {
                        c.err(format!("{p}.ipc_tests"), format!("test '{t}' is not an IPC test"))
                    }
                    _ => {}
                }
            }
            for (si, s) in st.samples.iter().enumerate() {
                let sp = format!("{p}.samples[{si}]");
                if s.tests.is_empty() {
                    c.err(&sp, "a sample needs at least one test");
                }
                for t in &s.tests {
                    match test_ix.get(t.as_str()) {
                        None => c.err(format!("{sp}.tests"), format!("unknown test '{t}'")),
                        Some(&ti) => {
                            let def = &self.tests[ti];
                            if def.ipc {
                                c.err(
                                    format!("{sp}.tests"),
                                    format!("IPC test '{t}' belongs in ipc_tests"),
                                );
                            }
                            for pre in &def.prerequisites {
                                if !s.tests.contains(pre) {
                                    c.err(
                                        format!("{sp}.tests"),
                                        format!("prerequisite '{pre}' of '{t}' is not in this sample"),
                                    );
                                }
                            }
                        }
                    }
                }
            }
            c.prob(&format!("{p}.deviation_prob"), st.deviation_prob);
        }

        // QA/QC
        let qa = &self.qa;
        c.duration("qa.document_review_time", &qa.document_review_time);
        if let Some(d) = &qa.release_review_time {
            c.duration("qa.release_review_time", d);
        }
        if let Some(d) = &qa.release_check_time {
            c.duration("qa.release_check_time", d);
        }
        c.duration("qa.investigation_time", &qa.investigation_time);
        if let Some(d) = &qa.deviation_investigation_time {
            c.duration("qa.deviation_investigation_time", d);
        }
        for t in &self.tests {
            let p = format!("tests.{}", t.id);
            if !team_ix.contains_key(t.team.as_str()) {
                c.err(format!("{p}.team"), format!("unknown team '{}'", t.team));
            }
            c.duration(&format!("{p}.prep_time"), &t.prep_time);
            c.duration(&format!("{p}.test_time"), &t.test_time);
            c.duration(&format!("{p}.check_time"), &t.check_time);
            if let Some(d) = &t.supervisory_check_time {
                c.duration(&format!("{p}.supervisory_check_time"), d);
            }
            c.prob(&format!("{p}.failure_prob"), t.failure_prob);
            for pre in &t.prerequisites {
                if !test_ix.contains_key(pre.as_str()) {
                    c.err(format!("{p}.prerequisites"), format!("unknown test '{pre}'"));
                }
            }
        }
        if let Some(cycle) = prerequisite_cycle(&self.tests, &test_ix) {
            c.err(format!("tests.{cycle}.prerequisites"), "prerequisite graph has a cycle");
        }

        // materials
        for m in &self.materials {
            let p = format!("materials.{}", m.id);
            c.nonneg(&format!("{p}.initial_stockpile"), m.initial_stockpile);
            c.nonneg(&format!("{p}.safety_stock"), m.safety_stock);
            c.nonneg(&format!("{p}.reorder_point"), m.reorder_point);
            if !(m.lot_size.is_finite() && m.lot_size > 0.0) {
                c.err(format!("{p}.lot_size"), "lot size must be positive");
            }
            c.duration(&format!("{p}.receipt_qc_time"), &m.receipt_qc_time);
            c.prob(&format!("{p}.receipt_rejection_prob"), m.receipt_rejection_prob);
            if m.suppliers.is_empty() {
                c.err(format!("{p}.suppliers"), "at least one supplier is required");
            }
            c.unique(&format!("{p}.suppliers"), m.suppliers.iter().map(|s| &s.id));
            let total: f64 = m.suppliers.iter().map(|s| s.split).sum();
            if !m.suppliers.is_empty() && (total - 1.0).abs() > 1e-9 {
                c.err(format!("{p}.suppliers"), "splits sum ≠ 1");
            }
            for s in &m.suppliers {
                let sp = format!("{p}.suppliers.{}", s.id);
                if !(0.0..=1.0).contains(&s.split) {
                    c.err(format!("{sp}.split"), "split must lie in [0, 1]");
                }
                c.duration(&format!("{sp}.lead_time"), &s.lead_time);
                c.duration(&format!("{sp}.transport_time"), &s.transport_time);
                c.nonneg(&format!("{sp}.min_interarrival"), s.min_interarrival);
            }
        }

        if !c.errors.is_empty() {
            return Err(c.errors);
        }
        Ok(self.build(clock, maintenance, &inv_ix, &team_ix, &test_ix, &mat_ix))
    }

    fn build(
        &self,
        clock: SimClock,
        maintenance: Vec<(Time, Time)>,
        inv_ix: &BTreeMap<&str, usize>,
        team_ix: &BTreeMap<&str, usize>,
        test_ix: &BTreeMap<&str, usize>,
        mat_ix: &BTreeMap<&str, usize>,
    ) -> (Plan, Params) {
        let inventories = self
            .inventories
            .iter()
            .map(|i| InventoryPlan {
                id: i.id.clone(),
                capacity: i.capacity,
                kind: i.kind,
            })
            .collect();

        let mut machines = Vec::new();
        let mut stages = Vec::new();
        let mut stage_params = Vec::new();
        let mut consumers: Vec<Vec<(StageIdx, f64)>> = vec_of(self.materials.len());
        for (k, st) in self.stages.iter().enumerate() {
            let ids = st
                .machines
                .iter()
                .map(|m| {
                    machines.push(MachinePlan {
                        id: m.clone(),
                        stage: k,
                    });
                    machines.len() - 1
                })
                .collect();
            let materials: Vec<(MaterialIdx, f64)> =
                st.materials.iter().map(|(m, q)| (mat_ix[m.as_str()], *q)).collect();
            for &(m, q) in &materials {
                consumers[m].push((k, q));
            }
            stages.push(StagePlan {
                id: st.id.clone(),
                machines: ids,
                input: st.input.as_ref().map(|i| inv_ix[i.as_str()]),
                output: inv_ix[st.output.as_str()],
                doses_per_output_batch: st.doses_per_output_batch,
                materials,
                ipc_tests: st.ipc_tests.iter().map(|t| test_ix[t.as_str()]).collect(),
                samples: st
                    .samples
                    .iter()
                    .map(|s| SamplePlan {
                        at: s.at,
                        tests: s.tests.iter().map(|t| test_ix[t.as_str()]).collect(),
                    })
                    .collect(),
                document_review: st.document_review,
            });
            stage_params.push(StageParams {
                processing_time: st.processing_time,
                time_multiplier: 1.0,
                yield_fraction: st.yield_fraction,
                deviation_prob: st.deviation_prob,
            });
        }

        let mut pools = Vec::new();
        let mut capacity = Vec::new();
        for (ti, t) in self.teams.iter().enumerate() {
            for (role, n) in [(Role::Technician, t.technicians), (Role::Supervisor, t.supervisors)] {
                pools.push(PoolPlan {
                    team: Some(ti),
                    role,
                    name: format!("{}.{}", t.id, role.as_str()),
                });
                capacity.push(n);
            }
        }
        let mut qa_pool = |role: Role, n: u32| {
            pools.push(PoolPlan {
                team: None,
                role,
                name: format!("qa.{}", role.as_str()),
            });
            capacity.push(n);
            pools.len() - 1
        };
        let qa = QaPlan {
            reviewer: qa_pool(Role::Reviewer, self.qa.reviewers),
            supervisor: qa_pool(Role::Supervisor, self.qa.supervisors),
            investigator: qa_pool(Role::Investigator, self.qa.investigators),
            max_retests: self.qa.max_retests,
        };

        let tests = self
            .tests
            .iter()
            .map(|t| TestPlan {
                id: t.id.clone(),
                team: team_ix[t.team.as_str()],
                prerequisites: t.prerequisites.iter().map(|p| test_ix[p.as_str()]).collect(),
                ipc: t.ipc,
            })
            .collect();
        let test_params = self
            .tests
            .iter()
            .map(|t| TestParams {
                prep_time: t.prep_time,
                test_time: t.test_time,
                check_time: t.check_time,
                supervisory_check_time: t.supervisory_check_time,
                failure_prob: t.failure_prob,
            })
            .collect();

        let materials = self
            .materials
            .iter()
            .zip(consumers)
            .map(|(m, consumers)| MaterialPlan {
                id: m.id.clone(),
                name: m.name.clone().unwrap_or_else(|| m.id.clone()),
                initial_stockpile: m.initial_stockpile,
                safety_stock: m.safety_stock,
                reorder_point: m.reorder_point,
                lot_size: m.lot_size,
                replace_rejected: m.replace_rejected,
                suppliers: m
                    .suppliers
                    .iter()
                    .map(|s| SupplierPlan {
                        id: s.id.clone(),
                        split: s.split,
                        min_interarrival: s.min_interarrival,
                    })
                    .collect(),
                consumers,
            })
            .collect();
        let material_params = self
            .materials
            .iter()
            .map(|m| MaterialParams {
                available: true,
                receipt_qc_time: m.receipt_qc_time,
                receipt_rejection_prob: m.receipt_rejection_prob,
                suppliers: m
                    .suppliers
                    .iter()
                    .map(|s| SupplierParams {
                        lead_time: s.lead_time,
                        transport_time: s.transport_time,
                    })
                    .collect(),
            })
            .collect();

        let params = Params {
            machine_closed: alloc::vec![false; machines.len()],
            stages: stage_params,
            pool_capacity: capacity,
            tests: test_params,
            qa: QaParams {
                document_review_time: self.qa.document_review_time,
                release_review_time: self.qa.release_review_time,
                release_check_time: self.qa.release_check_time,
                investigation_time: self.qa.investigation_time,
                deviation_investigation_time: self
                    .qa
                    .deviation_investigation_time
                    .unwrap_or(self.qa.investigation_time),
            },
            materials: material_params,
        };
        let plan = Plan {
            clock,
            target_doses: self.simulation.target_doses,
            maintenance,
            inventories,
            stages,
            machines,
            teams: self.teams.iter().map(|t| t.id.clone()).collect(),
            tests,
            pools,
            qa,
            materials,
        };
        (plan, params)
    }
}

fn vec_of<T: Default>(n: usize) -> Vec<T> {
    (0..n).map(|_| T::default()).collect()
}

/// Returns the id of a test on a prerequisite cycle, if any.
fn prerequisite_cycle(tests: &[TestConfig], ix: &BTreeMap<&str, usize>) -> Option<String> {
    // 0 = unvisited, 1 = on stack, 2 = done
    fn visit(
        t: usize,
        tests: &[TestConfig],
        ix: &BTreeMap<&str, usize>,
        state: &mut [u8],
    ) -> Option<usize> {
        match state[t] {
            1 => return Some(t),
            2 => return None,
            _ => {}
        }
        state[t] = 1;
        for p in &tests[t].prerequisites {
            if let Some(&pi) = ix.get(p.as_str()) {
                if let Some(c) = visit(pi, tests, ix, state) {
                    return Some(c);
                }
            }
        }
        state[t] = 2;
        None
    }
    let mut state = alloc::vec![0u8; tests.len()];
    (0..tests.len())
        .find_map(|t| visit(t, tests, ix, &mut state))
        .map(|t| tests[t].id.clone())
}
