//! One replication: the shared model state and its event loop.
//!
//! The domain modules (`production`, `qaqc`, `materials`, `scenario`) each
//! own a slice of [`Model`] and add their event handlers through separate
//! `impl Model` blocks. Everything is mutated from [`Model::step`], so a
//! replication is single-threaded and fully determined by its seed, plan,
//! parameters and scenario.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use crate::engine::{EventQueue, Next, Time};
use crate::materials::{PoId, Warehouse};
use crate::metrics::{Census, ReplicationResult};
use crate::plan::*;
use crate::production::Floor;
use crate::qaqc::{Lab, TaskId};
use crate::rng::{fnv1a, RngStream};
use crate::scenario::{CompiledScenario, ScenarioState};
use crate::series::DailyIntegral;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    ProcessingDone { machine: MachineIdx },
    MaintenanceStart,
    MaintenanceEnd,
    TaskPhaseDone { task: TaskId },
    OrderPlaced { po: PoId },
    LeadTimeDone { po: PoId },
    OrderArrived { po: PoId },
    ReceiptQcDone { po: PoId },
    ScenarioApply { modification: usize },
    ScenarioRevert { modification: usize },
    WipReset,
}

impl EventKind {
    fn code(&self) -> u64 {
        let (tag, ix) = match *self {
            EventKind::ProcessingDone { machine } => (0, machine),
            EventKind::MaintenanceStart => (1, 0),
            EventKind::MaintenanceEnd => (2, 0),
            EventKind::TaskPhaseDone { task } => (3, task),
            EventKind::OrderPlaced { po } => (4, po),
            EventKind::LeadTimeDone { po } => (5, po),
            EventKind::OrderArrived { po } => (6, po),
            EventKind::ReceiptQcDone { po } => (7, po),
            EventKind::ScenarioApply { modification } => (8, modification),
            EventKind::ScenarioRevert { modification } => (9, modification),
            EventKind::WipReset => (10, 0),
        };
        (tag << 56) | ix as u64
    }
}

/// One named substream per stochastic entity.
pub(crate) struct Streams {
    pub machine: Vec<RngStream>,
    pub stage_deviation: Vec<RngStream>,
    pub test: Vec<RngStream>,
    pub supplier: Vec<Vec<RngStream>>,
    pub receipt: Vec<RngStream>,
    pub document_review: RngStream,
    pub release: RngStream,
    pub investigation: RngStream,
}

impl Streams {
    fn new(plan: &Plan, seed: u64) -> Self {
        let s = |label: &str| RngStream::new(seed, label);
        Streams {
            machine: plan.machines.iter().map(|m| s(&format!("machine:{}", m.id))).collect(),
            stage_deviation: plan
                .stages
                .iter()
                .map(|st| s(&format!("stage:{}:deviation", st.id)))
                .collect(),
            test: plan.tests.iter().map(|t| s(&format!("test:{}", t.id))).collect(),
            supplier: plan
                .materials
                .iter()
                .map(|m| {
                    m.suppliers
                        .iter()
                        .map(|sp| s(&format!("material:{}:supplier:{}", m.id, sp.id)))
                        .collect()
                })
                .collect(),
            receipt: plan
                .materials
                .iter()
                .map(|m| s(&format!("material:{}:receipt", m.id)))
                .collect(),
            document_review: s("qa:document-review"),
            release: s("qa:release"),
            investigation: s("qa:investigation"),
        }
    }
}

/// Time-weighted signals sampled into daily bins.
pub(crate) struct Recorder {
    pub released_doses: Vec<f64>,
    pub machine_busy: Vec<DailyIntegral>,
    pub machine_closed: Vec<DailyIntegral>,
    pub pool_busy: Vec<DailyIntegral>,
    pub pool_capacity: Vec<DailyIntegral>,
    pub pool_queue: Vec<DailyIntegral>,
    pub material_level: Vec<DailyIntegral>,
    pub inventory_level: Vec<DailyIntegral>,
}

impl Recorder {
    fn new(plan: &Plan, params: &Params) -> Self {
        let days = plan.clock.horizon_days();
        let n = |k: usize, v: f64| (0..k).map(|_| DailyIntegral::new(days, v)).collect::<Vec<_>>();
        Recorder {
            released_doses: alloc::vec![0.0; days],
            machine_busy: n(plan.machines.len(), 0.0),
            machine_closed: n(plan.machines.len(), 0.0),
            pool_busy: n(plan.pools.len(), 0.0),
            pool_capacity: params
                .pool_capacity
                .iter()
                .map(|&c| DailyIntegral::new(days, f64::from(c)))
                .collect(),
            pool_queue: n(plan.pools.len(), 0.0),
            material_level: plan
                .materials
                .iter()
                .map(|m| DailyIntegral::new(days, m.initial_stockpile))
                .collect(),
            inventory_level: n(plan.inventories.len(), 0.0),
        }
    }
}

pub struct Model {
    pub(crate) plan: Plan,
    pub(crate) baseline: Params,
    pub(crate) params: Params,
    pub(crate) queue: EventQueue<EventKind>,
    pub(crate) streams: Streams,
    pub(crate) floor: Floor,
    pub(crate) lab: Lab,
    pub(crate) warehouse: Warehouse,
    pub(crate) scenario: ScenarioState,
    pub(crate) rec: Recorder,
    /// Stages whose dispatch prerequisites may have changed.
    pub(crate) dirty: BTreeSet<StageIdx>,
    scenario_name: alloc::string::String,
    seed: u64,
    events: u64,
    digest: u64,
}

impl Model {
    pub fn new(plan: &Plan, params: &Params, scenario: &CompiledScenario, seed: u64) -> Self {
        let queue = EventQueue::new(plan.clock);
        let mut model = Model {
            streams: Streams::new(plan, seed),
            floor: Floor::new(plan),
            lab: Lab::new(plan),
            warehouse: Warehouse::new(plan),
            scenario: ScenarioState::new(scenario.clone()),
            rec: Recorder::new(plan, params),
            plan: plan.clone(),
            baseline: params.clone(),
            params: params.clone(),
            queue,
            dirty: BTreeSet::new(),
            scenario_name: scenario.name.clone(),
            seed,
            events: 0,
            digest: fnv1a(b"vaxsim"),
        };
        model.init();
        model
    }

    fn init(&mut self) {
        for i in 0..self.plan.maintenance.len() {
            let (s, e) = self.plan.maintenance[i];
            self.queue.schedule(s, EventKind::MaintenanceStart);
            self.queue.schedule(e, EventKind::MaintenanceEnd);
        }
        self.schedule_scenario();
        for m in 0..self.plan.materials.len() {
            self.review_and_reorder(m);
        }
        self.dirty.extend(0..self.plan.stages.len());
        self.settle();
    }

    #[inline]
    pub fn now(&self) -> Time {
        self.queue.now()
    }

    pub fn plan(&self) -> &Plan {
        &self.plan
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn baseline(&self) -> &Params {
        &self.baseline
    }

    pub fn events_processed(&self) -> u64 {
        self.events
    }

    /// Process the next event. Returns `false` at the end of the horizon.
    pub fn step(&mut self) -> bool {
        let ev = match self.queue.pop_next() {
            Next::Event(ev) => ev,
            Next::EndOfHorizon => return false,
        };
        self.events += 1;
        self.digest = mix(mix(self.digest, ev.time.to_bits()), ev.kind.code());
        match ev.kind {
            EventKind::ProcessingDone { machine } => self.complete_processing(machine),
            EventKind::MaintenanceStart => self.set_maintenance(true),
            EventKind::MaintenanceEnd => self.set_maintenance(false),
            EventKind::TaskPhaseDone { task } => self.task_phase_done(task),
            EventKind::OrderPlaced { po } => self.start_lead_time(po),
            EventKind::LeadTimeDone { po } => self.lead_time_done(po),
            EventKind::OrderArrived { po } => self.order_arrived(po),
            EventKind::ReceiptQcDone { po } => self.receipt_qc_done(po),
            EventKind::ScenarioApply { modification } => self.apply_modification(modification),
            EventKind::ScenarioRevert { modification } => self.revert_modification(modification),
            EventKind::WipReset => self.reset_wip(),
        }
        self.settle();
        true
    }

    /// Run events up to and including time `t`.
    pub fn run_until(&mut self, t: Time) {
        loop {
            let before = self.events;
            // peek by stepping only while the next event is due
            if !self.next_due(t) || !self.step() {
                break;
            }
            debug_assert!(self.events > before);
        }
    }

    fn next_due(&mut self, t: Time) -> bool {
        self.queue.peek_time().is_some_and(|next| next <= t)
    }

    /// Run to the end of the horizon and collect the results.
    pub fn run(mut self) -> ReplicationResult {
        while self.step() {}
        self.finish()
    }

    /// Retry dispatch at every stage flagged dirty, downstream first.
    pub(crate) fn settle(&mut self) {
        while let Some(stage) = self.dirty.pop_last() {
            while self.try_dispatch(stage).is_ok() {}
        }
    }

    pub fn census(&self) -> Census {
        self.floor.census()
    }

    fn finish(mut self) -> ReplicationResult {
        self.queue.finish();
        let end = self.now();
        self.close_stockouts(end);
        crate::metrics::collect(
            self.scenario_name.clone(),
            self.seed,
            end,
            &self.plan,
            &self.floor,
            &self.lab,
            &self.warehouse,
            self.rec,
            self.events,
            self.digest,
        )
    }
}

fn mix(h: u64, v: u64) -> u64 {
    let mut h = h;
    for b in v.to_le_bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Run one replication end to end.
pub fn run_replication(
    plan: &Plan,
    params: &Params,
    scenario: &CompiledScenario,
    seed: u64,
) -> ReplicationResult {
    Model::new(plan, params, scenario, seed).run()
}
