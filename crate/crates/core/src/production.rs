//! Main flow of goods: push-based batch flow through a linear chain of
//! stages, each with parallel machines and a bounded output inventory.
//!
//! A stage starts a batch as soon as it has an idle open machine, an input
//! batch (the first stage draws from an unbounded source), room in its
//! output inventory, and every raw material on hand. Dispatch is retried
//! only when one of those may have changed. A machine whose output
//! inventory is full on completion keeps the batch until space frees up.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use serde::Serialize;

use crate::engine::{EventId, Time};
use crate::plan::*;
use crate::qaqc::{SampleId, TaskId};
use crate::sim::{EventKind, Model};

pub type BatchId = usize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MachineState {
    Idle,
    Busy {
        batch: BatchId,
        finish_at: Time,
        event: EventId,
    },
    /// Closed mid-batch; resumes with the remaining time on reopening.
    Suspended { batch: BatchId, remaining: Time },
    /// Finished but the output inventory is full.
    Holding { batch: BatchId },
}

#[derive(Debug, Clone)]
pub struct Machine {
    pub state: MachineState,
    pub closed: bool,
}

impl Machine {
    pub fn batch(&self) -> Option<BatchId> {
        match self.state {
            MachineState::Idle => None,
            MachineState::Busy { batch, .. }
            | MachineState::Suspended { batch, .. }
            | MachineState::Holding { batch } => Some(batch),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardCause {
    FailedRetest,
    PowerOutage,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReleaseState {
    InProcess,
    AwaitingRelease,
    Released(Time),
    Discarded(Time, DiscardCause),
}

impl ReleaseState {
    pub fn is_terminal(&self) -> bool {
        matches!(self, ReleaseState::Released(_) | ReleaseState::Discarded(..))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Machine(MachineIdx),
    Inventory(InventoryIdx),
    Shipped,
    Lost,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageVisit {
    pub stage: StageIdx,
    pub enter: Time,
    pub exit: Option<Time>,
}

#[derive(Debug, Clone)]
pub struct Batch {
    pub id: BatchId,
    pub created_at: Time,
    pub stage_history: Vec<StageVisit>,
    /// Product of the yields realized so far.
    pub quantity: f64,
    pub doses: f64,
    pub release: ReleaseState,
    pub location: Location,
    pub retests: u32,
    pub investigations: u32,
    pub(crate) samples: Vec<SampleId>,
    pub(crate) tasks: Vec<TaskId>,
    /// Open QA/QC work items (tests, reviews, investigations) gating release.
    pub(crate) outstanding: u32,
    pub(crate) release_started: bool,
    pub(crate) ipc_deviations: u32,
}

/// Why a dispatch attempt did not start a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Blocked {
    NoMachine,
    NoInput,
    DownstreamFull,
    MaterialStockout(MaterialIdx),
}

/// Batch conservation snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Census {
    pub created: usize,
    pub released: usize,
    pub discarded: usize,
    pub in_machines: usize,
    pub in_inventories: usize,
}

impl Census {
    pub fn is_conserved(&self) -> bool {
        self.created == self.released + self.discarded + self.in_machines + self.in_inventories
    }
}

pub struct Floor {
    pub machines: Vec<Machine>,
    pub inventories: Vec<VecDeque<BatchId>>,
    /// Per stage, machines holding a finished batch, in blocking order.
    pub holding: Vec<VecDeque<MachineIdx>>,
    pub batches: Vec<Batch>,
    pub maintenance_active: bool,
    pub blocked_attempts: [u64; 4],
}

impl Floor {
    pub fn new(plan: &Plan) -> Self {
        Floor {
            machines: plan
                .machines
                .iter()
                .map(|_| Machine {
                    state: MachineState::Idle,
                    closed: false,
                })
                .collect(),
            inventories: plan.inventories.iter().map(|_| VecDeque::new()).collect(),
            holding: plan.stages.iter().map(|_| VecDeque::new()).collect(),
            batches: Vec::new(),
            maintenance_active: false,
            blocked_attempts: [0; 4],
        }
    }

    pub fn census(&self) -> Census {
        let mut c = Census {
            created: self.batches.len(),
            ..Census::default()
        };
        for b in &self.batches {
            match b.release {
                ReleaseState::Released(_) => c.released += 1,
                ReleaseState::Discarded(..) => c.discarded += 1,
                _ => match b.location {
                    Location::Machine(_) => c.in_machines += 1,
                    Location::Inventory(_) => c.in_inventories += 1,
                    Location::Shipped | Location::Lost => {}
                },
            }
        }
        c
    }

    fn has_space(&self, plan: &Plan, inv: InventoryIdx) -> bool {
        plan.inventories[inv]
            .capacity
            .is_none_or(|cap| self.inventories[inv].len() < cap)
    }
}

impl Model {
    /// Try to start one batch at `stage`.
    ///
    /// Prerequisites are checked in the order: idle open machine, input
    /// batch, downstream space, raw materials. The first failing one is
    /// returned. A material failure opens a stockout interval.
    pub fn try_dispatch(&mut self, stage: StageIdx) -> Result<BatchId, Blocked> {
        let now = self.now();
        let st = &self.plan.stages[stage];
        let machine = st.machines.iter().copied().find(|&m| {
            let mc = &self.floor.machines[m];
            mc.state == MachineState::Idle && !mc.closed
        });
        let result = (|| {
            let machine = machine.ok_or(Blocked::NoMachine)?;
            if let Some(inv) = st.input {
                if self.floor.inventories[inv].is_empty() {
                    return Err(Blocked::NoInput);
                }
            }
            if !self.floor.has_space(&self.plan, st.output) {
                return Err(Blocked::DownstreamFull);
            }
            if let Some(&(mat, _)) = st
                .materials
                .iter()
                .find(|&&(mat, q)| self.warehouse.materials[mat].on_hand < q)
            {
                return Err(Blocked::MaterialStockout(mat));
            }
            Ok(machine)
        })();
        let machine = match result {
            Ok(m) => m,
            Err(b) => {
                let k = match b {
                    Blocked::NoMachine => 0,
                    Blocked::NoInput => 1,
                    Blocked::DownstreamFull => 2,
                    Blocked::MaterialStockout(mat) => {
                        self.open_stockout(mat, now);
                        3
                    }
                };
                self.floor.blocked_attempts[k] += 1;
                return Err(b);
            }
        };

        // commit
        let input = st.input;
        let materials = st.materials.clone();
        let batch = match input {
            Some(inv) => {
                let b = self.floor.inventories[inv].pop_front().expect("checked");
                self.rec.inventory_level[inv].set(now, self.floor.inventories[inv].len() as f64);
                b
            }
            None => self.new_batch(now),
        };
        for (mat, q) in materials {
            self.consume(mat, q);
        }

        let m_stream = &mut self.streams.machine[machine];
        let sp = &self.params.stages[stage];
        let mut duration = sp.processing_time.sample(m_stream) * sp.time_multiplier;
        for &t in &self.plan.stages[stage].ipc_tests {
            let tp = &self.params.tests[t];
            let rng = &mut self.streams.test[t];
            duration += tp.prep_time.sample(rng) + tp.test_time.sample(rng) + tp.check_time.sample(rng);
            if rng.random_bool_p(tp.failure_prob) {
                self.floor.batches[batch].ipc_deviations += 1;
            }
        }
        let event = self.queue.schedule_in(duration, EventKind::ProcessingDone { machine });
        self.floor.machines[machine].state = MachineState::Busy {
            batch,
            finish_at: now + duration,
            event,
        };
        self.rec.machine_busy[machine].set(now, 1.0);
        let b = &mut self.floor.batches[batch];
        b.location = Location::Machine(machine);
        b.stage_history.push(StageVisit {
            stage,
            enter: now,
            exit: None,
        });
        self.spawn_samples(batch, stage, SamplePoint::Start);
        if let Some(inv) = self.plan.stages[stage].input {
            self.space_freed(inv);
        }
        Ok(batch)
    }

    pub fn floor(&self) -> &Floor {
        &self.floor
    }

    fn new_batch(&mut self, now: Time) -> BatchId {
        let id = self.floor.batches.len();
        self.floor.batches.push(Batch {
            id,
            created_at: now,
            stage_history: Vec::new(),
            quantity: 1.0,
            doses: 0.0,
            release: ReleaseState::InProcess,
            location: Location::Lost,
            retests: 0,
            investigations: 0,
            samples: Vec::new(),
            tasks: Vec::new(),
            outstanding: 0,
            release_started: false,
            ipc_deviations: 0,
        });
        id
    }

    pub(crate) fn complete_processing(&mut self, machine: MachineIdx) {
        let now = self.now();
        let MachineState::Busy { batch, finish_at, .. } = self.floor.machines[machine].state else {
            panic!("completion event for a machine that is not busy");
        };
        debug_assert_eq!(finish_at, now);
        self.rec.machine_busy[machine].set(now, 0.0);
        let stage = self.plan.machines[machine].stage;

        let y = self.params.stages[stage]
            .yield_fraction
            .sample(&mut self.streams.machine[machine]);
        let deviation = {
            let p = self.params.stages[stage].deviation_prob;
            self.streams.stage_deviation[stage].random_bool_p(p)
        };
        let b = &mut self.floor.batches[batch];
        b.quantity *= y;
        if let Some(v) = b.stage_history.last_mut() {
            v.exit = Some(now);
        }
        if let Some(d) = self.plan.stages[stage].doses_per_output_batch {
            b.doses = libm::round(d * b.quantity);
        }
        let ipc = core::mem::take(&mut b.ipc_deviations);
        for _ in 0..ipc + u32::from(deviation) {
            self.open_deviation(batch, stage);
        }
        if self.plan.stages[stage].document_review {
            self.spawn_document_review(batch, stage);
        }
        self.spawn_samples(batch, stage, SamplePoint::End);

        let out = self.plan.stages[stage].output;
        if self.floor.has_space(&self.plan, out) {
            self.floor.machines[machine].state = MachineState::Idle;
            self.place_in_inventory(batch, out);
            self.dirty.insert(stage);
        } else {
            self.floor.machines[machine].state = MachineState::Holding { batch };
            self.floor.holding[stage].push_back(machine);
        }
    }

    fn place_in_inventory(&mut self, batch: BatchId, inv: InventoryIdx) {
        let now = self.now();
        self.floor.inventories[inv].push_back(batch);
        self.rec.inventory_level[inv].set(now, self.floor.inventories[inv].len() as f64);
        self.floor.batches[batch].location = Location::Inventory(inv);
        if let Some(next) = self.plan.consumer_of(inv) {
            self.dirty.insert(next);
        }
        if self.plan.inventories[inv].kind == InventoryKind::Final {
            self.floor.batches[batch].release = ReleaseState::AwaitingRelease;
            self.check_release(batch);
        }
    }

    /// A slot opened in `inv`: hand over a held batch first, then let the
    /// producing stage try again.
    pub(crate) fn space_freed(&mut self, inv: InventoryIdx) {
        let stage = self.plan.producer_of(inv);
        if self.floor.has_space(&self.plan, inv) {
            if let Some(machine) = self.floor.holding[stage].pop_front() {
                let MachineState::Holding { batch } = self.floor.machines[machine].state else {
                    panic!("holding queue out of sync");
                };
                self.floor.machines[machine].state = MachineState::Idle;
                self.place_in_inventory(batch, inv);
            }
        }
        self.dirty.insert(stage);
    }

    pub(crate) fn set_maintenance(&mut self, active: bool) {
        self.floor.maintenance_active = active;
        for m in 0..self.floor.machines.len() {
            self.refresh_machine(m);
        }
    }

    /// Re-derive a machine's open/closed status from maintenance and
    /// scenario overrides, suspending or resuming in-flight work.
    pub(crate) fn refresh_machine(&mut self, m: MachineIdx) {
        let now = self.now();
        let closed = self.floor.maintenance_active || self.params.machine_closed[m];
        let mc = &mut self.floor.machines[m];
        if closed == mc.closed {
            return;
        }
        mc.closed = closed;
        self.rec.machine_closed[m].set(now, if closed { 1.0 } else { 0.0 });
        match (closed, mc.state) {
            (true, MachineState::Busy { batch, finish_at, event }) => {
                self.queue.cancel(event);
                mc.state = MachineState::Suspended {
                    batch,
                    remaining: finish_at - now,
                };
                self.rec.machine_busy[m].set(now, 0.0);
            }
            (false, MachineState::Suspended { batch, remaining }) => {
                let event = self.queue.schedule_in(remaining, EventKind::ProcessingDone { machine: m });
                mc.state = MachineState::Busy {
                    batch,
                    finish_at: now + remaining,
                    event,
                };
                self.rec.machine_busy[m].set(now, 1.0);
            }
            (false, _) => {
                let stage = self.plan.machines[m].stage;
                self.dirty.insert(stage);
            }
            _ => {}
        }
    }

    /// Physically remove a batch from the floor and void its QA/QC work.
    pub(crate) fn discard_batch(&mut self, batch: BatchId, cause: crate::production::DiscardCause) {
        let now = self.now();
        if self.floor.batches[batch].release.is_terminal() {
            return;
        }
        self.floor.batches[batch].release = ReleaseState::Discarded(now, cause);
        match self.floor.batches[batch].location {
            Location::Machine(m) => {
                match self.floor.machines[m].state {
                    MachineState::Busy { event, .. } => {
                        self.queue.cancel(event);
                        self.rec.machine_busy[m].set(now, 0.0);
                    }
                    MachineState::Holding { .. } => {
                        let stage = self.plan.machines[m].stage;
                        self.floor.holding[stage].retain(|&h| h != m);
                    }
                    _ => {}
                }
                self.floor.machines[m].state = MachineState::Idle;
                self.dirty.insert(self.plan.machines[m].stage);
            }
            Location::Inventory(inv) => {
                self.floor.inventories[inv].retain(|&b| b != batch);
                self.rec.inventory_level[inv].set(now, self.floor.inventories[inv].len() as f64);
                self.space_freed(inv);
            }
            Location::Shipped | Location::Lost => {}
        }
        self.floor.batches[batch].location = Location::Lost;
        self.void_tasks(batch, cause == DiscardCause::PowerOutage);
    }

    /// Final release: the batch leaves the final inventory and its doses
    /// count towards output.
    pub(crate) fn release_batch(&mut self, batch: BatchId) {
        let now = self.now();
        assert!(
            self.all_tests_passed(batch) && self.floor.batches[batch].outstanding == 0,
            "release attempted with unresolved QA/QC work on batch {batch}"
        );
        let b = &mut self.floor.batches[batch];
        let Location::Inventory(inv) = b.location else {
            panic!("released batch is not in the final inventory");
        };
        b.release = ReleaseState::Released(now);
        b.location = Location::Shipped;
        let doses = b.doses;
        let day = (libm::floor(now) as usize).min(self.rec.released_doses.len() - 1);
        self.rec.released_doses[day] += doses;
        self.floor.inventories[inv].retain(|&x| x != batch);
        self.rec.inventory_level[inv].set(now, self.floor.inventories[inv].len() as f64);
        self.space_freed(inv);
    }
}

/// Bernoulli draw that consumes exactly one uniform regardless of `p`.
pub(crate) trait BoolDraw {
    fn random_bool_p(&mut self, p: f64) -> bool;
}

impl<R: rand::Rng + ?Sized> BoolDraw for R {
    fn random_bool_p(&mut self, p: f64) -> bool {
        let u: f64 = self.random();
        u < p
    }
}
