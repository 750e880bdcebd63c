//! Quality control testing and quality assurance review/release.
//!
//! Every unit of QA/QC work is a [`Task`] that walks through one or more
//! phases, each phase seizing one person from a [`Pool`] for a sampled
//! duration. Pools never preempt: a capacity cut takes effect as running
//! phases finish. Queued tasks are picked at seize time by [`PriorityKey`].

use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::Serialize;

use crate::engine::{EventId, Time};
use crate::plan::*;
use crate::production::{BatchId, BoolDraw, DiscardCause, Location, ReleaseState};
use crate::sim::{EventKind, Model};

pub type TaskId = usize;
pub type SampleId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Milestone {
    BatchStart,
    Intermediate(StageIdx),
    BatchEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TestState {
    Pending,
    Running,
    Passed,
    Failed,
    /// Failed once; waiting on the OOS investigation and the retest.
    Retesting,
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub id: SampleId,
    pub batch: BatchId,
    pub stage: StageIdx,
    pub milestone: Milestone,
    pub tests: Vec<(TestIdx, TestState)>,
    pub arrived_at: Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InvestigationKind {
    Deviation,
    Oos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Test {
        sample: SampleId,
        slot: usize,
        attempt: u32,
    },
    /// For OOS cases `retest` names the sample slot to retest on closure.
    Investigation {
        kind: InvestigationKind,
        retest: Option<(SampleId, usize, u32)>,
    },
    DocumentReview,
    ReleaseReview,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TaskState {
    Queued { pool: PoolIdx, since: Time },
    Running { pool: PoolIdx, event: EventId },
    Done,
}

#[derive(Debug, Clone)]
pub struct Task {
    pub id: TaskId,
    pub batch: BatchId,
    /// Stage the work belongs to; drives priority.
    pub stage: StageIdx,
    pub kind: TaskKind,
    pub arrived_at: Time,
    pub state: TaskState,
    phase: usize,
    /// Set when the batch is gone; the running phase finishes but has no effect.
    void: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Work {
    TestBench(TestIdx),
    TestSupervision(TestIdx),
    Investigation(InvestigationKind),
    DocumentReview,
    ReleaseReview,
    ReleaseCheck,
}

/// One personnel pool's live state; capacity lives in `Params`.
#[derive(Debug, Clone, Default)]
pub struct Pool {
    pub busy: u32,
    pub queue: Vec<TaskId>,
    pub arrivals: u64,
    pub served: u64,
    /// Sum of queue waits over served phases.
    pub wait_sum: f64,
}

/// Ordering of queued work: fewer batches waiting downstream first, then
/// the stage closest to completion, then first-in-first-out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorityKey {
    pub waiting_downstream: usize,
    pub stage: StageIdx,
    pub arrived_at: Time,
    pub id: TaskId,
}

impl Eq for PriorityKey {}

impl PartialOrd for PriorityKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PriorityKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.waiting_downstream
            .cmp(&other.waiting_downstream)
            .then_with(|| other.stage.cmp(&self.stage))
            .then_with(|| self.arrived_at.total_cmp(&other.arrived_at))
            .then_with(|| self.id.cmp(&other.id))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Lab {
    pub samples: Vec<Sample>,
    pub tasks: Vec<Task>,
    pub pools: Vec<Pool>,
    pub investigations: [u64; 2],
}

impl Lab {
    pub fn new(plan: &Plan) -> Self {
        Lab {
            pools: plan.pools.iter().map(|_| Pool::default()).collect(),
            ..Lab::default()
        }
    }
}

fn milestone(plan: &Plan, stage: StageIdx, at: SamplePoint) -> Milestone {
    match at {
        SamplePoint::Start if stage == 0 => Milestone::BatchStart,
        SamplePoint::End if stage + 1 == plan.stages.len() => Milestone::BatchEnd,
        _ => Milestone::Intermediate(stage),
    }
}

impl Model {
    /// Draw the samples scheduled for `stage` at `at` and queue their
    /// prerequisite-free tests.
    pub(crate) fn spawn_samples(&mut self, batch: BatchId, stage: StageIdx, at: SamplePoint) {
        let now = self.now();
        let plans: Vec<Vec<TestIdx>> = self.plan.stages[stage]
            .samples
            .iter()
            .filter(|s| s.at == at)
            .map(|s| s.tests.clone())
            .collect();
        for tests in plans {
            let id = self.lab.samples.len();
            self.lab.samples.push(Sample {
                id,
                batch,
                stage,
                milestone: milestone(&self.plan, stage, at),
                tests: tests.iter().map(|&t| (t, TestState::Pending)).collect(),
                arrived_at: now,
            });
            self.floor.batches[batch].samples.push(id);
            self.floor.batches[batch].outstanding += tests.len() as u32;
            self.start_ready_tests(id);
        }
    }

    fn start_ready_tests(&mut self, sample: SampleId) {
        for slot in 0..self.lab.samples[sample].tests.len() {
            let (test, state) = self.lab.samples[sample].tests[slot];
            if state != TestState::Pending {
                continue;
            }
            let ready = self.plan.tests[test].prerequisites.iter().all(|p| {
                self.lab.samples[sample]
                    .tests
                    .iter()
                    .any(|&(t, s)| t == *p && s == TestState::Passed)
            });
            if ready {
                self.lab.samples[sample].tests[slot].1 = TestState::Running;
                self.new_test_task(sample, slot, 0);
            }
        }
    }

    fn new_test_task(&mut self, sample: SampleId, slot: usize, attempt: u32) {
        let (batch, stage) = {
            let s = &self.lab.samples[sample];
            (s.batch, s.stage)
        };
        self.new_task(
            batch,
            stage,
            TaskKind::Test {
                sample,
                slot,
                attempt,
            },
        );
    }

    fn new_task(&mut self, batch: BatchId, stage: StageIdx, kind: TaskKind) -> TaskId {
        let id = self.lab.tasks.len();
        let now = self.now();
        self.lab.tasks.push(Task {
            id,
            batch,
            stage,
            kind,
            arrived_at: now,
            state: TaskState::Done,
            phase: 0,
            void: false,
        });
        self.floor.batches[batch].tasks.push(id);
        self.advance_task(id);
        id
    }

    /// Phase list of a task under the current parameters.
    fn phases(&self, kind: TaskKind) -> Vec<(PoolIdx, Work)> {
        let qa = &self.plan.qa;
        let mut v = Vec::new();
        match kind {
            TaskKind::Test { sample, slot, .. } => {
                let test = self.lab.samples[sample].tests[slot].0;
                let team = self.plan.tests[test].team;
                v.push((self.plan.technician_pool(team), Work::TestBench(test)));
                if self.params.tests[test].supervisory_check_time.is_some() {
                    v.push((self.plan.supervisor_pool(team), Work::TestSupervision(test)));
                }
            }
            TaskKind::Investigation { kind, .. } => v.push((qa.investigator, Work::Investigation(kind))),
            TaskKind::DocumentReview => v.push((qa.reviewer, Work::DocumentReview)),
            TaskKind::ReleaseReview => {
                if self.params.qa.release_review_time.is_some() {
                    v.push((qa.reviewer, Work::ReleaseReview));
                }
                if self.params.qa.release_check_time.is_some() {
                    v.push((qa.supervisor, Work::ReleaseCheck));
                }
            }
        }
        v
    }

    fn draw(&mut self, work: Work) -> Time {
        let p = &self.params;
        let s = &mut self.streams;
        match work {
            Work::TestBench(t) => {
                let tp = &p.tests[t];
                let rng = &mut s.test[t];
                tp.prep_time.sample(rng) + tp.test_time.sample(rng) + tp.check_time.sample(rng)
            }
            Work::TestSupervision(t) => p.tests[t]
                .supervisory_check_time
                .as_ref()
                .expect("phase exists")
                .sample(&mut s.test[t]),
            Work::Investigation(InvestigationKind::Oos) => p.qa.investigation_time.sample(&mut s.investigation),
            Work::Investigation(InvestigationKind::Deviation) => {
                p.qa.deviation_investigation_time.sample(&mut s.investigation)
            }
            Work::DocumentReview => p.qa.document_review_time.sample(&mut s.document_review),
            Work::ReleaseReview => p.qa.release_review_time.as_ref().expect("phase exists").sample(&mut s.release),
            Work::ReleaseCheck => p.qa.release_check_time.as_ref().expect("phase exists").sample(&mut s.release),
        }
    }

    /// Queue the task for its current phase, or finish it if none is left.
    fn advance_task(&mut self, task: TaskId) {
        let now = self.now();
        let t = &self.lab.tasks[task];
        let phases = self.phases(t.kind);
        match phases.get(t.phase) {
            Some(&(pool, _)) => {
                self.lab.tasks[task].state = TaskState::Queued { pool, since: now };
                let p = &mut self.lab.pools[pool];
                p.queue.push(task);
                p.arrivals += 1;
                self.rec.pool_queue[pool].set(now, p.queue.len() as f64);
                self.try_start(pool);
            }
            None => {
                self.lab.tasks[task].state = TaskState::Done;
                self.complete_task(task);
            }
        }
    }

    pub fn priority_of(&self, task: TaskId) -> PriorityKey {
        let t = &self.lab.tasks[task];
        let inv = self.plan.stages[t.stage].output;
        PriorityKey {
            waiting_downstream: self.floor.inventories[inv].len(),
            stage: t.stage,
            arrived_at: t.arrived_at,
            id: t.id,
        }
    }

    /// Seize personnel for queued work while capacity allows.
    pub(crate) fn try_start(&mut self, pool: PoolIdx) {
        let now = self.now();
        while self.lab.pools[pool].busy < self.params.pool_capacity[pool] {
            let Some(pos) = (0..self.lab.pools[pool].queue.len())
                .min_by_key(|&i| self.priority_of(self.lab.pools[pool].queue[i]))
            else {
                break;
            };
            let task = self.lab.pools[pool].queue.remove(pos);
            let TaskState::Queued { since, .. } = self.lab.tasks[task].state else {
                panic!("queued task in wrong state");
            };
            let phases = self.phases(self.lab.tasks[task].kind);
            let (_, work) = phases[self.lab.tasks[task].phase];
            let d = self.draw(work);
            let event = self.queue.schedule_in(d, EventKind::TaskPhaseDone { task });
            self.lab.tasks[task].state = TaskState::Running { pool, event };
            let p = &mut self.lab.pools[pool];
            p.busy += 1;
            p.served += 1;
            p.wait_sum += now - since;
            self.record_pool(pool);
        }
    }

    pub(crate) fn record_pool(&mut self, pool: PoolIdx) {
        let now = self.now();
        let p = &self.lab.pools[pool];
        self.rec.pool_busy[pool].set(now, f64::from(p.busy));
        self.rec.pool_queue[pool].set(now, p.queue.len() as f64);
        let cap = self.params.pool_capacity[pool].max(p.busy);
        self.rec.pool_capacity[pool].set(now, f64::from(cap));
    }

    fn free_person(&mut self, pool: PoolIdx) {
        self.lab.pools[pool].busy -= 1;
        self.record_pool(pool);
        self.try_start(pool);
    }

    pub(crate) fn task_phase_done(&mut self, task: TaskId) {
        let TaskState::Running { pool, .. } = self.lab.tasks[task].state else {
            panic!("phase completion for a task that is not running");
        };
        self.lab.tasks[task].state = TaskState::Done;
        if self.lab.tasks[task].void {
            self.free_person(pool);
            return;
        }
        self.lab.tasks[task].phase += 1;
        self.advance_task(task);
        self.free_person(pool);
    }

    fn complete_task(&mut self, task: TaskId) {
        let t = self.lab.tasks[task].clone();
        let batch = t.batch;
        match t.kind {
            TaskKind::Test {
                sample,
                slot,
                attempt,
            } => {
                let test = self.lab.samples[sample].tests[slot].0;
                let p = self.params.tests[test].failure_prob;
                let failed = self.streams.test[test].random_bool_p(p);
                if !failed {
                    self.lab.samples[sample].tests[slot].1 = TestState::Passed;
                    self.floor.batches[batch].outstanding -= 1;
                    self.start_ready_tests(sample);
                } else if attempt < self.plan.qa.max_retests {
                    self.lab.samples[sample].tests[slot].1 = TestState::Retesting;
                    self.open_investigation(
                        batch,
                        t.stage,
                        InvestigationKind::Oos,
                        Some((sample, slot, attempt + 1)),
                    );
                } else {
                    self.lab.samples[sample].tests[slot].1 = TestState::Failed;
                    self.discard_batch(batch, DiscardCause::FailedRetest);
                    return;
                }
            }
            TaskKind::Investigation { retest, .. } => {
                self.floor.batches[batch].outstanding -= 1;
                if let Some((sample, slot, attempt)) = retest {
                    self.floor.batches[batch].retests += 1;
                    self.new_test_task(sample, slot, attempt);
                }
            }
            TaskKind::DocumentReview => {
                self.floor.batches[batch].outstanding -= 1;
            }
            TaskKind::ReleaseReview => {
                self.floor.batches[batch].outstanding -= 1;
                self.release_batch(batch);
                return;
            }
        }
        self.check_release(batch);
    }

    fn open_investigation(
        &mut self,
        batch: BatchId,
        stage: StageIdx,
        kind: InvestigationKind,
        retest: Option<(SampleId, usize, u32)>,
    ) {
        self.lab.investigations[kind as usize] += 1;
        self.floor.batches[batch].investigations += 1;
        self.floor.batches[batch].outstanding += 1;
        self.new_task(batch, stage, TaskKind::Investigation { kind, retest });
    }

    /// A production deviation on `batch` at `stage`.
    pub(crate) fn open_deviation(&mut self, batch: BatchId, stage: StageIdx) {
        self.open_investigation(batch, stage, InvestigationKind::Deviation, None);
    }

    pub(crate) fn spawn_document_review(&mut self, batch: BatchId, stage: StageIdx) {
        self.floor.batches[batch].outstanding += 1;
        self.new_task(batch, stage, TaskKind::DocumentReview);
    }

    pub(crate) fn all_tests_passed(&self, batch: BatchId) -> bool {
        self.floor.batches[batch].samples.iter().all(|&s| {
            self.lab.samples[s]
                .tests
                .iter()
                .all(|&(_, st)| st == TestState::Passed)
        })
    }

    /// Release gate: in the final inventory with all QA/QC work closed.
    pub(crate) fn check_release(&mut self, batch: BatchId) {
        let b = &self.floor.batches[batch];
        if b.release != ReleaseState::AwaitingRelease || b.release_started || b.outstanding != 0 {
            return;
        }
        if !matches!(b.location, Location::Inventory(inv) if inv == self.plan.final_inventory()) {
            return;
        }
        if !self.all_tests_passed(batch) {
            return;
        }
        self.floor.batches[batch].release_started = true;
        let q = &self.params.qa;
        if q.release_review_time.is_some() || q.release_check_time.is_some() {
            self.floor.batches[batch].outstanding += 1;
            let stage = self.plan.stages.len() - 1;
            self.new_task(batch, stage, TaskKind::ReleaseReview);
        } else {
            self.release_batch(batch);
        }
    }

    /// Withdraw one task from the lab. Queued work leaves its queue; running
    /// work is either cut short (`preempt`) or left to finish unobserved.
    fn withdraw_task(&mut self, task: TaskId, preempt: bool) {
        match self.lab.tasks[task].state {
            TaskState::Queued { pool, .. } => {
                self.lab.pools[pool].queue.retain(|&x| x != task);
                self.lab.tasks[task].state = TaskState::Done;
                self.record_pool(pool);
            }
            TaskState::Running { pool, event } if preempt => {
                self.queue.cancel(event);
                self.lab.tasks[task].state = TaskState::Done;
                self.free_person(pool);
            }
            TaskState::Running { .. } => self.lab.tasks[task].void = true,
            TaskState::Done => {}
        }
    }

    pub(crate) fn void_tasks(&mut self, batch: BatchId, preempt: bool) {
        let tasks = self.floor.batches[batch].tasks.clone();
        for task in tasks {
            self.withdraw_task(task, preempt);
        }
    }

    /// Lab samples of a surviving batch are lost: every open test starts
    /// over from the queue.
    pub(crate) fn restart_tests(&mut self, batch: BatchId) {
        let tasks = self.floor.batches[batch].tasks.clone();
        for task in tasks {
            let t = &self.lab.tasks[task];
            let TaskKind::Test {
                sample,
                slot,
                attempt,
            } = t.kind
            else {
                continue;
            };
            if t.state == TaskState::Done {
                continue;
            }
            self.withdraw_task(task, true);
            self.new_test_task(sample, slot, attempt);
        }
    }

    pub fn lab(&self) -> &Lab {
        &self.lab
    }
}
