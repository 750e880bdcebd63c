//! Time-windowed runtime overrides of model parameters.
//!
//! A [`ScenarioSpec`] is an overlay on the base config: a list of
//! modifications, each naming a dotted target path, an override (absolute
//! `value` or `factor` relative to baseline) and a window `[start, end)`.
//! Specs compile against a [`Plan`] into concrete parameter writes, so every
//! error surfaces before the run starts.
//!
//! Overlapping writes to one parameter stack up: the most recently applied
//! value is live, and the baseline returns once the last window closes.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::config::{Checker, ConfigError};
use crate::dist::Distribution;
use crate::engine::Time;
use crate::plan::*;
use crate::production::DiscardCause;
use crate::sim::{EventKind, Model};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub modifications: Vec<ModificationSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Number(f64),
    Text(String),
    Dist(Distribution),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModificationSpec {
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<ParamValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<f64>,
    pub start: NaiveDate,
    /// Exclusive; omitted means the change is permanent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<NaiveDate>,
    #[serde(default = "yes")]
    pub revert: bool,
}

fn yes() -> bool {
    true
}

/// Address of one live parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ParamRef {
    MachineClosed(MachineIdx),
    ProcessingTime(StageIdx),
    TimeMultiplier(StageIdx),
    YieldFraction(StageIdx),
    DeviationProb(StageIdx),
    PoolCapacity(PoolIdx),
    PrepTime(TestIdx),
    TestTime(TestIdx),
    CheckTime(TestIdx),
    SupervisoryCheckTime(TestIdx),
    FailureProb(TestIdx),
    DocumentReviewTime,
    ReleaseReviewTime,
    ReleaseCheckTime,
    InvestigationTime,
    DeviationInvestigationTime,
    Available(MaterialIdx),
    ReceiptQcTime(MaterialIdx),
    ReceiptRejectionProb(MaterialIdx),
    LeadTime(MaterialIdx, usize),
    TransportTime(MaterialIdx, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Bool(bool),
    Num(f64),
    Count(u32),
    Dist(Distribution),
    OptDist(Option<Distribution>),
}

impl ParamRef {
    pub fn read(self, p: &Params) -> Value {
        use ParamRef::*;
        match self {
            MachineClosed(m) => Value::Bool(p.machine_closed[m]),
            ProcessingTime(s) => Value::Dist(p.stages[s].processing_time),
            TimeMultiplier(s) => Value::Num(p.stages[s].time_multiplier),
            YieldFraction(s) => Value::Dist(p.stages[s].yield_fraction),
            DeviationProb(s) => Value::Num(p.stages[s].deviation_prob),
            PoolCapacity(i) => Value::Count(p.pool_capacity[i]),
            PrepTime(t) => Value::Dist(p.tests[t].prep_time),
            TestTime(t) => Value::Dist(p.tests[t].test_time),
            CheckTime(t) => Value::Dist(p.tests[t].check_time),
            SupervisoryCheckTime(t) => Value::OptDist(p.tests[t].supervisory_check_time),
            FailureProb(t) => Value::Num(p.tests[t].failure_prob),
            DocumentReviewTime => Value::Dist(p.qa.document_review_time),
            ReleaseReviewTime => Value::OptDist(p.qa.release_review_time),
            ReleaseCheckTime => Value::OptDist(p.qa.release_check_time),
            InvestigationTime => Value::Dist(p.qa.investigation_time),
            DeviationInvestigationTime => Value::Dist(p.qa.deviation_investigation_time),
            Available(m) => Value::Bool(p.materials[m].available),
            ReceiptQcTime(m) => Value::Dist(p.materials[m].receipt_qc_time),
            ReceiptRejectionProb(m) => Value::Num(p.materials[m].receipt_rejection_prob),
            LeadTime(m, s) => Value::Dist(p.materials[m].suppliers[s].lead_time),
            TransportTime(m, s) => Value::Dist(p.materials[m].suppliers[s].transport_time),
        }
    }

    /// Store `v`; `v` must be of the kind [`ParamRef::read`] returns.
    pub fn write(self, p: &mut Params, v: &Value) {
        use ParamRef::*;
        let (b, n, c, d, o) = match *v {
            Value::Bool(b) => (b, 0.0, 0, None, None),
            Value::Num(n) => (false, n, 0, None, None),
            Value::Count(c) => (false, 0.0, c, None, None),
            Value::Dist(d) => (false, 0.0, 0, Some(d), None),
            Value::OptDist(o) => (false, 0.0, 0, None, Some(o)),
        };
        let dist = || d.expect("distribution value");
        let opt = || o.expect("optional distribution value");
        match self {
            MachineClosed(m) => p.machine_closed[m] = b,
            ProcessingTime(s) => p.stages[s].processing_time = dist(),
            TimeMultiplier(s) => p.stages[s].time_multiplier = n,
            YieldFraction(s) => p.stages[s].yield_fraction = dist(),
            DeviationProb(s) => p.stages[s].deviation_prob = n,
            PoolCapacity(i) => p.pool_capacity[i] = c,
            PrepTime(t) => p.tests[t].prep_time = dist(),
            TestTime(t) => p.tests[t].test_time = dist(),
            CheckTime(t) => p.tests[t].check_time = dist(),
            SupervisoryCheckTime(t) => p.tests[t].supervisory_check_time = opt(),
            FailureProb(t) => p.tests[t].failure_prob = n,
            DocumentReviewTime => p.qa.document_review_time = dist(),
            ReleaseReviewTime => p.qa.release_review_time = opt(),
            ReleaseCheckTime => p.qa.release_check_time = opt(),
            InvestigationTime => p.qa.investigation_time = dist(),
            DeviationInvestigationTime => p.qa.deviation_investigation_time = dist(),
            Available(m) => p.materials[m].available = b,
            ReceiptQcTime(m) => p.materials[m].receipt_qc_time = dist(),
            ReceiptRejectionProb(m) => p.materials[m].receipt_rejection_prob = n,
            LeadTime(m, s) => p.materials[m].suppliers[s].lead_time = dist(),
            TransportTime(m, s) => p.materials[m].suppliers[s].transport_time = dist(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Set(Vec<(ParamRef, Value)>),
    WipReset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledModification {
    pub start: Time,
    /// Revert time; `None` when permanent.
    pub end: Option<Time>,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompiledScenario {
    pub name: String,
    pub modifications: Vec<CompiledModification>,
}

impl CompiledScenario {
    pub fn base() -> Self {
        CompiledScenario {
            name: String::from("base"),
            modifications: Vec::new(),
        }
    }
}

fn select<'a>(ids: impl Iterator<Item = &'a str>, sel: &str) -> Vec<usize> {
    ids.enumerate()
        .filter(|(_, id)| sel == "*" || *id == sel)
        .map(|(i, _)| i)
        .collect()
}

fn resolve(plan: &Plan, target: &str) -> Result<Vec<ParamRef>, String> {
    use ParamRef::*;
    let parts: Vec<&str> = target.split('.').collect();
    let none = |what: &str, sel: &str| format!("no {what} matches '{sel}'");
    let nonempty = |v: Vec<ParamRef>, what: &str, sel: &str| {
        if v.is_empty() {
            Err(none(what, sel))
        } else {
            Ok(v)
        }
    };
    match parts.as_slice() {
        ["machines", sel, "state"] => {
            let ms = select(plan.machines.iter().map(|m| m.id.as_str()), sel);
            nonempty(ms.into_iter().map(MachineClosed).collect(), "machine", sel)
        }
        ["stages", sel, field] => {
            let f: fn(StageIdx) -> ParamRef = match *field {
                "processing_time" => ProcessingTime,
                "time_multiplier" => TimeMultiplier,
                "yield_fraction" => YieldFraction,
                "deviation_prob" => DeviationProb,
                _ => return Err(format!("unknown stage parameter '{field}'")),
            };
            let ss = select(plan.stages.iter().map(|s| s.id.as_str()), sel);
            nonempty(ss.into_iter().map(f).collect(), "stage", sel)
        }
        ["pools", team, role, "capacity"] => {
            let v: Vec<ParamRef> = plan
                .pools
                .iter()
                .enumerate()
                .filter(|(_, p)| {
                    let t = p.team.map_or("qa", |t| plan.teams[t].as_str());
                    (*team == "*" || *team == t) && (*role == "*" || *role == p.role.as_str())
                })
                .map(|(i, _)| PoolCapacity(i))
                .collect();
            nonempty(v, "pool", &format!("{team}.{role}"))
        }
        ["tests", sel, field] => {
            let f: fn(TestIdx) -> ParamRef = match *field {
                "prep_time" => PrepTime,
                "test_time" => TestTime,
                "check_time" => CheckTime,
                "supervisory_check_time" => SupervisoryCheckTime,
                "failure_prob" => FailureProb,
                _ => return Err(format!("unknown test parameter '{field}'")),
            };
            let ts = select(plan.tests.iter().map(|t| t.id.as_str()), sel);
            nonempty(ts.into_iter().map(f).collect(), "test", sel)
        }
        ["qa", field] => Ok(alloc::vec![match *field {
            "document_review_time" => DocumentReviewTime,
            "release_review_time" => ReleaseReviewTime,
            "release_check_time" => ReleaseCheckTime,
            "investigation_time" => InvestigationTime,
            "deviation_investigation_time" => DeviationInvestigationTime,
            _ => return Err(format!("unknown qa parameter '{field}'")),
        }]),
        ["materials", sel, field] => {
            let f: fn(MaterialIdx) -> ParamRef = match *field {
                "available" => Available,
                "receipt_qc_time" => ReceiptQcTime,
                "receipt_rejection_prob" => ReceiptRejectionProb,
                _ => return Err(format!("unknown material parameter '{field}'")),
            };
            let ms = select(plan.materials.iter().map(|m| m.id.as_str()), sel);
            nonempty(ms.into_iter().map(f).collect(), "material", sel)
        }
        ["materials", msel, "suppliers", ssel, field] => {
            let f: fn(MaterialIdx, usize) -> ParamRef = match *field {
                "lead_time" => LeadTime,
                "transport_time" => TransportTime,
                _ => return Err(format!("unknown supplier parameter '{field}'")),
            };
            let mut v = Vec::new();
            for m in select(plan.materials.iter().map(|m| m.id.as_str()), msel) {
                let sup = &plan.materials[m].suppliers;
                for s in select(sup.iter().map(|s| s.id.as_str()), ssel) {
                    v.push(f(m, s));
                }
            }
            nonempty(v, "material supplier", &format!("{msel}.{ssel}"))
        }
        _ => Err(format!("unresolvable target '{target}'")),
    }
}

/// Resolve the new value for `r` from an absolute override or a factor on
/// the baseline, checking its kind and range.
fn override_value(
    c: &mut Checker,
    path: &str,
    r: ParamRef,
    baseline: &Params,
    value: Option<&ParamValue>,
    factor: Option<f64>,
) -> Option<Value> {
    use ParamRef::*;
    let base = r.read(baseline);
    let before = c.errors.len();
    let v = match (value, factor, base) {
        (Some(_), Some(_), _) | (None, None, _) => {
            c.err(path, "exactly one of `value` and `factor` is required");
            return None;
        }
        (None, Some(k), _) if !(k.is_finite() && k >= 0.0) => {
            c.err(path, "factor must be a finite non-negative number");
            return None;
        }
        (Some(ParamValue::Text(t)), None, Value::Bool(_)) if matches!(r, MachineClosed(_)) => match t.as_str() {
            "closed" => Value::Bool(true),
            "operating" => Value::Bool(false),
            _ => {
                c.err(path, "machine state must be \"closed\" or \"operating\"");
                return None;
            }
        },
        (Some(ParamValue::Bool(b)), None, Value::Bool(_)) if matches!(r, Available(_)) => Value::Bool(*b),
        (Some(ParamValue::Number(n)), None, Value::Num(_)) => Value::Num(*n),
        (None, Some(k), Value::Num(b)) => Value::Num(b * k),
        (Some(ParamValue::Number(n)), None, Value::Count(_)) => {
            if !(n.is_finite() && *n >= 0.0 && libm::floor(*n) == *n) {
                c.err(path, "capacity must be a non-negative integer");
                return None;
            }
            Value::Count(*n as u32)
        }
        (None, Some(k), Value::Count(b)) => Value::Count(libm::floor(f64::from(b) * k) as u32),
        (Some(ParamValue::Dist(d)), None, Value::Dist(_)) => Value::Dist(*d),
        (Some(ParamValue::Dist(d)), None, Value::OptDist(_)) => Value::OptDist(Some(*d)),
        (None, Some(k), Value::Dist(b)) => Value::Dist(b.scaled(k)),
        (None, Some(k), Value::OptDist(b)) => Value::OptDist(b.map(|d| d.scaled(k))),
        _ => {
            c.err(path, "override has the wrong kind for this target");
            return None;
        }
    };
    match (&v, r) {
        (Value::Num(p), DeviationProb(_) | FailureProb(_) | ReceiptRejectionProb(_)) => c.prob(path, *p),
        (Value::Num(m), TimeMultiplier(_)) => {
            if !(m.is_finite() && *m > 0.0) {
                c.err(path, "time multiplier must be positive");
            }
        }
        (Value::Dist(d), YieldFraction(_)) => c.yield_fraction(path, d),
        (Value::Dist(d) | Value::OptDist(Some(d)), _) => c.duration(path, d),
        _ => {}
    }
    (c.errors.len() == before).then_some(v)
}

impl ScenarioSpec {
    /// An overlay with no modifications.
    pub fn empty(name: impl Into<String>) -> Self {
        ScenarioSpec {
            name: name.into(),
            description: String::new(),
            modifications: Vec::new(),
        }
    }

    /// Resolve every target against `plan` and precompute override values
    /// from `baseline`. All errors are reported together.
    pub fn compile(&self, plan: &Plan, baseline: &Params) -> Result<CompiledScenario, Vec<ConfigError>> {
        let mut c = Checker { errors: Vec::new() };
        let horizon = plan.clock.horizon();
        let mut mods = Vec::new();
        for (i, m) in self.modifications.iter().enumerate() {
            let path = format!("modifications[{i}]");
            let start = plan.clock.day_of(m.start) as Time;
            if !(0.0..horizon).contains(&start) {
                c.err(format!("{path}.start"), "window starts outside the simulation horizon");
            }
            let end = m.end.map(|e| plan.clock.day_of(e) as Time);
            if let Some(e) = end {
                if e <= start || e > horizon {
                    c.err(format!("{path}.end"), "window end must follow start and lie within the horizon");
                }
            }
            let action = if m.target == "wip.reset" {
                if m.factor.is_some() || end.is_some() {
                    c.err(&path, "wip.reset is an instant event without factor or end");
                }
                Action::WipReset
            } else {
                match resolve(plan, &m.target) {
                    Err(msg) => {
                        c.err(format!("{path}.target"), msg);
                        continue;
                    }
                    Ok(refs) => {
                        let mut sets = Vec::new();
                        for r in refs {
                            if let Some(v) = override_value(&mut c, &path, r, baseline, m.value.as_ref(), m.factor) {
                                sets.push((r, v));
                            }
                        }
                        Action::Set(sets)
                    }
                }
            };
            mods.push(CompiledModification {
                start,
                end: if m.revert { end } else { None },
                action,
            });
        }
        if c.errors.is_empty() {
            Ok(CompiledScenario {
                name: self.name.clone(),
                modifications: mods,
            })
        } else {
            Err(c.errors)
        }
    }
}

/// Per-parameter override stacks of a running replication.
#[derive(Debug, Clone, Default)]
pub struct ScenarioState {
    pub compiled: CompiledScenario,
    stacks: BTreeMap<ParamRef, Vec<(usize, Value)>>,
}

impl ScenarioState {
    pub fn new(compiled: CompiledScenario) -> Self {
        ScenarioState {
            compiled,
            stacks: BTreeMap::new(),
        }
    }

    pub fn active_overrides(&self) -> usize {
        self.stacks.values().map(Vec::len).sum()
    }
}

impl Model {
    pub(crate) fn schedule_scenario(&mut self) {
        for i in 0..self.scenario.compiled.modifications.len() {
            let m = &self.scenario.compiled.modifications[i];
            let (start, end) = (m.start, m.end);
            let kind = match m.action {
                Action::WipReset => EventKind::WipReset,
                Action::Set(_) => EventKind::ScenarioApply { modification: i },
            };
            self.queue.schedule(start, kind);
            if let (Some(e), Action::Set(_)) = (end, &m.action) {
                self.queue.schedule(e, EventKind::ScenarioRevert { modification: i });
            }
        }
    }

    pub(crate) fn apply_modification(&mut self, i: usize) {
        let Action::Set(sets) = self.scenario.compiled.modifications[i].action.clone() else {
            return;
        };
        for (r, v) in sets {
            r.write(&mut self.params, &v);
            self.scenario.stacks.entry(r).or_default().push((i, v));
            self.param_changed(r);
        }
    }

    pub(crate) fn revert_modification(&mut self, i: usize) {
        let Action::Set(sets) = self.scenario.compiled.modifications[i].action.clone() else {
            return;
        };
        for (r, _) in sets {
            let stack = self.scenario.stacks.get_mut(&r).expect("applied before revert");
            stack.retain(|(j, _)| *j != i);
            match stack.last() {
                Some((_, v)) => r.write(&mut self.params, &v.clone()),
                None => {
                    self.scenario.stacks.remove(&r);
                    r.write(&mut self.params, &r.read(&self.baseline));
                }
            }
            self.param_changed(r);
        }
    }

    fn param_changed(&mut self, r: ParamRef) {
        match r {
            ParamRef::MachineClosed(m) => self.refresh_machine(m),
            ParamRef::PoolCapacity(p) => {
                self.record_pool(p);
                self.try_start(p);
            }
            ParamRef::Available(m) => self.release_held(m),
            ParamRef::ProcessingTime(s) | ParamRef::TimeMultiplier(s) => {
                self.dirty.insert(s);
            }
            _ => {}
        }
    }

    /// Power outage: work in machines is lost and so are the lab samples of
    /// every unreleased batch. Batches in inventories survive; their open
    /// tests restart from the queue.
    pub(crate) fn reset_wip(&mut self) {
        let in_machines: Vec<_> = self.floor.machines.iter().filter_map(|m| m.batch()).collect();
        for b in in_machines {
            self.discard_batch(b, DiscardCause::PowerOutage);
        }
        let survivors: Vec<_> = self
            .floor
            .batches
            .iter()
            .filter(|b| !b.release.is_terminal())
            .map(|b| b.id)
            .collect();
        for b in survivors {
            self.restart_tests(b);
        }
        self.dirty.extend(0..self.plan.stages.len());
    }
}
