//! KPI extraction, bottleneck ranking, recovery detection and cross-scenario
//! comparison over replication ensembles.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use chrono::Datelike;
use serde::Serialize;

use crate::engine::{SimClock, Time};
use crate::materials::{stockout_days, Warehouse};
use crate::plan::*;
use crate::production::{DiscardCause, Floor, ReleaseState};
use crate::qaqc::Lab;
use crate::series::DailyIntegral;
use crate::sim::Recorder;
use crate::stats::{mean_ci95, welch};

pub use crate::production::Census;

/// Days in an average calendar month.
pub const DAYS_PER_MONTH: f64 = 365.25 / 12.0;
pub const LEAD_TIME_BIN_DAYS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchRecord {
    pub id: usize,
    pub created_at: Time,
    pub released_at: Option<Time>,
    pub discarded_at: Option<Time>,
    pub cause: Option<DiscardCause>,
    pub doses: f64,
    pub retests: u32,
    pub investigations: u32,
}

impl BatchRecord {
    /// Creation to release, in days.
    pub fn lead_time(&self) -> Option<Time> {
        self.released_at.map(|r| r - self.created_at)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceClass {
    Machine,
    Personnel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResourceSeries {
    pub name: String,
    pub class: ResourceClass,
    /// Busy fraction of available capacity per day.
    pub daily: Vec<f64>,
    /// Busy time over available capacity-time for the whole run.
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueueSeries {
    pub pool: String,
    pub daily: Vec<f64>,
    /// Time-averaged number waiting.
    pub mean_length: f64,
    pub arrivals: u64,
    pub served: u64,
    /// Mean queue wait of served phases, days.
    pub mean_wait: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaterialSeries {
    pub id: String,
    pub name: String,
    /// Daily mean level in batch equivalents.
    pub daily_batch_equivalents: Vec<f64>,
    pub stockouts: Vec<(Time, Time)>,
    pub stockout_days: usize,
    pub initial: f64,
    pub consumed: f64,
    pub received: f64,
    pub on_hand: f64,
}

impl MaterialSeries {
    pub fn stockout_days_per_year(&self, horizon_days: usize) -> f64 {
        self.stockout_days as f64 * 365.25 / horizon_days as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InventorySeries {
    pub id: String,
    pub daily: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(bin_width: f64, values: impl IntoIterator<Item = f64>) -> Self {
        let mut counts = Vec::new();
        for v in values {
            let bin = libm::floor(v.max(0.0) / bin_width) as usize;
            if counts.len() <= bin {
                counts.resize(bin + 1, 0);
            }
            counts[bin] += 1;
        }
        Histogram { bin_width, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KpiSummary {
    pub time_to_first_dose: Option<usize>,
    pub time_to_target_doses: Option<usize>,
    pub target_doses: f64,
    pub doses_at_365: f64,
    pub doses_total: f64,
    pub mean_monthly_throughput: f64,
    pub released_batches: usize,
    pub discarded_batches: usize,
    pub lead_time_histogram: Histogram,
    pub bottleneck: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationResult {
    pub scenario: String,
    pub seed: u64,
    pub horizon_days: usize,
    pub daily_released_doses: Vec<f64>,
    pub batches: Vec<BatchRecord>,
    pub machines: Vec<ResourceSeries>,
    pub pools: Vec<ResourceSeries>,
    pub queues: Vec<QueueSeries>,
    pub materials: Vec<MaterialSeries>,
    pub inventories: Vec<InventorySeries>,
    pub census: Census,
    pub events: u64,
    /// Running hash of every processed `(time, event)`; equal digests mean
    /// equal event logs.
    pub digest: u64,
    pub kpis: KpiSummary,
}

pub fn cumulative(daily: &[f64]) -> Vec<f64> {
    daily
        .iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

/// First day index with cumulative released doses > 0.
pub fn time_to_first_dose(daily: &[f64]) -> Option<usize> {
    daily.iter().position(|&d| d > 0.0)
}

/// First day index by whose end cumulative doses reach `target`.
pub fn time_to_target(daily: &[f64], target: f64) -> Option<usize> {
    cumulative(daily).iter().position(|&c| c >= target)
}

/// Doses released during the first `days` days.
pub fn doses_at(daily: &[f64], days: usize) -> f64 {
    daily[..days.min(daily.len())].iter().sum()
}

/// Released doses per calendar month as `(year, month, doses)`.
pub fn monthly_totals(daily: &[f64], clock: &SimClock) -> Vec<(i32, u32, f64)> {
    let mut out: Vec<(i32, u32, f64)> = Vec::new();
    for (d, &v) in daily.iter().enumerate() {
        let date = clock.date_of(d);
        let key = (date.year(), date.month());
        match out.last_mut() {
            Some(last) if (last.0, last.1) == key => last.2 += v,
            _ => out.push((key.0, key.1, v)),
        }
    }
    out
}

fn ratio(num: &[f64], den: &[f64]) -> Vec<f64> {
    num.iter()
        .zip(den)
        .map(|(n, d)| if *d > 1e-12 { (n / d).min(1.0) } else { 0.0 })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn collect(
    scenario: String,
    seed: u64,
    end: Time,
    plan: &Plan,
    floor: &Floor,
    lab: &Lab,
    warehouse: &Warehouse,
    rec: Recorder,
    events: u64,
    digest: u64,
) -> ReplicationResult {
    let days = plan.clock.horizon_days();
    let fin = |s: DailyIntegral| s.finish(end);

    let machines = rec
        .machine_busy
        .into_iter()
        .zip(rec.machine_closed)
        .zip(&plan.machines)
        .map(|((busy, closed), mp)| {
            let (b, bt) = fin(busy);
            let (c, ct) = fin(closed);
            let open: Vec<f64> = c.iter().map(|x| 1.0 - x).collect();
            let avail = end - ct;
            ResourceSeries {
                name: mp.id.clone(),
                class: ResourceClass::Machine,
                daily: ratio(&b, &open),
                utilization: if avail > 0.0 { bt / avail } else { 0.0 },
            }
        })
        .collect();

    let pools = rec
        .pool_busy
        .into_iter()
        .zip(rec.pool_capacity)
        .zip(&plan.pools)
        .map(|((busy, cap), pp)| {
            let (b, bt) = fin(busy);
            let (c, ctot) = fin(cap);
            ResourceSeries {
                name: pp.name.clone(),
                class: ResourceClass::Personnel,
                daily: ratio(&b, &c),
                utilization: if ctot > 0.0 { bt / ctot } else { 0.0 },
            }
        })
        .collect();

    let queues = rec
        .pool_queue
        .into_iter()
        .zip(&lab.pools)
        .zip(&plan.pools)
        .map(|((q, pool), pp)| {
            let (daily, total) = fin(q);
            QueueSeries {
                pool: pp.name.clone(),
                daily,
                mean_length: if end > 0.0 { total / end } else { 0.0 },
                arrivals: pool.arrivals,
                served: pool.served,
                mean_wait: if pool.served > 0 {
                    pool.wait_sum / pool.served as f64
                } else {
                    0.0
                },
            }
        })
        .collect();

    let materials = rec
        .material_level
        .into_iter()
        .zip(&warehouse.materials)
        .zip(&plan.materials)
        .map(|((lvl, st), mp)| {
            let (daily, _) = fin(lvl);
            let be = mp.batch_equivalent().unwrap_or(1.0);
            MaterialSeries {
                id: mp.id.clone(),
                name: mp.name.clone(),
                daily_batch_equivalents: daily.iter().map(|x| x / be).collect(),
                stockout_days: stockout_days(&st.stockouts, days),
                stockouts: st.stockouts.clone(),
                initial: mp.initial_stockpile,
                consumed: st.consumed,
                received: st.received,
                on_hand: st.on_hand,
            }
        })
        .collect();

    let inventories = rec
        .inventory_level
        .into_iter()
        .zip(&plan.inventories)
        .map(|(lvl, ip)| InventorySeries {
            id: ip.id.clone(),
            daily: fin(lvl).0,
        })
        .collect();

    let batches: Vec<BatchRecord> = floor
        .batches
        .iter()
        .map(|b| {
            let (released_at, discarded_at, cause) = match b.release {
                ReleaseState::Released(t) => (Some(t), None, None),
                ReleaseState::Discarded(t, c) => (None, Some(t), Some(c)),
                _ => (None, None, None),
            };
            BatchRecord {
                id: b.id,
                created_at: b.created_at,
                released_at,
                discarded_at,
                cause,
                doses: b.doses,
                retests: b.retests,
                investigations: b.investigations,
            }
        })
        .collect();

    let mut result = ReplicationResult {
        scenario,
        seed,
        horizon_days: days,
        daily_released_doses: rec.released_doses,
        batches,
        machines,
        pools,
        queues,
        materials,
        inventories,
        census: floor.census(),
        events,
        digest,
        kpis: KpiSummary {
            time_to_first_dose: None,
            time_to_target_doses: None,
            target_doses: plan.target_doses,
            doses_at_365: 0.0,
            doses_total: 0.0,
            mean_monthly_throughput: 0.0,
            released_batches: 0,
            discarded_batches: 0,
            lead_time_histogram: Histogram::new(LEAD_TIME_BIN_DAYS, []),
            bottleneck: None,
        },
    };
    result.kpis = kpis(&result, plan.target_doses);
    result
}

pub fn kpis(r: &ReplicationResult, target: f64) -> KpiSummary {
    let daily = &r.daily_released_doses;
    let total: f64 = daily.iter().sum();
    let report = bottleneck_report(r);
    KpiSummary {
        time_to_first_dose: time_to_first_dose(daily),
        time_to_target_doses: time_to_target(daily, target),
        target_doses: target,
        doses_at_365: doses_at(daily, 365),
        doses_total: total,
        mean_monthly_throughput: total / (daily.len() as f64 / DAYS_PER_MONTH),
        released_batches: r.census.released,
        discarded_batches: r.census.discarded,
        lead_time_histogram: Histogram::new(LEAD_TIME_BIN_DAYS, r.batches.iter().filter_map(BatchRecord::lead_time)),
        bottleneck: report.bottleneck().map(|b| b.name.clone()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedResource {
    pub name: String,
    pub class: ResourceClass,
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BottleneckReport {
    /// Descending utilization; ties by name.
    pub ranked: Vec<RankedResource>,
    pub max_machine: Option<RankedResource>,
    pub max_personnel: Option<RankedResource>,
}

impl BottleneckReport {
    pub fn new(mut ranked: Vec<RankedResource>) -> Self {
        ranked.sort_by(|a, b| b.utilization.total_cmp(&a.utilization).then_with(|| a.name.cmp(&b.name)));
        let top = |c: ResourceClass| ranked.iter().find(|r| r.class == c).cloned();
        BottleneckReport {
            max_machine: top(ResourceClass::Machine),
            max_personnel: top(ResourceClass::Personnel),
            ranked,
        }
    }

    /// The most utilized resource, if anything was busy at all.
    pub fn bottleneck(&self) -> Option<&RankedResource> {
        self.ranked.first().filter(|r| r.utilization > 0.0)
    }
}

pub fn bottleneck_report(r: &ReplicationResult) -> BottleneckReport {
    BottleneckReport::new(
        r.machines
            .iter()
            .chain(&r.pools)
            .map(|s| RankedResource {
                name: s.name.clone(),
                class: s.class,
                utilization: s.utilization,
            })
            .collect(),
    )
}

/// Ensemble ranking by mean utilization across replications.
pub fn ensemble_bottleneck_report(results: &[ReplicationResult]) -> BottleneckReport {
    let Some(first) = results.first() else {
        return BottleneckReport::new(Vec::new());
    };
    let n = results.len() as f64;
    let all = |r: &ReplicationResult| r.machines.iter().chain(&r.pools).map(|s| s.utilization).collect::<Vec<_>>();
    let mut sums = vec![0.0; first.machines.len() + first.pools.len()];
    for r in results {
        for (s, u) in sums.iter_mut().zip(all(r)) {
            *s += u;
        }
    }
    BottleneckReport::new(
        first
            .machines
            .iter()
            .chain(&first.pools)
            .zip(sums)
            .map(|(s, sum)| RankedResource {
                name: s.name.clone(),
                class: s.class,
                utilization: sum / n,
            })
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryOptions {
    pub window: usize,
    pub alpha: f64,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        RecoveryOptions {
            window: 30,
            alpha: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recovery {
    /// First day the smoothed scenario output is significantly below base.
    pub start: Option<usize>,
    /// First later day it is not; `None` if it never recovers.
    pub end: Option<usize>,
    pub recovered: bool,
    /// Disruption length in weeks with the smoothing lag removed.
    pub weeks: Option<u32>,
}

impl Recovery {
    pub fn is_disrupted(&self) -> bool {
        self.start.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecoveryError {
    TooFewReplications,
    HorizonMismatch,
}

impl core::fmt::Display for RecoveryError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            RecoveryError::TooFewReplications => f.write_str("recovery detection needs at least 2 replications per ensemble"),
            RecoveryError::HorizonMismatch => f.write_str("ensembles have different horizon lengths"),
        }
    }
}

/// Trailing moving average; the first `window - 1` days average what is
/// available.
pub fn trailing_mean(xs: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut sum = 0.0;
    for i in 0..xs.len() {
        sum += xs[i];
        if i >= window {
            sum -= xs[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

/// Daily one-sided Welch p-values for "scenario below base" on the
/// smoothed series.
pub fn daily_p_values(base: &[Vec<f64>], scen: &[Vec<f64>], window: usize) -> Result<Vec<f64>, RecoveryError> {
    if base.len() < 2 || scen.len() < 2 {
        return Err(RecoveryError::TooFewReplications);
    }
    let days = base[0].len();
    if base.iter().chain(scen).any(|s| s.len() != days) {
        return Err(RecoveryError::HorizonMismatch);
    }
    let sb: Vec<Vec<f64>> = base.iter().map(|s| trailing_mean(s, window)).collect();
    let ss: Vec<Vec<f64>> = scen.iter().map(|s| trailing_mean(s, window)).collect();
    let mut a = vec![0.0; ss.len()];
    let mut b = vec![0.0; sb.len()];
    Ok((0..days)
        .map(|d| {
            for (x, s) in a.iter_mut().zip(&ss) {
                *x = s[d];
            }
            for (x, s) in b.iter_mut().zip(&sb) {
                *x = s[d];
            }
            welch(&a, &b).p_less
        })
        .collect())
}

/// Locate the disruption interval of `scen` against `base`.
///
/// After the interval closes, a renewed stretch of at least `window`
/// consecutive significant days marks the scenario not recovered.
pub fn detect_recovery(base: &[Vec<f64>], scen: &[Vec<f64>], opts: RecoveryOptions) -> Result<Recovery, RecoveryError> {
    let p = daily_p_values(base, scen, opts.window)?;
    let sig: Vec<bool> = p.iter().map(|&x| x < opts.alpha).collect();
    let Some(start) = sig.iter().position(|&s| s) else {
        return Ok(Recovery {
            start: None,
            end: None,
            recovered: true,
            weeks: None,
        });
    };
    let end = sig[start..].iter().position(|&s| !s).map(|k| start + k);
    let relapse = end.is_some_and(|e| {
        let mut run = 0;
        sig[e..].iter().any(|&s| {
            run = if s { run + 1 } else { 0 };
            run >= opts.window
        })
    });
    let recovered = end.is_some() && !relapse;
    let weeks = end.filter(|_| recovered).map(|e| {
        let len = (e - start).saturating_sub(opts.window - 1).max(1);
        len.div_ceil(7) as u32
    });
    Ok(Recovery {
        start: Some(start),
        end,
        recovered,
        weeks,
    })
}

/// Per-replication dose totals at the two reporting horizons.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ensemble {
    pub name: String,
    pub doses_12m: Vec<f64>,
    pub doses_36m: Vec<f64>,
}

impl Ensemble {
    pub fn from_results(name: impl Into<String>, results: &[ReplicationResult]) -> Self {
        Ensemble {
            name: name.into(),
            doses_12m: results.iter().map(|r| doses_at(&r.daily_released_doses, 365)).collect(),
            doses_36m: results.iter().map(|r| r.daily_released_doses.iter().sum()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonCell {
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Scenario mean minus base mean.
    pub delta: Option<f64>,
    pub delta_pct: Option<f64>,
    /// Two-sided Welch p-value.
    pub p_value: Option<f64>,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub scenario: String,
    pub at_12m: ComparisonCell,
    pub at_36m: ComparisonCell,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompareError(pub String);

fn cell(xs: &[f64], base: Option<&[f64]>) -> ComparisonCell {
    let (mean, ci_lo, ci_hi) = mean_ci95(xs);
    let (delta, delta_pct, p_value) = match base {
        None => (None, None, None),
        Some(b) => {
            let w = welch(xs, b);
            let bm = crate::stats::mean(b);
            (Some(w.diff), Some(100.0 * w.diff / bm), Some(w.p_two_sided))
        }
    };
    ComparisonCell {
        mean,
        ci_lo,
        ci_hi,
        delta,
        delta_pct,
        p_value,
        significant: p_value.is_some_and(|p| p < 0.05),
    }
}

/// Table of means, 95% intervals, change versus base and Welch p-values.
pub fn compare_scenarios(base: &Ensemble, scenarios: &[Ensemble]) -> Result<ComparisonReport, CompareError> {
    let n = base.doses_36m.len();
    if n < 2 {
        return Err(CompareError(String::from("need at least 2 replications")));
    }
    if let Some(bad) = scenarios.iter().find(|s| s.doses_36m.len() != n || s.doses_12m.len() != n) {
        return Err(CompareError(alloc::format!(
            "scenario '{}' has {} replications, base has {n}",
            bad.name,
            bad.doses_36m.len()
        )));
    }
    let mut rows = vec![ComparisonRow {
        scenario: base.name.clone(),
        at_12m: cell(&base.doses_12m, None),
        at_36m: cell(&base.doses_36m, None),
    }];
    rows.extend(scenarios.iter().map(|s| ComparisonRow {
        scenario: s.name.clone(),
        at_12m: cell(&s.doses_12m, Some(&base.doses_12m)),
        at_36m: cell(&s.doses_36m, Some(&base.doses_36m)),
    }));
    Ok(ComparisonReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn first_dose_examples() {
        let mut d = vec![0.0; 100];
        d[39] = 5e5;
        assert_eq!(time_to_first_dose(&d), Some(39));
        assert_eq!(time_to_first_dose(&[0.0; 50]), None);
        let mut d = vec![0.0; 100];
        for day in [12, 9, 30] {
            d[day] += 1.0;
        }
        assert_eq!(time_to_first_dose(&d), Some(9));
    }

    #[test]
    fn target_and_horizon_totals() {
        let d = vec![10.0; 1095];
        assert_eq!(time_to_target(&d, 50.0), Some(4));
        assert_eq!(time_to_target(&d, 1e9), None);
        assert_eq!(doses_at(&d, 365), cumulative(&d)[364]);
    }

    #[test]
    fn histogram_loses_nothing() {
        let h = Histogram::new(10.0, [0.0, 9.99, 10.0, 45.0, 45.1]);
        assert_eq!(h.counts, [2, 1, 0, 0, 2]);
        assert_eq!(h.total(), 5);
    }

    fn ensemble(n: usize, seed: u64, f: impl Fn(usize) -> f64) -> Vec<Vec<f64>> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 5.0).unwrap();
        (0..n)
            .map(|_| (0..400).map(|d| f(d) + noise.sample(&mut rng)).collect())
            .collect()
    }

    #[test]
    fn identical_ensembles_have_no_disruption() {
        let base = ensemble(20, 1, |_| 100.0);
        let r = detect_recovery(&base, &base, RecoveryOptions::default()).unwrap();
        assert!(!r.is_disrupted());
        assert!(r.recovered);
    }

    #[test]
    fn six_week_dip_is_six_to_seven_weeks() {
        let base = ensemble(100, 1, |_| 100.0);
        // same noise draws, dip on days 200..242
        let scen: Vec<Vec<f64>> = base
            .iter()
            .map(|s| {
                s.iter()
                    .enumerate()
                    .map(|(d, &x)| if (200..242).contains(&d) { x * 0.5 } else { x })
                    .collect()
            })
            .collect();
        let r = detect_recovery(&base, &scen, RecoveryOptions::default()).unwrap();
        let (start, end) = (r.start.unwrap(), r.end.unwrap());
        assert!((200..=205).contains(&start), "start {start}");
        // window [d-29, d] clears the dip at d = 271
        assert!((265..=272).contains(&end), "end {end}");
        assert!(r.recovered);
        assert!((6..=7).contains(&r.weeks.unwrap()));
    }

    #[test]
    fn chronic_shortfall_is_not_recovered() {
        let base = ensemble(30, 1, |_| 100.0);
        let scen = ensemble(30, 2, |d| if d >= 100 { 80.0 } else { 100.0 });
        let r = detect_recovery(&base, &scen, RecoveryOptions::default()).unwrap();
        assert!(r.is_disrupted());
        assert!(!r.recovered);
        assert_eq!(r.weeks, None);
    }

    #[test]
    fn horizon_mismatch_is_an_error() {
        let a = vec![vec![1.0; 10]; 3];
        let b = vec![vec![1.0; 11]; 3];
        assert_eq!(detect_recovery(&a, &b, RecoveryOptions::default()), Err(RecoveryError::HorizonMismatch));
    }

    #[test]
    fn trailing_mean_matches_direct_average() {
        let xs: Vec<f64> = (0..50).map(|i| f64::from(i * i % 17)).collect();
        let t = trailing_mean(&xs, 30);
        for (d, v) in t.iter().enumerate() {
            let lo = (d + 1).saturating_sub(30);
            let direct: f64 = xs[lo..=d].iter().sum::<f64>() / (d + 1 - lo) as f64;
            assert!((v - direct).abs() < 1e-9);
        }
    }

    fn normal_sample(seed: u64, mu: f64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(mu, 1.0).unwrap();
        (0..100).map(|_| n.sample(&mut rng)).collect()
    }

    #[test]
    fn comparison_against_itself_is_zero() {
        let b = Ensemble {
            name: "base".into(),
            doses_12m: normal_sample(1, 50.0),
            doses_36m: normal_sample(2, 150.0),
        };
        let s = Ensemble { name: "same".into(), ..b.clone() };
        let rep = compare_scenarios(&b, &[s]).unwrap();
        assert_eq!(rep.rows[0].at_36m.delta, None);
        assert_eq!(rep.rows[0].at_36m.p_value, None);
        assert_eq!(rep.rows[1].at_36m.delta_pct, Some(0.0));
        assert_eq!(rep.rows[1].at_12m.delta, Some(0.0));
        assert!(!rep.rows[1].at_36m.significant);
    }

    #[test]
    fn ten_percent_drop_is_significant() {
        let b = Ensemble {
            name: "base".into(),
            doses_12m: normal_sample(1, 100.0),
            doses_36m: normal_sample(2, 100.0),
        };
        let s = Ensemble {
            name: "low".into(),
            doses_12m: normal_sample(3, 90.0),
            doses_36m: normal_sample(4, 90.0),
        };
        let rep = compare_scenarios(&b, core::slice::from_ref(&s)).unwrap();
        let c = &rep.rows[1].at_36m;
        assert!((c.delta_pct.unwrap() + 10.0).abs() < 0.5);
        assert!(c.p_value.unwrap() < 1e-3 && c.significant);

        // swapping roles negates the difference and keeps p
        let swapped = compare_scenarios(&s, &[b]).unwrap();
        let d = &swapped.rows[1].at_36m;
        assert!((d.delta.unwrap() + c.delta.unwrap()).abs() < 1e-9);
        assert!((d.p_value.unwrap() - c.p_value.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn unequal_replication_counts_rejected() {
        let b = Ensemble {
            name: "base".into(),
            doses_12m: vec![1.0, 2.0],
            doses_36m: vec![1.0, 2.0],
        };
        let s = Ensemble {
            name: "s".into(),
            doses_12m: vec![1.0, 2.0, 3.0],
            doses_36m: vec![1.0, 2.0, 3.0],
        };
        assert!(compare_scenarios(&b, &[s]).is_err());
    }

    #[test]
    fn monthly_totals_follow_calendar() {
        let clock = SimClock::default();
        let m = monthly_totals(&vec![1.0; 1095], &clock);
        assert_eq!(m[0], (2025, 4, 30.0));
        assert_eq!(m[1], (2025, 5, 31.0));
        assert_eq!(m.iter().map(|x| x.2).sum::<f64>(), 1095.0);
    }

    #[test]
    fn all_idle_has_no_bottleneck() {
        let r = BottleneckReport::new(vec![
            RankedResource { name: "m".into(), class: ResourceClass::Machine, utilization: 0.0 },
            RankedResource { name: "p".into(), class: ResourceClass::Personnel, utilization: 0.0 },
        ]);
        assert!(r.bottleneck().is_none());
    }
}
