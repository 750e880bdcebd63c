//! On-disk result store: one directory per run.
//!
//! Every file is a pure function of (config, overlay, seed, replications),
//! so reruns and different `--jobs` values produce identical bytes. Data
//! files never mention the scenario; only `manifest.json` does.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use vaxsim_core::metrics::{
    doses_at, monthly_totals, BatchRecord, Histogram, ReplicationResult, ResourceClass, ResourceSeries,
    LEAD_TIME_BIN_DAYS,
};
use vaxsim_core::plan::{InventoryKind, Plan};
use vaxsim_core::production::DiscardCause;
use vaxsim_core::stats::mean_ci95;

use crate::harness::RunConfig;
use crate::input::{LoadedConfig, LoadedScenario};

pub const MANIFEST: &str = "manifest.json";
pub const REPLICATIONS: &str = "replications.ndjson";
pub const DAILY_DOSES: &str = "daily_doses.csv";
pub const BATCHES: &str = "batches.csv";
pub const KPI: &str = "kpi.csv";
pub const UTILIZATION: &str = "utilization.csv";
pub const UTILIZATION_DAILY: &str = "utilization_daily.csv";
pub const QUEUES: &str = "queues.csv";
pub const QUEUES_DAILY: &str = "queues_daily.csv";
pub const INVENTORY_DAILY: &str = "inventory_daily.csv";
pub const STOCKOUTS: &str = "stockouts.csv";
pub const THROUGHPUT_MONTHLY: &str = "throughput_monthly.csv";
pub const LEAD_TIME_HISTOGRAM: &str = "lead_time_histogram.csv";

/// Data files in write order; the manifest lists exactly these.
pub const DATA_FILES: [&str; 12] = [
    REPLICATIONS,
    DAILY_DOSES,
    BATCHES,
    KPI,
    UTILIZATION,
    UTILIZATION_DAILY,
    QUEUES,
    QUEUES_DAILY,
    INVENTORY_DAILY,
    STOCKOUTS,
    THROUGHPUT_MONTHLY,
    LEAD_TIME_HISTOGRAM,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRef {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRef {
    pub name: String,
    pub description: String,
    pub path: String,
    pub sha256: String,
    pub modifications: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub id: String,
    pub machines: usize,
    pub document_review: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventorySummary {
    pub id: String,
    pub kind: InventoryKind,
    pub capacity: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolSummary {
    pub name: String,
    pub capacity: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialSummary {
    pub id: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub stages: Vec<StageSummary>,
    pub inventories: Vec<InventorySummary>,
    pub pools: Vec<PoolSummary>,
    pub tests: usize,
    pub materials: Vec<MaterialSummary>,
    pub maintenance_windows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: FileRef,
    /// `None` for a base-case run.
    pub scenario: Option<ScenarioRef>,
    pub seed: u64,
    pub seed_rule: String,
    pub replications: usize,
    pub start_date: String,
    pub end_date: String,
    pub horizon_days: usize,
    pub target_doses: f64,
    pub model: ModelSummary,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(cfg: &LoadedConfig, scenario: Option<&LoadedScenario>, rc: RunConfig) -> Self {
        let plan = &cfg.plan;
        Manifest {
            tool: String::from("vaxsim"),
            version: String::from(env!("CARGO_PKG_VERSION")),
            config: FileRef {
                path: cfg.path.display().to_string(),
                sha256: cfg.sha256.clone(),
            },
            scenario: scenario.map(|s| ScenarioRef {
                name: s.spec.name.clone(),
                description: s.spec.description.clone(),
                path: s.path.display().to_string(),
                sha256: s.sha256.clone(),
                modifications: s.spec.modifications.len(),
            }),
            seed: rc.seed,
            seed_rule: String::from("replication i uses seed + i"),
            replications: rc.replications,
            start_date: plan.clock.start_date.to_string(),
            end_date: plan.clock.end_date.to_string(),
            horizon_days: plan.clock.horizon_days(),
            target_doses: plan.target_doses,
            model: summarize(plan, &cfg.params.pool_capacity),
            files: DATA_FILES.iter().map(|f| f.to_string()).collect(),
        }
    }

    pub fn scenario_name(&self) -> &str {
        self.scenario.as_ref().map_or("base", |s| s.name.as_str())
    }
}

fn summarize(plan: &Plan, capacity: &[u32]) -> ModelSummary {
    ModelSummary {
        stages: plan
            .stages
            .iter()
            .map(|s| StageSummary {
                id: s.id.clone(),
                machines: s.machines.len(),
                document_review: s.document_review,
            })
            .collect(),
        inventories: plan
            .inventories
            .iter()
            .map(|i| InventorySummary {
                id: i.id.clone(),
                kind: i.kind,
                capacity: i.capacity,
            })
            .collect(),
        pools: plan
            .pools
            .iter()
            .zip(capacity)
            .map(|(p, &c)| PoolSummary {
                name: p.name.clone(),
                capacity: c,
            })
            .collect(),
        tests: plan.tests.len(),
        materials: plan
            .materials
            .iter()
            .map(|m| MaterialSummary {
                id: m.id.clone(),
                name: m.name.clone(),
            })
            .collect(),
        maintenance_windows: plan.maintenance.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseRow {
    pub replication: usize,
    pub day: usize,
    pub doses: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiRow {
    pub replication: usize,
    pub seed: u64,
    pub time_to_first_dose: Option<usize>,
    pub time_to_target_doses: Option<usize>,
    pub doses_12m: f64,
    pub doses_36m: f64,
    pub mean_monthly_throughput: f64,
    pub released_batches: usize,
    pub discarded_batches: usize,
    pub bottleneck: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilizationRow {
    pub replication: usize,
    pub resource: String,
    pub class: String,
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StockoutRow {
    pub replication: usize,
    pub material: String,
    pub name: String,
    pub stockout_days: usize,
    pub days_per_year: f64,
    pub intervals: usize,
}

#[derive(Serialize)]
struct ReplicationLine<'a> {
    replication: usize,
    seed: u64,
    events: u64,
    digest: String,
    census: &'a vaxsim_core::metrics::Census,
    kpis: &'a vaxsim_core::metrics::KpiSummary,
}

#[derive(Serialize)]
struct BatchRow {
    replication: usize,
    batch: usize,
    created_at: f64,
    released_at: Option<f64>,
    discarded_at: Option<f64>,
    cause: Option<&'static str>,
    lead_time: Option<f64>,
    doses: f64,
    retests: u32,
    investigations: u32,
}

#[derive(Serialize)]
struct DailyMeanRow<'a> {
    series: &'a str,
    class: &'a str,
    day: usize,
    mean: f64,
}

#[derive(Serialize)]
struct QueueRow<'a> {
    replication: usize,
    pool: &'a str,
    mean_length: f64,
    arrivals: u64,
    served: u64,
    mean_wait: f64,
}

#[derive(Serialize)]
struct MonthRow {
    year: i32,
    month: u32,
    mean: f64,
    ci_lo: f64,
    ci_hi: f64,
    cumulative_mean: f64,
}

#[derive(Serialize)]
struct HistogramRow {
    bin_start: f64,
    bin_end: f64,
    count: u64,
}

fn class_name(c: ResourceClass) -> &'static str {
    match c {
        ResourceClass::Machine => "machine",
        ResourceClass::Personnel => "personnel",
    }
}

fn cause_name(c: DiscardCause) -> &'static str {
    match c {
        DiscardCause::FailedRetest => "failed_retest",
        DiscardCause::PowerOutage => "power_outage",
    }
}

fn csv_writer(dir: &Path, name: &str) -> Result<csv::Writer<File>> {
    let path = dir.join(name);
    csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))
}

/// Ensemble mean of one daily series, picked from each replication by `get`.
fn daily_mean<'a>(results: &'a [ReplicationResult], get: impl Fn(&'a ReplicationResult) -> &'a [f64]) -> Vec<f64> {
    let n = results.len() as f64;
    let mut acc = vec![0.0; get(&results[0]).len()];
    for r in results {
        for (a, x) in acc.iter_mut().zip(get(r)) {
            *a += x;
        }
    }
    acc.iter().map(|a| a / n).collect()
}

fn write_daily_means(
    w: &mut csv::Writer<File>,
    results: &[ReplicationResult],
    pick: impl Fn(&ReplicationResult) -> &[ResourceSeries],
) -> Result<()> {
    for (j, s) in pick(&results[0]).iter().enumerate() {
        let means = daily_mean(results, |r| &pick(r)[j].daily);
        for (day, mean) in means.into_iter().enumerate() {
            w.serialize(DailyMeanRow {
                series: &s.name,
                class: class_name(s.class),
                day,
                mean,
            })?;
        }
    }
    Ok(())
}

/// Write a complete store into `dir`, creating it if needed. Existing
/// store files are overwritten.
pub fn write_store(dir: &Path, manifest: &Manifest, plan: &Plan, results: &[ReplicationResult]) -> Result<()> {
    if results.is_empty() {
        bail!("no replications to store");
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;

    let mut f = BufWriter::new(File::create(dir.join(REPLICATIONS))?);
    for (i, r) in results.iter().enumerate() {
        let line = ReplicationLine {
            replication: i,
            seed: r.seed,
            events: r.events,
            digest: format!("{:016x}", r.digest),
            census: &r.census,
            kpis: &r.kpis,
        };
        serde_json::to_writer(&mut f, &line)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;

    let mut w = csv_writer(dir, DAILY_DOSES)?;
    for (i, r) in results.iter().enumerate() {
        for (day, &doses) in r.daily_released_doses.iter().enumerate() {
            w.serialize(DoseRow {
                replication: i,
                day,
                doses,
            })?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(dir, BATCHES)?;
    for (i, r) in results.iter().enumerate() {
        for b in &r.batches {
            w.serialize(batch_row(i, b))?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(dir, KPI)?;
    for (i, r) in results.iter().enumerate() {
        w.serialize(KpiRow {
            replication: i,
            seed: r.seed,
            time_to_first_dose: r.kpis.time_to_first_dose,
            time_to_target_doses: r.kpis.time_to_target_doses,
            doses_12m: doses_at(&r.daily_released_doses, 365),
            doses_36m: r.kpis.doses_total,
            mean_monthly_throughput: r.kpis.mean_monthly_throughput,
            released_batches: r.kpis.released_batches,
            discarded_batches: r.kpis.discarded_batches,
            bottleneck: r.kpis.bottleneck.clone(),
        })?;
    }
    w.flush()?;

    let mut w = csv_writer(dir, UTILIZATION)?;
    for (i, r) in results.iter().enumerate() {
        for s in r.machines.iter().chain(&r.pools) {
            w.serialize(UtilizationRow {
                replication: i,
                resource: s.name.clone(),
                class: class_name(s.class).to_string(),
                utilization: s.utilization,
            })?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(dir, UTILIZATION_DAILY)?;
    write_daily_means(&mut w, results, |r| &r.machines)?;
    write_daily_means(&mut w, results, |r| &r.pools)?;
    w.flush()?;

    let mut w = csv_writer(dir, QUEUES)?;
    for (i, r) in results.iter().enumerate() {
        for q in &r.queues {
            w.serialize(QueueRow {
                replication: i,
                pool: &q.pool,
                mean_length: q.mean_length,
                arrivals: q.arrivals,
                served: q.served,
                mean_wait: q.mean_wait,
            })?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(dir, QUEUES_DAILY)?;
    for (j, q) in results[0].queues.iter().enumerate() {
        for (day, mean) in daily_mean(results, |r| &r.queues[j].daily).into_iter().enumerate() {
            w.serialize(DailyMeanRow {
                series: &q.pool,
                class: "queue_length",
                day,
                mean,
            })?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(dir, INVENTORY_DAILY)?;
    for (j, inv) in results[0].inventories.iter().enumerate() {
        for (day, mean) in daily_mean(results, |r| &r.inventories[j].daily).into_iter().enumerate() {
            w.serialize(DailyMeanRow {
                series: &inv.id,
                class: "batches",
                day,
                mean,
            })?;
        }
    }
    for (j, m) in results[0].materials.iter().enumerate() {
        let means = daily_mean(results, |r| &r.materials[j].daily_batch_equivalents);
        for (day, mean) in means.into_iter().enumerate() {
            w.serialize(DailyMeanRow {
                series: &m.id,
                class: "batch_equivalents",
                day,
                mean,
            })?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(dir, STOCKOUTS)?;
    for (i, r) in results.iter().enumerate() {
        for m in &r.materials {
            w.serialize(StockoutRow {
                replication: i,
                material: m.id.clone(),
                name: m.name.clone(),
                stockout_days: m.stockout_days,
                days_per_year: m.stockout_days_per_year(r.horizon_days),
                intervals: m.stockouts.len(),
            })?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(dir, THROUGHPUT_MONTHLY)?;
    let months: Vec<Vec<(i32, u32, f64)>> = results
        .iter()
        .map(|r| monthly_totals(&r.daily_released_doses, &plan.clock))
        .collect();
    let mut cumulative = 0.0;
    for (k, &(year, month, _)) in months[0].iter().enumerate() {
        let xs: Vec<f64> = months.iter().map(|m| m[k].2).collect();
        let (mean, ci_lo, ci_hi) = mean_ci95(&xs);
        cumulative += mean;
        w.serialize(MonthRow {
            year,
            month,
            mean,
            ci_lo,
            ci_hi,
            cumulative_mean: cumulative,
        })?;
    }
    w.flush()?;

    let mut w = csv_writer(dir, LEAD_TIME_HISTOGRAM)?;
    let hist = Histogram::new(
        LEAD_TIME_BIN_DAYS,
        results.iter().flat_map(|r| r.batches.iter().filter_map(BatchRecord::lead_time)),
    );
    for (k, &count) in hist.counts.iter().enumerate() {
        w.serialize(HistogramRow {
            bin_start: k as f64 * hist.bin_width,
            bin_end: (k + 1) as f64 * hist.bin_width,
            count,
        })?;
    }
    w.flush()?;

    let mut f = BufWriter::new(File::create(dir.join(MANIFEST))?);
    serde_json::to_writer_pretty(&mut f, manifest)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

fn batch_row(replication: usize, b: &BatchRecord) -> BatchRow {
    BatchRow {
        replication,
        batch: b.id,
        created_at: b.created_at,
        released_at: b.released_at,
        discarded_at: b.discarded_at,
        cause: b.cause.map(cause_name),
        lead_time: b.lead_time(),
        doses: b.doses,
        retests: b.retests,
        investigations: b.investigations,
    }
}

/// A store read back for comparison and reporting.
#[derive(Debug, Clone)]
pub struct Store {
    pub dir: PathBuf,
    pub manifest: Manifest,
    /// Daily released doses, one series per replication.
    pub daily: Vec<Vec<f64>>,
}

impl Store {
    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let manifest: Manifest =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let mut daily = vec![vec![0.0; manifest.horizon_days]; manifest.replications];
        for row in read_rows::<DoseRow>(dir, DAILY_DOSES)? {
            let slot = daily
                .get_mut(row.replication)
                .and_then(|d| d.get_mut(row.day))
                .with_context(|| format!("{DAILY_DOSES}: row outside manifest bounds"))?;
            *slot = row.doses;
        }
        Ok(Store {
            dir: dir.to_path_buf(),
            manifest,
            daily,
        })
    }

    pub fn name(&self) -> &str {
        self.manifest.scenario_name()
    }

    pub fn rows<T: serde::de::DeserializeOwned>(&self, file: &str) -> Result<Vec<T>> {
        read_rows(&self.dir, file)
    }
}

fn read_rows<T: serde::de::DeserializeOwned>(dir: &Path, file: &str) -> Result<Vec<T>> {
    let path = dir.join(file);
    let mut r = csv::Reader::from_path(&path).with_context(|| format!("opening {}", path.display()))?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .with_context(|| format!("parsing {}", path.display()))
}
