//! Cross-store comparison and the markdown/CSV report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use vaxsim_core::metrics::{
    compare_scenarios, detect_recovery, doses_at, BottleneckReport, ComparisonCell, ComparisonReport, Ensemble,
    RankedResource, Recovery, RecoveryOptions, ResourceClass,
};
use vaxsim_core::stats::mean;

use crate::store::{self, KpiRow, StockoutRow, Store, UtilizationRow};

pub const COMPARISON_CSV: &str = "comparison.csv";
pub const COMPARISON_MD: &str = "comparison.md";
pub const RECOVERY_CSV: &str = "recovery.csv";
pub const STOCKOUT_TABLE: &str = "stockout_table.csv";
pub const BOTTLENECKS: &str = "bottlenecks.csv";
pub const REPORT_MD: &str = "report.md";

/// Figure-family CSVs gathered from every store, with a scenario column.
const FIGURE_FILES: [&str; 6] = [
    store::THROUGHPUT_MONTHLY,
    store::LEAD_TIME_HISTOGRAM,
    store::UTILIZATION_DAILY,
    store::QUEUES_DAILY,
    store::INVENTORY_DAILY,
    store::KPI,
];

pub fn ensemble(s: &Store) -> Ensemble {
    Ensemble {
        name: s.name().to_string(),
        doses_12m: s.daily.iter().map(|d| doses_at(d, 365)).collect(),
        doses_36m: s.daily.iter().map(|d| d.iter().sum()).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub table: ComparisonReport,
    /// One entry per scenario store, in input order.
    pub recovery: Vec<(String, Recovery)>,
}

fn check_pairing(base: &Store, s: &Store) -> Result<()> {
    let (b, m) = (&base.manifest, &s.manifest);
    if b.seed != m.seed || b.replications != m.replications || b.horizon_days != m.horizon_days {
        bail!(
            "store '{}' is not paired with the base: seeds, replication counts and horizons must match",
            s.dir.display()
        );
    }
    if b.config.sha256 != m.config.sha256 {
        bail!("store '{}' was run from a different config than the base", s.dir.display());
    }
    Ok(())
}

pub fn compare(base: &Store, scenarios: &[Store]) -> Result<Comparison> {
    for s in scenarios {
        check_pairing(base, s)?;
    }
    let ens: Vec<Ensemble> = scenarios.iter().map(ensemble).collect();
    let table = compare_scenarios(&ensemble(base), &ens).map_err(|e| anyhow::anyhow!(e.0))?;
    let recovery = scenarios
        .iter()
        .map(|s| {
            detect_recovery(&base.daily, &s.daily, RecoveryOptions::default())
                .map(|r| (s.name().to_string(), r))
                .map_err(|e| anyhow::anyhow!("{}: {e}", s.name()))
        })
        .collect::<Result<_>>()?;
    Ok(Comparison { table, recovery })
}

#[derive(Serialize)]
struct ComparisonCsvRow<'a> {
    scenario: &'a str,
    doses_12m_mean: f64,
    doses_12m_ci_lo: f64,
    doses_12m_ci_hi: f64,
    doses_12m_delta_pct: Option<f64>,
    doses_12m_p: Option<f64>,
    doses_12m_significant: bool,
    doses_36m_mean: f64,
    doses_36m_ci_lo: f64,
    doses_36m_ci_hi: f64,
    doses_36m_delta_pct: Option<f64>,
    doses_36m_p: Option<f64>,
    doses_36m_significant: bool,
}

#[derive(Serialize)]
struct RecoveryCsvRow<'a> {
    scenario: &'a str,
    disrupted: bool,
    start_day: Option<usize>,
    start_date: Option<String>,
    end_day: Option<usize>,
    end_date: Option<String>,
    recovered: bool,
    weeks: Option<u32>,
}

fn date_of(base: &Store, day: usize) -> Option<String> {
    let start: chrono::NaiveDate = base.manifest.start_date.parse().ok()?;
    Some((start + chrono::Days::new(day as u64)).to_string())
}

pub fn write_comparison(out: &Path, base: &Store, c: &Comparison) -> Result<()> {
    fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join(COMPARISON_CSV))?;
    for row in &c.table.rows {
        let (a, b) = (&row.at_12m, &row.at_36m);
        w.serialize(ComparisonCsvRow {
            scenario: &row.scenario,
            doses_12m_mean: a.mean,
            doses_12m_ci_lo: a.ci_lo,
            doses_12m_ci_hi: a.ci_hi,
            doses_12m_delta_pct: a.delta_pct,
            doses_12m_p: a.p_value,
            doses_12m_significant: a.significant,
            doses_36m_mean: b.mean,
            doses_36m_ci_lo: b.ci_lo,
            doses_36m_ci_hi: b.ci_hi,
            doses_36m_delta_pct: b.delta_pct,
            doses_36m_p: b.p_value,
            doses_36m_significant: b.significant,
        })?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out.join(RECOVERY_CSV))?;
    for (name, r) in &c.recovery {
        w.serialize(RecoveryCsvRow {
            scenario: name,
            disrupted: r.is_disrupted(),
            start_day: r.start,
            start_date: r.start.and_then(|d| date_of(base, d)),
            end_day: r.end,
            end_date: r.end.and_then(|d| date_of(base, d)),
            recovered: r.recovered,
            weeks: r.weeks,
        })?;
    }
    w.flush()?;

    fs::write(out.join(COMPARISON_MD), comparison_markdown(base, c))?;
    Ok(())
}

fn millions(x: f64) -> String {
    format!("{:.1}", x / 1e6)
}

fn md_cell(c: &ComparisonCell) -> [String; 3] {
    let ci = format!("{} [{}; {}]", millions(c.mean), millions(c.ci_lo), millions(c.ci_hi));
    let delta = c.delta_pct.map_or(String::from("-"), |d| format!("{d:+.1}%"));
    let p = match c.p_value {
        None => String::from("-"),
        Some(p) if p < 0.001 => String::from("**<0.001**"),
        Some(p) if c.significant => format!("**{p:.3}**"),
        Some(p) => format!("{p:.3}"),
    };
    [ci, delta, p]
}

fn recovery_text(r: &Recovery) -> String {
    match (r.start, r.weeks) {
        (None, _) => String::from("no significant disruption"),
        (Some(_), Some(w)) => format!("recovered after {w} week(s)"),
        (Some(_), None) => String::from("not recovered"),
    }
}

pub fn comparison_markdown(base: &Store, c: &Comparison) -> String {
    let mut s = String::new();
    let n = base.manifest.replications;
    writeln!(s, "Released doses in millions, mean and 95% CI over {n} paired replications.\n").unwrap();
    writeln!(s, "| Scenario | 12 months | Δ% | p | 36 months | Δ% | p |").unwrap();
    writeln!(s, "|---|---|---|---|---|---|---|").unwrap();
    for row in &c.table.rows {
        let [a1, a2, a3] = md_cell(&row.at_12m);
        let [b1, b2, b3] = md_cell(&row.at_36m);
        writeln!(s, "| {} | {a1} | {a2} | {a3} | {b1} | {b2} | {b3} |", row.scenario).unwrap();
    }
    writeln!(s, "\n| Scenario | Disruption start | Recovery |").unwrap();
    writeln!(s, "|---|---|---|").unwrap();
    for (name, r) in &c.recovery {
        let start = r.start.and_then(|d| date_of(base, d)).unwrap_or_else(|| String::from("-"));
        writeln!(s, "| {name} | {start} | {} |", recovery_text(r)).unwrap();
    }
    s
}

/// Mean utilization per resource, ranked.
pub fn bottlenecks(s: &Store) -> Result<BottleneckReport> {
    let mut acc: BTreeMap<String, (ResourceClass, f64, usize)> = BTreeMap::new();
    for row in s.rows::<UtilizationRow>(store::UTILIZATION)? {
        let class = if row.class == "machine" {
            ResourceClass::Machine
        } else {
            ResourceClass::Personnel
        };
        let e = acc.entry(row.resource).or_insert((class, 0.0, 0));
        e.1 += row.utilization;
        e.2 += 1;
    }
    Ok(BottleneckReport::new(
        acc.into_iter()
            .map(|(name, (class, sum, n))| RankedResource {
                name,
                class,
                utilization: sum / n as f64,
            })
            .collect(),
    ))
}

/// Mean stockout days per year by material id, in store material order.
pub fn stockout_days_per_year(s: &Store) -> Result<Vec<(String, String, f64)>> {
    let rows: Vec<StockoutRow> = s.rows(store::STOCKOUTS)?;
    Ok(s.manifest
        .model
        .materials
        .iter()
        .map(|m| {
            let xs: Vec<f64> = rows.iter().filter(|r| r.material == m.id).map(|r| r.days_per_year).collect();
            (m.id.clone(), m.name.clone(), if xs.is_empty() { 0.0 } else { mean(&xs) })
        })
        .collect())
}

fn write_stockout_table(out: &Path, stores: &[Store]) -> Result<()> {
    let tables: Vec<_> = stores.iter().map(stockout_days_per_year).collect::<Result<_>>()?;
    let mut w = csv::Writer::from_path(out.join(STOCKOUT_TABLE))?;
    let mut header = vec![String::from("material"), String::from("name")];
    header.extend(stores.iter().map(|s| s.name().to_string()));
    w.write_record(&header)?;
    for (k, (id, name, _)) in tables[0].iter().enumerate() {
        let mut rec = vec![id.clone(), name.clone()];
        for t in &tables {
            rec.push(t.get(k).map_or(String::new(), |x| format!("{:.1}", x.2)));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Concatenate one figure CSV across stores, prefixing a scenario column.
fn gather(out: &Path, stores: &[Store], file: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(out.join(file))?;
    for (k, s) in stores.iter().enumerate() {
        let path = s.dir.join(file);
        let mut r = csv::Reader::from_path(&path).with_context(|| format!("opening {}", path.display()))?;
        if k == 0 {
            let mut h = vec!["scenario"];
            h.extend(r.headers()?.iter());
            w.write_record(&h)?;
        }
        for rec in r.records() {
            let rec = rec?;
            let mut row = vec![s.name()];
            row.extend(rec.iter());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn kpi_summary(s: &Store) -> Result<[String; 5]> {
    let rows: Vec<KpiRow> = s.rows(store::KPI)?;
    let avg = |f: &dyn Fn(&KpiRow) -> Option<f64>| {
        let xs: Vec<f64> = rows.iter().filter_map(f).collect();
        (!xs.is_empty()).then(|| (mean(&xs), xs.len()))
    };
    let n = rows.len();
    let days = |v: Option<(f64, usize)>| match v {
        None => String::from("not reached"),
        Some((m, k)) if k == n => format!("{m:.1}"),
        Some((m, k)) => format!("{m:.1} ({k}/{n} reps)"),
    };
    Ok([
        days(avg(&|r| r.time_to_first_dose.map(|d| d as f64))),
        days(avg(&|r| r.time_to_target_doses.map(|d| d as f64))),
        millions(avg(&|r| Some(r.doses_12m)).map_or(0.0, |x| x.0)),
        millions(avg(&|r| Some(r.doses_36m)).map_or(0.0, |x| x.0)),
        millions(avg(&|r| Some(r.mean_monthly_throughput)).map_or(0.0, |x| x.0)),
    ])
}

/// Write `report.md` and the tidy CSVs for `stores`; the first is the base.
pub fn write_report(out: &Path, stores: &[Store]) -> Result<()> {
    let Some(base) = stores.first() else {
        bail!("report needs at least one store");
    };
    fs::create_dir_all(out)?;
    let m = &base.manifest;
    let mut s = String::new();
    writeln!(s, "# Simulation report\n").unwrap();
    writeln!(s, "## Inputs\n").unwrap();
    writeln!(s, "- config: `{}` (sha256 `{}`)", m.config.path, &m.config.sha256[..12]).unwrap();
    writeln!(s, "- horizon: {} to {} ({} days)", m.start_date, m.end_date, m.horizon_days).unwrap();
    writeln!(s, "- replications: {} per scenario, seeds {}..{}", m.replications, m.seed, m.seed + m.replications as u64 - 1).unwrap();
    let machines: usize = m.model.stages.iter().map(|st| st.machines).sum();
    writeln!(s, "- {} stages, {machines} machines, {} inventories, {} QC tests, {} raw materials", m.model.stages.len(), m.model.inventories.len(), m.model.tests, m.model.materials.len()).unwrap();
    let pools: Vec<String> = m.model.pools.iter().map(|p| format!("{} ({})", p.name, p.capacity)).collect();
    writeln!(s, "- personnel pools: {}", pools.join(", ")).unwrap();
    let scen: Vec<String> = stores.iter().map(|st| format!("`{}`", st.name())).collect();
    writeln!(s, "- scenarios: {}\n", scen.join(", ")).unwrap();

    writeln!(s, "## Key performance indicators\n").unwrap();
    writeln!(s, "Means over replications; doses in millions, times in days from start.\n").unwrap();
    writeln!(s, "| Scenario | First dose | Target doses | Doses 12m | Doses 36m | Monthly throughput |").unwrap();
    writeln!(s, "|---|---|---|---|---|---|").unwrap();
    for st in stores {
        let [a, b, c, d, e] = kpi_summary(st)?;
        writeln!(s, "| {} | {a} | {b} | {c} | {d} | {e} |", st.name()).unwrap();
    }

    writeln!(s, "\n## Bottlenecks\n").unwrap();
    let mut bw = csv::Writer::from_path(out.join(BOTTLENECKS))?;
    bw.write_record(["scenario", "rank", "resource", "class", "utilization"])?;
    for st in stores {
        let b = bottlenecks(st)?;
        for (k, r) in b.ranked.iter().enumerate() {
            let class = if r.class == ResourceClass::Machine { "machine" } else { "personnel" };
            bw.write_record([st.name(), &(k + 1).to_string(), &r.name, class, &r.utilization.to_string()])?;
        }
        writeln!(s, "### {}\n", st.name()).unwrap();
        writeln!(s, "| Rank | Resource | Utilization |").unwrap();
        writeln!(s, "|---|---|---|").unwrap();
        for (k, r) in b.ranked.iter().take(8).enumerate() {
            writeln!(s, "| {} | {} | {:.1}% |", k + 1, r.name, 100.0 * r.utilization).unwrap();
        }
        if let Some(mm) = &b.max_machine {
            writeln!(s, "\nBusiest machine: {} at {:.1}%.\n", mm.name, 100.0 * mm.utilization).unwrap();
        }
    }
    bw.flush()?;

    if stores.len() > 1 {
        let c = compare(base, &stores[1..])?;
        write_comparison(out, base, &c)?;
        writeln!(s, "## Scenario comparison\n").unwrap();
        s.push_str(&comparison_markdown(base, &c));
        s.push('\n');
    }

    writeln!(s, "## Raw material stockouts\n").unwrap();
    writeln!(s, "Days per year with a stockout, mean over replications. A dash means none.\n").unwrap();
    let tables: Vec<_> = stores.iter().map(stockout_days_per_year).collect::<Result<_>>()?;
    let head: Vec<&str> = stores.iter().map(Store::name).collect();
    writeln!(s, "| Material | {} |", head.join(" | ")).unwrap();
    writeln!(s, "|---|{}", "---|".repeat(stores.len())).unwrap();
    for (k, (_, name, _)) in tables[0].iter().enumerate() {
        let cells: Vec<String> = tables
            .iter()
            .map(|t| match t.get(k) {
                Some(x) if x.2 > 0.0 => format!("{:.1}", x.2),
                _ => String::from("-"),
            })
            .collect();
        writeln!(s, "| {name} | {} |", cells.join(" | ")).unwrap();
    }
    write_stockout_table(out, stores)?;

    writeln!(s, "\n## Data files\n").unwrap();
    for f in FIGURE_FILES {
        gather(out, stores, f)?;
        writeln!(s, "- `{f}`").unwrap();
    }
    for f in [BOTTLENECKS, STOCKOUT_TABLE] {
        writeln!(s, "- `{f}`").unwrap();
    }
    if stores.len() > 1 {
        for f in [COMPARISON_CSV, RECOVERY_CSV, COMPARISON_MD] {
            writeln!(s, "- `{f}`").unwrap();
        }
    }
    fs::write(out.join(REPORT_MD), s)?;
    Ok(())
}
