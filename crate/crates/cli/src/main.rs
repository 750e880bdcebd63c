use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use vaxsim::harness::RunConfig;
use vaxsim::input::{load_config, load_scenario, InputError};
use vaxsim::report::{compare, write_comparison, write_report};
use vaxsim::store::Store;
use vaxsim_core::metrics::ensemble_bottleneck_report;
use vaxsim_core::stats::mean_ci95;

#[derive(Parser)]
#[command(name = "vaxsim", version, about = "Vaccine supply-chain discrete-event simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config and, optionally, scenario overlays against it.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        scenario: Vec<PathBuf>,
    },
    /// Run replications and write a result store.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        replications: u64,
        /// Replication i runs with seed + i.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare scenario stores against a base store.
    Compare {
        #[arg(long)]
        out: PathBuf,
        base: PathBuf,
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
    },
    /// Markdown report and tidy CSVs over one or more stores; the first is the base.
    Report {
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        stores: Vec<PathBuf>,
    },
}

/// Exit status for inputs that fail validation.
const INVALID: u8 = 2;

fn invalid(e: &InputError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(INVALID)
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Command) -> anyhow::Result<ExitCode> {
    match cmd {
        Command::Validate { config, scenario } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => return Ok(invalid(&e)),
            };
            for path in &scenario {
                if let Err(e) = load_scenario(path, &cfg) {
                    return Ok(invalid(&e));
                }
            }
            println!(
                "ok: {} stages, {} machines, {} pools, {} materials, {} overlay(s)",
                cfg.plan.stages.len(),
                cfg.plan.machines.len(),
                cfg.plan.pools.len(),
                cfg.plan.materials.len(),
                scenario.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            config,
            scenario,
            replications,
            seed,
            jobs,
            out,
        } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => return Ok(invalid(&e)),
            };
            let scen = match scenario.as_deref().map(|p| load_scenario(p, &cfg)).transpose() {
                Ok(s) => s,
                Err(e) => return Ok(invalid(&e)),
            };
            let rc = RunConfig {
                replications: replications as usize,
                seed,
                jobs,
            };
            let name = scen.as_ref().map_or("base", |s| s.spec.name.as_str());
            let started = Instant::now();
            let step = (rc.replications / 10).max(1);
            let results = vaxsim::run_to_store(&cfg, scen.as_ref(), rc, &out, |done| {
                if done % step == 0 || done == rc.replications {
                    eprintln!("{name}: {done}/{} replications", rc.replications);
                }
            })?;
            let total: Vec<f64> = results.iter().map(|r| r.kpis.doses_total).collect();
            let first: Vec<f64> = results.iter().filter_map(|r| r.kpis.time_to_first_dose).map(|d| d as f64).collect();
            let (m, lo, hi) = mean_ci95(&total);
            println!("{name}: {} replications in {:.1}s -> {}", results.len(), started.elapsed().as_secs_f64(), out.display());
            println!("  released doses over horizon: {:.2}M [{:.2}M; {:.2}M]", m / 1e6, lo / 1e6, hi / 1e6);
            if !first.is_empty() {
                println!("  first dose: day {:.1} (mean of {} replications)", mean_ci95(&first).0, first.len());
            }
            if let Some(b) = ensemble_bottleneck_report(&results).bottleneck() {
                println!("  bottleneck: {} at {:.1}% utilization", b.name, 100.0 * b.utilization);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { out, base, scenarios } => {
            let base = Store::open(&base)?;
            let scen = scenarios.iter().map(|p| Store::open(p)).collect::<anyhow::Result<Vec<_>>>()?;
            let c = compare(&base, &scen)?;
            write_comparison(&out, &base, &c)?;
            print!("{}", vaxsim::report::comparison_markdown(&base, &c));
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { out, stores } => {
            let stores = stores.iter().map(|p| Store::open(p)).collect::<anyhow::Result<Vec<_>>>()?;
            write_report(&out, &stores)?;
            println!("report written to {}", out.join(vaxsim::report::REPORT_MD).display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
