use std::fs;
use std::path::{Path, PathBuf};

use vaxsim::harness::RunConfig;
use vaxsim::input::{load_config, load_scenario, parse_config, LoadedConfig};
use vaxsim::report::{compare, write_report};
use vaxsim::store::{Store, DATA_FILES, MANIFEST};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn demo() -> LoadedConfig {
    load_config(&configs().join("demo.toml")).unwrap()
}

fn rc(jobs: usize) -> RunConfig {
    RunConfig {
        replications: 4,
        seed: 11,
        jobs,
    }
}

#[test]
fn thread_count_does_not_change_the_store() {
    let cfg = demo();
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("one"), tmp.path().join("four"));
    vaxsim::run_to_store(&cfg, None, rc(1), &a, |_| {}).unwrap();
    vaxsim::run_to_store(&cfg, None, rc(4), &b, |_| {}).unwrap();
    for f in DATA_FILES.iter().chain([&MANIFEST]) {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn store_round_trips_daily_series() {
    let cfg = demo();
    let tmp = tempfile::tempdir().unwrap();
    let results = vaxsim::run_to_store(&cfg, None, rc(0), tmp.path(), |_| {}).unwrap();
    let store = Store::open(tmp.path()).unwrap();
    assert_eq!(store.name(), "base");
    assert_eq!(store.daily.len(), results.len());
    for (row, r) in store.daily.iter().zip(&results) {
        assert_eq!(row, &r.daily_released_doses);
    }
}

#[test]
fn validation_errors_name_the_field() {
    let text = fs::read_to_string(configs().join("demo.toml")).unwrap();
    let broken = text.replacen("failure_prob = 0.01", "failure_prob = 1.5", 1);
    assert_ne!(text, broken);
    let err = parse_config(Path::new("broken.toml"), &broken).unwrap_err();
    let json: serde_json::Value = serde_json::from_str(&err.to_json()).unwrap();
    assert_eq!(json["file"], "broken.toml");
    let errors = json["errors"].as_array().unwrap();
    assert!(!errors.is_empty());
    assert!(err.to_json().contains("failure_prob"), "{}", err.to_json());
}

#[test]
fn every_shipped_overlay_resolves_against_the_demo() {
    let cfg = demo();
    let mut n = 0;
    for entry in fs::read_dir(configs().join("scenarios")).unwrap() {
        let path = entry.unwrap().path();
        load_scenario(&path, &cfg).unwrap_or_else(|e| panic!("{}", e.to_json()));
        n += 1;
    }
    assert_eq!(n, 7);
}

#[test]
fn report_covers_every_store() {
    let cfg = demo();
    let tmp = tempfile::tempdir().unwrap();
    let names = ["empty.toml", "s6_qa_doubling.toml"];
    let mut dirs = vec![tmp.path().join("base")];
    vaxsim::run_to_store(&cfg, None, rc(0), &dirs[0], |_| {}).unwrap();
    for n in names {
        let scen = load_scenario(&configs().join("scenarios").join(n), &cfg).unwrap();
        let dir = tmp.path().join(n);
        vaxsim::run_to_store(&cfg, Some(&scen), rc(0), &dir, |_| {}).unwrap();
        dirs.push(dir);
    }
    let stores: Vec<Store> = dirs.iter().map(|d| Store::open(d).unwrap()).collect();
    let c = compare(&stores[0], &stores[1..]).unwrap();
    assert_eq!(c.recovery.len(), 2);
    let out = tmp.path().join("report");
    write_report(&out, &stores).unwrap();
    let md = fs::read_to_string(out.join("report.md")).unwrap();
    for s in &stores {
        assert!(md.contains(&format!("| {} |", s.name())), "{}", s.name());
    }
    for f in ["bottlenecks.csv", "stockout_table.csv", "comparison.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}
