use chrono::NaiveDate;
use proptest::prelude::*;
use vaxsim_core::config::ModelConfig;
use vaxsim_core::dist::Distribution;
use vaxsim_core::plan::Role;
use vaxsim_core::prelude::*;
use vaxsim_core::production::{DiscardCause, MachineState, ReleaseState};
use vaxsim_core::scenario::{ModificationSpec, ParamValue};
use vaxsim_core::testing::{chain_config, with_material, with_release_test};

fn day(n: u64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2025, 4, 1).unwrap() + chrono::Days::new(n)
}

fn set(target: &str, value: ParamValue, start: u64, end: Option<u64>) -> ModificationSpec {
    ModificationSpec {
        target: target.into(),
        value: Some(value),
        factor: None,
        start: day(start),
        end: end.map(day),
        revert: true,
    }
}

fn scale(target: &str, factor: f64, start: u64, end: Option<u64>) -> ModificationSpec {
    ModificationSpec {
        target: target.into(),
        value: None,
        factor: Some(factor),
        start: day(start),
        end: end.map(day),
        revert: true,
    }
}

fn spec(mods: Vec<ModificationSpec>) -> ScenarioSpec {
    ScenarioSpec {
        name: "test".into(),
        description: String::new(),
        modifications: mods,
    }
}

fn busy_line() -> ModelConfig {
    let mut cfg = with_release_test(chain_config(&[1.0, 2.0]), Distribution::triangular(0.5, 1.0, 2.0), 0.1);
    cfg.stages[0].processing_time = Distribution::triangular(0.5, 1.0, 1.5);
    cfg.stages[1].machines.push("m2b".into());
    cfg.teams[0].technicians = 2;
    cfg
}

#[test]
fn empty_overlay_is_bit_identical() {
    let cfg = busy_line();
    let (plan, params) = cfg.compile().unwrap();
    let empty = ScenarioSpec::empty("empty").compile(&plan, &params).unwrap();
    let a = run_replication(&plan, &params, &CompiledScenario::base(), 5);
    let b = run_replication(&plan, &params, &empty, 5);
    assert_eq!(a.digest, b.digest);
    assert_eq!(a.daily_released_doses, b.daily_released_doses);
    assert_eq!(a.batches, b.batches);
}

#[test]
fn reverted_params_equal_baseline() {
    let cfg = with_material(busy_line(), 100.0, 20.0, 50.0, Distribution::constant(5.0));
    let (plan, params) = cfg.compile().unwrap();
    let sc = spec(vec![
        set("machines.m1.state", ParamValue::Text("closed".into()), 10, Some(20)),
        scale("stages.*.time_multiplier", 1.5, 15, Some(40)),
        scale("pools.lab.technician.capacity", 0.5, 5, Some(60)),
        set("tests.assay.failure_prob", ParamValue::Number(0.9), 30, Some(35)),
        scale("qa.investigation_time", 2.0, 1, Some(90)),
        set("materials.media.available", ParamValue::Bool(false), 2, Some(50)),
        set(
            "materials.*.suppliers.*.lead_time",
            ParamValue::Dist(Distribution::constant(30.0)),
            3,
            Some(70),
        ),
    ])
    .compile(&plan, &params)
    .unwrap();
    let mut m = Model::new(&plan, &params, &sc, 3);
    m.run_until(50.5);
    assert_ne!(m.params(), m.baseline());
    m.run_until(100.0);
    assert_eq!(m.params(), m.baseline());
    assert_eq!(m.params(), &params);
}

#[test]
fn overlapping_windows_last_writer_wins() {
    let (plan, params) = busy_line().compile().unwrap();
    let sc = spec(vec![
        set("stages.s1.time_multiplier", ParamValue::Number(2.0), 10, Some(50)),
        set("stages.s1.time_multiplier", ParamValue::Number(3.0), 20, Some(30)),
    ])
    .compile(&plan, &params)
    .unwrap();
    let mut m = Model::new(&plan, &params, &sc, 1);
    for (t, want) in [(5.0, 1.0), (15.0, 2.0), (25.0, 3.0), (35.0, 2.0), (55.0, 1.0)] {
        m.run_until(t);
        assert_eq!(m.params().stages[0].time_multiplier, want, "t={t}");
    }
}

#[test]
fn permanent_change_outlives_its_window() {
    let (plan, params) = busy_line().compile().unwrap();
    let mut keep = set("stages.s2.time_multiplier", ParamValue::Number(2.0), 10, Some(20));
    keep.revert = false;
    let sc = spec(vec![keep]).compile(&plan, &params).unwrap();
    let mut m = Model::new(&plan, &params, &sc, 1);
    m.run_until(500.0);
    assert_eq!(m.params().stages[1].time_multiplier, 2.0);
}

#[test]
fn unresolvable_targets_are_reported() {
    let (plan, params) = busy_line().compile().unwrap();
    let errs = spec(vec![
        set("machines.nope.state", ParamValue::Text("closed".into()), 10, None),
        set("stages.s1.colour", ParamValue::Number(1.0), 10, None),
        set("machines.m1.state", ParamValue::Text("ajar".into()), 10, None),
        set("tests.assay.failure_prob", ParamValue::Number(1.5), 10, None),
        set("stages.s1.time_multiplier", ParamValue::Number(2.0), 5000, None),
    ])
    .compile(&plan, &params)
    .unwrap_err();
    let paths: Vec<&str> = errs.iter().map(|e| e.path.as_str()).collect();
    for p in ["modifications[0].target", "modifications[1].target", "modifications[4].start"] {
        assert!(paths.contains(&p), "{p} missing from {paths:?}");
    }
    assert!(paths.iter().any(|p| p.starts_with("modifications[2]")));
    assert!(paths.iter().any(|p| p.starts_with("modifications[3]")));
}

#[test]
fn pool_factor_floors_to_whole_staff() {
    let mut cfg = busy_line();
    cfg.teams[0].technicians = 3;
    let (plan, params) = cfg.compile().unwrap();
    let sc = spec(vec![scale("pools.lab.technician.capacity", 0.5, 10, Some(20))])
        .compile(&plan, &params)
        .unwrap();
    let pool = plan.technician_pool(0);
    assert_eq!(plan.pools[pool].role, Role::Technician);
    let mut m = Model::new(&plan, &params, &sc, 1);
    m.run_until(15.0);
    assert_eq!(m.params().pool_capacity[pool], 1);
    m.run_until(25.0);
    assert_eq!(m.params().pool_capacity[pool], 3);
}

fn outage(start: u64) -> ModificationSpec {
    ModificationSpec {
        target: "wip.reset".into(),
        value: None,
        factor: None,
        start: day(start),
        end: None,
        revert: true,
    }
}

#[test]
fn wip_reset_on_idle_line_changes_nothing() {
    // every lot of the only material is rejected, so the line never starts
    let mut cfg = with_material(chain_config(&[1.0]), 0.0, 0.0, 1.0, Distribution::constant(1.0));
    cfg.materials[0].receipt_rejection_prob = 1.0;
    let (plan, params) = cfg.compile().unwrap();
    let sc = spec(vec![outage(50)]).compile(&plan, &params).unwrap();
    let a = run_replication(&plan, &params, &CompiledScenario::base(), 1);
    let b = run_replication(&plan, &params, &sc, 1);
    assert_eq!(a.census, b.census);
    assert_eq!(a.batches, b.batches);
    assert_eq!(a.daily_released_doses, b.daily_released_doses);
}

#[test]
fn wip_reset_discards_exactly_the_batches_in_machines() {
    let (plan, params) = busy_line().compile().unwrap();
    let sc = spec(vec![outage(100)]).compile(&plan, &params).unwrap();
    let mut m = Model::new(&plan, &params, &sc, 4);
    m.run_until(100.0 - 1e-9);
    let before = m.census();
    let in_machines = m.floor().machines.iter().filter(|mc| mc.batch().is_some()).count();
    assert!(in_machines > 0);
    m.run_until(100.0 + 1e-9);
    let after = m.census();
    assert!(after.is_conserved());
    let outage = m
        .floor()
        .batches
        .iter()
        .filter(|b| matches!(b.release, ReleaseState::Discarded(_, DiscardCause::PowerOutage)))
        .count();
    assert_eq!(outage, in_machines);
    assert!(after.discarded >= before.discarded + in_machines);
    // the line restarts
    m.run_until(110.0);
    assert!(m.floor().machines.iter().any(|mc| matches!(mc.state, MachineState::Busy { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn any_window_reverts_to_baseline(start in 1u64..400, len in 1u64..300, factor in 0.2f64..4.0, seed in 0u64..1000) {
        let (plan, params) = busy_line().compile().unwrap();
        let sc = spec(vec![
            scale("stages.*.processing_time", factor, start, Some(start + len)),
            scale("pools.*.*.capacity", factor, start, Some(start + len)),
        ])
        .compile(&plan, &params)
        .unwrap();
        let mut m = Model::new(&plan, &params, &sc, seed);
        m.run_until((start + len) as f64 + 1.0);
        prop_assert_eq!(m.params(), &params);
        let c = m.census();
        prop_assert!(c.is_conserved());
    }
}
