//! Small hand-checkable model configs, shared by unit tests, integration
//! tests and doc examples.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::config::*;
use crate::dist::Distribution;
use crate::plan::{InventoryKind, SamplePoint};

fn c(v: f64) -> Distribution {
    Distribution::constant(v)
}

/// Linear chain with one machine per stage, constant processing times,
/// unbounded buffers, no QA/QC work and no raw materials. Each released
/// batch is worth one dose.
pub fn chain_config(times: &[f64]) -> ModelConfig {
    let n = times.len();
    let inventories = (0..n)
        .map(|k| InventoryConfig {
            id: if k + 1 == n { String::from("final") } else { format!("buf{}", k + 1) },
            capacity: None,
            kind: if k + 1 == n {
                InventoryKind::Final
            } else {
                InventoryKind::Intermediate
            },
        })
        .collect::<Vec<_>>();
    let stages = times
        .iter()
        .enumerate()
        .map(|(k, &t)| StageConfig {
            id: format!("s{}", k + 1),
            machines: vec![format!("m{}", k + 1)],
            input: (k > 0).then(|| inventories[k - 1].id.clone()),
            output: inventories[k].id.clone(),
            processing_time: c(t),
            yield_fraction: c(1.0),
            doses_per_output_batch: (k + 1 == n).then_some(1.0),
            materials: BTreeMap::new(),
            ipc_tests: Vec::new(),
            samples: Vec::new(),
            deviation_prob: 0.0,
            document_review: false,
        })
        .collect();
    ModelConfig {
        simulation: SimulationSection::default(),
        maintenance: Vec::new(),
        inventories,
        stages,
        teams: vec![TeamConfig {
            id: String::from("lab"),
            technicians: 1,
            supervisors: 1,
        }],
        qa: QaConfig {
            reviewers: 1,
            supervisors: 1,
            investigators: 1,
            document_review_time: c(0.0),
            release_review_time: None,
            release_check_time: None,
            investigation_time: c(1.0),
            deviation_investigation_time: None,
            max_retests: 1,
        },
        tests: Vec::new(),
        materials: Vec::new(),
    }
}

/// Adds one QC test on an end-of-stage sample of the last stage.
pub fn with_release_test(mut cfg: ModelConfig, test_time: Distribution, failure_prob: f64) -> ModelConfig {
    cfg.tests.push(TestConfig {
        id: String::from("assay"),
        team: String::from("lab"),
        prep_time: c(0.0),
        test_time,
        check_time: c(0.0),
        supervisory_check_time: None,
        failure_prob,
        prerequisites: Vec::new(),
        ipc: false,
    });
    let last = cfg.stages.last_mut().expect("non-empty chain");
    last.samples.push(SampleConfig {
        at: SamplePoint::End,
        tests: vec![String::from("assay")],
    });
    cfg
}

/// Adds one raw material consumed by the first stage, single supplier.
pub fn with_material(
    mut cfg: ModelConfig,
    initial: f64,
    reorder_point: f64,
    lot_size: f64,
    lead_time: Distribution,
) -> ModelConfig {
    cfg.materials.push(MaterialConfig {
        id: String::from("media"),
        name: Some(String::from("Growth media")),
        initial_stockpile: initial,
        safety_stock: 0.0,
        reorder_point,
        lot_size,
        receipt_qc_time: c(0.0),
        receipt_rejection_prob: 0.0,
        replace_rejected: true,
        suppliers: vec![SupplierConfig {
            id: String::from("acme"),
            split: 1.0,
            lead_time,
            transport_time: c(0.0),
            min_interarrival: 0.0,
        }],
    });
    cfg.stages[0].materials.insert(String::from("media"), 1.0);
    cfg
}
