//! Raw-material procurement: continuous-review reorder point with
//! lot-quantized order-up-to, multi-supplier splits, receipt QC with
//! rejection, consumption at dispatch, and stockout accounting.

use alloc::vec;
use alloc::vec::Vec;

use serde::Serialize;

use crate::engine::Time;
use crate::plan::*;
use crate::production::BoolDraw;
use crate::sim::{EventKind, Model};

pub type PoId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PoState {
    /// Waiting for the supplier's minimum interarrival gap.
    Deferred,
    InLeadTime,
    /// Lead time elapsed while the material was unavailable.
    OnHold,
    InTransit,
    InReceiptQc,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PurchaseOrder {
    pub id: PoId,
    pub material: MaterialIdx,
    pub supplier: usize,
    pub qty: f64,
    pub created_at: Time,
    pub placed_at: Option<Time>,
    pub closed_at: Option<Time>,
    pub state: PoState,
}

#[derive(Debug, Clone, Default)]
pub struct MaterialState {
    pub on_hand: f64,
    pub on_order: f64,
    pub consumed: f64,
    pub received: f64,
    /// Earliest time each supplier may receive the next order.
    pub next_slot: Vec<Time>,
    pub held: Vec<PoId>,
    pub stockout_open: Option<Time>,
    pub stockouts: Vec<(Time, Time)>,
}

#[derive(Debug, Clone, Default)]
pub struct Warehouse {
    pub materials: Vec<MaterialState>,
    pub orders: Vec<PurchaseOrder>,
}

impl Warehouse {
    pub fn new(plan: &Plan) -> Self {
        Warehouse {
            materials: plan
                .materials
                .iter()
                .map(|m| MaterialState {
                    on_hand: m.initial_stockpile,
                    next_slot: vec![0.0; m.suppliers.len()],
                    ..MaterialState::default()
                })
                .collect(),
            orders: Vec::new(),
        }
    }
}

/// Number of lots that lifts `position` strictly above `reorder_point +
/// safety_stock`, or zero when no reorder is due.
pub fn lots_to_order(position: f64, reorder_point: f64, safety_stock: f64, lot_size: f64) -> u64 {
    if position > reorder_point {
        return 0;
    }
    let need = reorder_point + safety_stock - position;
    libm::floor(need / lot_size) as u64 + 1
}

/// Split whole lots across suppliers by largest remainder; ties go to the
/// earlier supplier.
pub fn split_lots(lots: u64, splits: &[f64]) -> Vec<u64> {
    let quotas: Vec<f64> = splits.iter().map(|s| s * lots as f64).collect();
    let mut out: Vec<u64> = quotas.iter().map(|q| libm::floor(*q + 1e-9) as u64).collect();
    let mut left = lots.saturating_sub(out.iter().sum());
    let mut order: Vec<usize> = (0..splits.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - out[a] as f64;
        let rb = quotas[b] - out[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        out[i] += 1;
        left -= 1;
    }
    out
}

impl Model {
    /// Continuous review: reorder when the inventory position (on hand plus
    /// on order) is at or below the reorder point.
    pub(crate) fn review_and_reorder(&mut self, m: MaterialIdx) -> Vec<PoId> {
        let mp = &self.plan.materials[m];
        let st = &self.warehouse.materials[m];
        let lots = lots_to_order(st.on_hand + st.on_order, mp.reorder_point, mp.safety_stock, mp.lot_size);
        if lots == 0 {
            return Vec::new();
        }
        let splits: Vec<f64> = mp.suppliers.iter().map(|s| s.split).collect();
        let lot = mp.lot_size;
        let mut placed = Vec::new();
        for (s, n) in split_lots(lots, &splits).into_iter().enumerate() {
            if n > 0 {
                placed.push(self.place_order(m, s, n as f64 * lot, true));
            }
        }
        placed
    }

    fn place_order(&mut self, m: MaterialIdx, s: usize, qty: f64, pace: bool) -> PoId {
        let now = self.now();
        let id = self.warehouse.orders.len();
        let min_gap = self.plan.materials[m].suppliers[s].min_interarrival;
        let st = &mut self.warehouse.materials[m];
        st.on_order += qty;
        let at = if pace { st.next_slot[s].max(now) } else { now };
        st.next_slot[s] = at + min_gap;
        self.warehouse.orders.push(PurchaseOrder {
            id,
            material: m,
            supplier: s,
            qty,
            created_at: now,
            placed_at: None,
            closed_at: None,
            state: PoState::Deferred,
        });
        if at > now {
            self.queue.schedule(at, EventKind::OrderPlaced { po: id });
        } else {
            self.start_lead_time(id);
        }
        id
    }

    pub(crate) fn start_lead_time(&mut self, po: PoId) {
        let now = self.now();
        let o = &mut self.warehouse.orders[po];
        o.state = PoState::InLeadTime;
        o.placed_at = Some(now);
        let (m, s) = (o.material, o.supplier);
        let d = self.params.materials[m].suppliers[s]
            .lead_time
            .sample(&mut self.streams.supplier[m][s]);
        self.queue.schedule_in(d, EventKind::LeadTimeDone { po });
    }

    pub(crate) fn lead_time_done(&mut self, po: PoId) {
        let m = self.warehouse.orders[po].material;
        if self.params.materials[m].available {
            self.ship(po);
        } else {
            self.warehouse.orders[po].state = PoState::OnHold;
            self.warehouse.materials[m].held.push(po);
        }
    }

    fn ship(&mut self, po: PoId) {
        let o = &mut self.warehouse.orders[po];
        o.state = PoState::InTransit;
        let (m, s) = (o.material, o.supplier);
        let d = self.params.materials[m].suppliers[s]
            .transport_time
            .sample(&mut self.streams.supplier[m][s]);
        self.queue.schedule_in(d, EventKind::OrderArrived { po });
    }

    /// Availability restored: held orders ship in placement order.
    pub(crate) fn release_held(&mut self, m: MaterialIdx) {
        if !self.params.materials[m].available {
            return;
        }
        let held = core::mem::take(&mut self.warehouse.materials[m].held);
        for po in held {
            self.ship(po);
        }
    }

    pub(crate) fn order_arrived(&mut self, po: PoId) {
        self.warehouse.orders[po].state = PoState::InReceiptQc;
        let m = self.warehouse.orders[po].material;
        let d = self.params.materials[m]
            .receipt_qc_time
            .sample(&mut self.streams.receipt[m]);
        self.queue.schedule_in(d, EventKind::ReceiptQcDone { po });
    }

    pub(crate) fn receipt_qc_done(&mut self, po: PoId) {
        let now = self.now();
        let (m, s, qty) = {
            let o = &self.warehouse.orders[po];
            (o.material, o.supplier, o.qty)
        };
        let p = self.params.materials[m].receipt_rejection_prob;
        let rejected = self.streams.receipt[m].random_bool_p(p);
        let o = &mut self.warehouse.orders[po];
        o.closed_at = Some(now);
        let st = &mut self.warehouse.materials[m];
        st.on_order -= qty;
        if rejected {
            o.state = PoState::Rejected;
            if self.plan.materials[m].replace_rejected {
                self.place_order(m, s, qty, false);
            }
        } else {
            o.state = PoState::Accepted;
            st.on_hand += qty;
            st.received += qty;
            self.rec.material_level[m].set(now, st.on_hand);
            self.close_stockout(m, now);
            let consumers: Vec<StageIdx> = self.plan.materials[m].consumers.iter().map(|c| c.0).collect();
            self.dirty.extend(consumers);
        }
        self.review_and_reorder(m);
    }

    /// Withdraw a checked quantity at dispatch.
    pub(crate) fn consume(&mut self, m: MaterialIdx, qty: f64) {
        let now = self.now();
        let st = &mut self.warehouse.materials[m];
        debug_assert!(st.on_hand >= qty, "consumption without stock");
        st.on_hand -= qty;
        st.consumed += qty;
        self.rec.material_level[m].set(now, st.on_hand);
        self.review_and_reorder(m);
    }

    pub(crate) fn open_stockout(&mut self, m: MaterialIdx, now: Time) {
        let st = &mut self.warehouse.materials[m];
        if st.stockout_open.is_none() {
            st.stockout_open = Some(now);
        }
    }

    fn close_stockout(&mut self, m: MaterialIdx, now: Time) {
        let st = &mut self.warehouse.materials[m];
        if let Some(start) = st.stockout_open.take() {
            st.stockouts.push((start, now));
        }
    }

    pub(crate) fn close_stockouts(&mut self, end: Time) {
        for m in 0..self.warehouse.materials.len() {
            self.close_stockout(m, end);
        }
    }

    pub fn warehouse(&self) -> &Warehouse {
        &self.warehouse
    }
}

/// Distinct calendar days touched by any interval, within `days`.
pub fn stockout_days(intervals: &[(Time, Time)], days: usize) -> usize {
    let mut hit = vec![false; days];
    for &(a, b) in intervals {
        let first = libm::floor(a).max(0.0) as usize;
        // an interval ending exactly at midnight does not touch that day
        let last = (libm::ceil(b) as usize).max(first + 1).min(days);
        for h in hit.iter_mut().take(last).skip(first) {
            *h = true;
        }
    }
    hit.iter().filter(|&&h| h).count()
}
