//! Simulation clock and future-event list.
//!
//! Time is continuous, measured in fractional days since the start date.
//! Events are ordered by `(time, seq)` where `seq` is a monotone insertion
//! counter, so equal-time events pop in FIFO order and every replay of the
//! same inputs processes events in the same order.

use alloc::collections::{BTreeSet, BinaryHeap};
use core::cmp::Ordering;

use chrono::NaiveDate;

/// Fractional days since the simulation start date.
pub type Time = f64;

/// Calendar bounds of a run plus the current simulation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimClock {
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    now: Time,
}

impl SimClock {
    pub fn new(start_date: NaiveDate, end_date: NaiveDate) -> Self {
        assert!(end_date > start_date, "end date must follow start date");
        SimClock {
            start_date,
            end_date,
            now: 0.0,
        }
    }

    #[inline]
    pub fn now(&self) -> Time {
        self.now
    }

    /// Length of the run in days (`end_date - start_date`).
    pub fn horizon(&self) -> Time {
        self.horizon_days() as Time
    }

    pub fn horizon_days(&self) -> usize {
        (self.end_date - self.start_date).num_days() as usize
    }

    /// Offset of `date` (at 00:00) from the start date, in days. May be
    /// negative or beyond the horizon; callers validate.
    pub fn day_of(&self, date: NaiveDate) -> i64 {
        (date - self.start_date).num_days()
    }

    pub fn date_of(&self, day: usize) -> NaiveDate {
        self.start_date + chrono::Days::new(day as u64)
    }

    fn advance(&mut self, t: Time) {
        debug_assert!(t >= self.now);
        self.now = t;
    }
}

impl Default for SimClock {
    fn default() -> Self {
        SimClock::new(
            NaiveDate::from_ymd_opt(2025, 4, 1).unwrap(),
            NaiveDate::from_ymd_opt(2028, 3, 31).unwrap(),
        )
    }
}

/// Handle to a scheduled event; doubles as its insertion sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventId(u64);

impl EventId {
    pub fn seq(self) -> u64 {
        self.0
    }
}

/// An event popped from the list.
#[derive(Debug, Clone, PartialEq)]
pub struct Event<E> {
    pub time: Time,
    pub id: EventId,
    pub kind: E,
}

/// Result of [`EventQueue::pop_next`].
#[derive(Debug, Clone, PartialEq)]
pub enum Next<E> {
    Event(Event<E>),
    EndOfHorizon,
}

struct Entry<E> {
    time: Time,
    seq: u64,
    kind: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Future-event list with tombstone cancellation.
pub struct EventQueue<E> {
    heap: BinaryHeap<Entry<E>>,
    cancelled: BTreeSet<u64>,
    next_seq: u64,
    clock: SimClock,
}

impl<E> EventQueue<E> {
    pub fn new(clock: SimClock) -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            cancelled: BTreeSet::new(),
            next_seq: 0,
            clock,
        }
    }

    pub fn clock(&self) -> &SimClock {
        &self.clock
    }

    #[inline]
    pub fn now(&self) -> Time {
        self.clock.now
    }

    /// Number of live (non-cancelled) events.
    pub fn len(&self) -> usize {
        self.heap.len().saturating_sub(self.cancelled.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Insert an event at absolute time `time`.
    ///
    /// Scheduling in the past is a programming error and aborts the
    /// replication.
    pub fn schedule(&mut self, time: Time, kind: E) -> EventId {
        assert!(
            time.is_finite() && time >= self.clock.now,
            "event scheduled in the past: t={} now={}",
            time,
            self.clock.now
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry { time, seq, kind });
        EventId(seq)
    }

    pub fn schedule_in(&mut self, delay: Time, kind: E) -> EventId {
        let at = self.clock.now + delay;
        self.schedule(at, kind)
    }

    /// Mark a pending event void; it is skipped when it reaches the head.
    /// `id` must not have been popped already.
    pub fn cancel(&mut self, id: EventId) {
        if id.0 < self.next_seq {
            self.cancelled.insert(id.0);
        }
    }

    /// Pop the minimal `(time, seq)` event and advance the clock to it.
    ///
    /// Events past the horizon stay in the list; the call then reports
    /// end-of-horizon without moving the clock.
    pub fn pop_next(&mut self) -> Next<E> {
        let horizon = self.clock.horizon();
        loop {
            match self.heap.peek() {
                None => return Next::EndOfHorizon,
                Some(head) if head.time > horizon => return Next::EndOfHorizon,
                Some(_) => {}
            }
            let entry = self.heap.pop().expect("peeked");
            if self.cancelled.remove(&entry.seq) {
                continue;
            }
            self.clock.advance(entry.time);
            return Next::Event(Event {
                time: entry.time,
                id: EventId(entry.seq),
                kind: entry.kind,
            });
        }
    }

    /// Time of the next live event, discarding cancelled heads.
    pub fn peek_time(&mut self) -> Option<Time> {
        while let Some(head) = self.heap.peek() {
            if self.cancelled.contains(&head.seq) {
                let dead = self.heap.pop().expect("peeked");
                self.cancelled.remove(&dead.seq);
                continue;
            }
            return Some(head.time);
        }
        None
    }

    /// Move the clock to the end of the horizon once the run is over.
    pub fn finish(&mut self) {
        let h = self.clock.horizon();
        if self.clock.now < h {
            self.clock.advance(h);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn queue() -> EventQueue<&'static str> {
        EventQueue::new(SimClock::default())
    }

    #[test]
    fn pops_in_time_order() {
        let mut q = queue();
        q.schedule(5.0, "late");
        q.schedule(3.0, "early");
        let Next::Event(a) = q.pop_next() else { panic!() };
        let Next::Event(b) = q.pop_next() else { panic!() };
        assert_eq!((a.time, a.kind), (3.0, "early"));
        assert_eq!((b.time, b.kind), (5.0, "late"));
    }

    #[test]
    fn equal_times_are_fifo() {
        let mut q = queue();
        q.schedule(7.0, "A");
        q.schedule(7.0, "B");
        let Next::Event(a) = q.pop_next() else { panic!() };
        let Next::Event(b) = q.pop_next() else { panic!() };
        assert_eq!([a.kind, b.kind], ["A", "B"]);
    }

    #[test]
    fn empty_list_is_end_of_horizon() {
        let mut q = queue();
        assert_eq!(q.pop_next(), Next::EndOfHorizon);
    }

    #[test]
    fn single_event_advances_clock() {
        let mut q = queue();
        q.schedule(2.5, "x");
        let Next::Event(e) = q.pop_next() else { panic!() };
        assert_eq!(e.kind, "x");
        assert_eq!(q.now(), 2.5);
    }

    #[test]
    fn mixed_ties_follow_sort_order() {
        let mut q = queue();
        q.schedule(1.0, "a");
        q.schedule(1.0, "b");
        q.schedule(0.5, "c");
        let times: Vec<_> = core::iter::from_fn(|| match q.pop_next() {
            Next::Event(e) => Some((e.time, e.kind)),
            Next::EndOfHorizon => None,
        })
        .collect();
        assert_eq!(times, [(0.5, "c"), (1.0, "a"), (1.0, "b")]);
    }

    #[test]
    fn events_past_horizon_are_not_popped() {
        let mut q = queue();
        q.schedule(2000.0, "never");
        assert_eq!(q.pop_next(), Next::EndOfHorizon);
        assert_eq!(q.now(), 0.0);
        q.finish();
        assert_eq!(q.now(), 1095.0);
    }

    #[test]
    fn cancelled_events_are_skipped() {
        let mut q = queue();
        let a = q.schedule(1.0, "a");
        q.schedule(2.0, "b");
        q.cancel(a);
        assert_eq!(q.len(), 1);
        let Next::Event(e) = q.pop_next() else { panic!() };
        assert_eq!(e.kind, "b");
    }

    #[test]
    #[should_panic(expected = "in the past")]
    fn scheduling_in_the_past_faults() {
        let mut q = queue();
        q.schedule(4.0, "a");
        q.pop_next();
        q.schedule(3.0, "b");
    }

    #[test]
    fn default_horizon_is_three_years() {
        let c = SimClock::default();
        assert_eq!(c.horizon_days(), 1095);
        assert_eq!(c.date_of(153), NaiveDate::from_ymd_opt(2025, 9, 1).unwrap());
        assert_eq!(c.day_of(NaiveDate::from_ymd_opt(2025, 9, 1).unwrap()), 153);
    }

    #[test]
    fn ten_thousand_random_events_match_sort_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut q: EventQueue<u32> = EventQueue::new(SimClock::default());
        let mut reference = Vec::new();
        for i in 0..10_000u32 {
            let t = (rng.random::<f64>() * 1000.0).floor() / 4.0;
            let id = q.schedule(t, i);
            reference.push((t, id.seq(), i));
        }
        reference.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let popped: Vec<u32> = core::iter::from_fn(|| match q.pop_next() {
            Next::Event(e) => Some(e.kind),
            Next::EndOfHorizon => None,
        })
        .collect();
        let expected: Vec<u32> = reference.iter().map(|r| r.2).collect();
        assert_eq!(popped, expected);
    }

    proptest! {
        // Interleaved schedule/pop: the processed log equals a reference
        // sort of (time, seq) over everything that was processed.
        #[test]
        fn processing_order_is_sorted(ops in proptest::collection::vec((0.0f64..50.0, any::<bool>()), 1..300)) {
            let mut q: EventQueue<usize> = EventQueue::new(SimClock::default());
            let mut log = Vec::new();
            for (i, (dt, pop)) in ops.iter().enumerate() {
                q.schedule_in(*dt, i);
                if *pop {
                    if let Next::Event(e) = q.pop_next() {
                        log.push((e.time, e.id.seq()));
                    }
                }
            }
            while let Next::Event(e) = q.pop_next() {
                log.push((e.time, e.id.seq()));
            }
            let mut sorted = log.clone();
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            prop_assert_eq!(log, sorted);
        }
    }
}
