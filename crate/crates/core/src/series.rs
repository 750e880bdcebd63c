//! Time-weighted daily accumulation of piecewise-constant signals.

use alloc::vec;
use alloc::vec::Vec;

use crate::engine::Time;

/// Integrates a piecewise-constant signal into one bin per simulated day.
///
/// `bins[d]` holds the integral over `[d, d + 1)`, which is also the daily
/// mean because a bin is one day wide.
#[derive(Debug, Clone)]
pub struct DailyIntegral {
    bins: Vec<f64>,
    last_t: Time,
    value: f64,
    total: f64,
}

impl DailyIntegral {
    pub fn new(days: usize, initial: f64) -> Self {
        DailyIntegral {
            bins: vec![0.0; days],
            last_t: 0.0,
            value: initial,
            total: 0.0,
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// Advance to `t` under the current value, then switch to `value`.
    pub fn set(&mut self, t: Time, value: f64) {
        self.advance(t);
        self.value = value;
    }

    fn advance(&mut self, t: Time) {
        debug_assert!(t >= self.last_t);
        let horizon = self.bins.len() as Time;
        let t = t.min(horizon);
        if t <= self.last_t {
            return;
        }
        let span = t - self.last_t;
        self.total += self.value * span;
        if self.value != 0.0 {
            let mut from = self.last_t;
            while from < t {
                let day = libm::floor(from) as usize;
                let until = t.min(day as Time + 1.0);
                self.bins[day] += self.value * (until - from);
                from = until;
            }
        }
        self.last_t = t;
    }

    /// Close the signal at `t` and return `(per-day integrals, total)`.
    pub fn finish(mut self, t: Time) -> (Vec<f64>, f64) {
        self.advance(t);
        (self.bins, self.total)
    }

    pub fn total_until(&self, t: Time) -> f64 {
        let horizon = self.bins.len() as Time;
        self.total + self.value * (t.min(horizon) - self.last_t).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_intervals_across_days() {
        let mut s = DailyIntegral::new(4, 0.0);
        s.set(0.5, 2.0);
        s.set(2.25, 0.0);
        let (bins, total) = s.finish(4.0);
        assert_eq!(bins, [1.0, 2.0, 0.5, 0.0]);
        assert_eq!(total, 3.5);
    }

    #[test]
    fn clamps_at_horizon() {
        let mut s = DailyIntegral::new(2, 1.0);
        s.set(5.0, 3.0);
        let (bins, total) = s.finish(9.0);
        assert_eq!(bins, [1.0, 1.0]);
        assert_eq!(total, 2.0);
    }
}
