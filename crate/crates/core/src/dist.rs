//! Parametric distributions used for every stochastic duration, yield and
//! probability in the model. Parameters are validated when the config is
//! loaded; sampling itself never fails.

use rand::Rng;
use rand_distr::{Bernoulli, Distribution as _, LogNormal, Triangular, Uniform};
use serde::{Deserialize, Serialize};

/// A sampling distribution. Durations are in days.
///
/// `Lognormal` is parameterized by its median and its multiplicative
/// (geometric) standard deviation, so `ln X ~ N(ln median, ln scale)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Distribution {
    Constant { value: f64 },
    Triangular { min: f64, mode: f64, max: f64 },
    Lognormal { median: f64, scale: f64 },
    Uniform { lo: f64, hi: f64 },
    Bernoulli { p: f64 },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DistError {
    #[error("non-finite parameter")]
    NonFinite,
    #[error("min <= mode <= max violated")]
    TriangularOrder,
    #[error("lognormal needs median > 0 and scale >= 1")]
    Lognormal,
    #[error("uniform needs lo <= hi")]
    UniformOrder,
    #[error("probability must lie in [0, 1]")]
    Probability,
}

impl Distribution {
    pub const fn constant(value: f64) -> Self {
        Distribution::Constant { value }
    }

    pub const fn triangular(min: f64, mode: f64, max: f64) -> Self {
        Distribution::Triangular { min, mode, max }
    }

    fn params(&self) -> [f64; 3] {
        match *self {
            Distribution::Constant { value } => [value, value, value],
            Distribution::Triangular { min, mode, max } => [min, mode, max],
            Distribution::Lognormal { median, scale } => [median, scale, median],
            Distribution::Uniform { lo, hi } => [lo, hi, lo],
            Distribution::Bernoulli { p } => [p, p, p],
        }
    }

    pub fn validate(&self) -> Result<(), DistError> {
        if self.params().iter().any(|v| !v.is_finite()) {
            return Err(DistError::NonFinite);
        }
        match *self {
            Distribution::Constant { .. } => Ok(()),
            Distribution::Triangular { min, mode, max } => {
                if min <= mode && mode <= max {
                    Ok(())
                } else {
                    Err(DistError::TriangularOrder)
                }
            }
            Distribution::Lognormal { median, scale } => {
                if median > 0.0 && scale >= 1.0 {
                    Ok(())
                } else {
                    Err(DistError::Lognormal)
                }
            }
            Distribution::Uniform { lo, hi } => {
                if lo <= hi {
                    Ok(())
                } else {
                    Err(DistError::UniformOrder)
                }
            }
            Distribution::Bernoulli { p } => {
                if (0.0..=1.0).contains(&p) {
                    Ok(())
                } else {
                    Err(DistError::Probability)
                }
            }
        }
    }

    /// Draw one value. Parameters must already be valid.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Constant { value } => value,
            Distribution::Triangular { min, mode, max } => Triangular::new(min, max, mode)
                .expect("validated triangular")
                .sample(rng),
            Distribution::Lognormal { median, scale } => {
                LogNormal::new(libm::log(median), libm::log(scale))
                    .expect("validated lognormal")
                    .sample(rng)
            }
            Distribution::Uniform { lo, hi } => Uniform::new_inclusive(lo, hi)
                .expect("validated uniform")
                .sample(rng),
            Distribution::Bernoulli { p } => {
                if Bernoulli::new(p).expect("validated probability").sample(rng) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Constant { value } => value,
            Distribution::Triangular { min, mode, max } => (min + mode + max) / 3.0,
            Distribution::Lognormal { median, scale } => {
                let s = libm::log(scale);
                median * libm::exp(s * s / 2.0)
            }
            Distribution::Uniform { lo, hi } => (lo + hi) / 2.0,
            Distribution::Bernoulli { p } => p,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Distribution::Constant { .. } => 0.0,
            Distribution::Triangular { min: a, mode: c, max: b } => {
                (a * a + b * b + c * c - a * b - a * c - b * c) / 18.0
            }
            Distribution::Lognormal { median, scale } => {
                let s2 = libm::pow(libm::log(scale), 2.0);
                (libm::exp(s2) - 1.0) * median * median * libm::exp(s2)
            }
            Distribution::Uniform { lo, hi } => (hi - lo) * (hi - lo) / 12.0,
            Distribution::Bernoulli { p } => p * (1.0 - p),
        }
    }

    /// Closed support bounds `(lo, hi)`; lognormal is `(0, inf)` exclusive.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Distribution::Constant { value } => (value, value),
            Distribution::Triangular { min, max, .. } => (min, max),
            Distribution::Lognormal { .. } => (0.0, f64::INFINITY),
            Distribution::Uniform { lo, hi } => (lo, hi),
            Distribution::Bernoulli { .. } => (0.0, 1.0),
        }
    }

    /// Same distribution with every value scaled by `k` (> 0).
    pub fn scaled(&self, k: f64) -> Self {
        match *self {
            Distribution::Constant { value } => Distribution::Constant { value: value * k },
            Distribution::Triangular { min, mode, max } => Distribution::Triangular {
                min: min * k,
                mode: mode * k,
                max: max * k,
            },
            Distribution::Lognormal { median, scale } => Distribution::Lognormal {
                median: median * k,
                scale,
            },
            Distribution::Uniform { lo, hi } => Distribution::Uniform {
                lo: lo * k,
                hi: hi * k,
            },
            d @ Distribution::Bernoulli { .. } => d,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn moments(d: Distribution, n: usize, label: &str) -> (f64, f64, f64) {
        let mut rng = RngStream::new(2025, label);
        let (lo, hi) = d.support();
        let (mut sum, mut min, mut max) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..n {
            let x = d.sample(&mut rng);
            assert!(x >= lo && x <= hi, "{x} outside support of {d:?}");
            if let Distribution::Lognormal { .. } = d {
                assert!(x > 0.0);
            }
            sum += x;
            min = min.min(x);
            max = max.max(x);
        }
        (sum / n as f64, min, max)
    }

    #[test]
    fn degenerate_triangular_is_exact() {
        let mut rng = RngStream::new(1, "t");
        for _ in 0..100 {
            assert_eq!(Distribution::triangular(8.0, 8.0, 8.0).sample(&mut rng), 8.0);
        }
    }

    #[test]
    fn table_one_vial_lead_time_stays_in_support() {
        let (_, min, max) = moments(Distribution::triangular(24.0, 32.0, 48.0), 100_000, "vials");
        assert!(min >= 24.0 && max <= 48.0);
    }

    #[test]
    fn every_variant_matches_its_analytic_mean() {
        let cases = [
            Distribution::constant(3.5),
            Distribution::triangular(6.0, 8.0, 12.0),
            Distribution::triangular(0.0, 0.0, 1.0),
            Distribution::Lognormal { median: 2.0, scale: 1.5 },
            Distribution::Uniform { lo: 1.0, hi: 4.0 },
            Distribution::Bernoulli { p: 0.3 },
        ];
        let n = 100_000;
        for (i, d) in cases.iter().enumerate() {
            d.validate().unwrap();
            let (mean, _, _) = moments(*d, n, &alloc::format!("case{i}"));
            let se = libm::sqrt(d.variance() / n as f64);
            assert!(
                (mean - d.mean()).abs() <= 3.0 * se + 1e-12,
                "{d:?}: mean {mean} vs {} (se {se})",
                d.mean()
            );
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert_eq!(
            Distribution::triangular(12.0, 8.0, 6.0).validate(),
            Err(DistError::TriangularOrder)
        );
        assert_eq!(Distribution::Bernoulli { p: 1.2 }.validate(), Err(DistError::Probability));
        assert_eq!(
            Distribution::Lognormal { median: 0.0, scale: 2.0 }.validate(),
            Err(DistError::Lognormal)
        );
        assert_eq!(Distribution::constant(f64::NAN).validate(), Err(DistError::NonFinite));
    }

    #[test]
    fn scaling_preserves_shape() {
        let d = Distribution::triangular(1.0, 2.0, 3.0).scaled(7.0);
        assert_eq!(d, Distribution::triangular(7.0, 14.0, 21.0));
        assert_eq!(d.mean(), 14.0);
    }
}
