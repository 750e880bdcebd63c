//! Summary statistics and the Welch two-sample t-test.

use libm::{exp, fabs, lgamma, log, sqrt};

/// Two-sided 95% normal quantile.
pub const Z_975: f64 = 1.959_963_984_540_054;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Mean with a normal-approximation 95% confidence interval.
pub fn mean_ci95(xs: &[f64]) -> (f64, f64, f64) {
    let m = mean(xs);
    let h = Z_975 * sqrt(variance(xs) / xs.len() as f64);
    (m, m - h, m + h)
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = lgamma(a + b) - lgamma(a) - lgamma(b) + a * log(x) + b * log(1.0 - x);
    // the continued fraction converges fast only below the mean
    if x < (a + 1.0) / (a + b + 2.0) {
        exp(ln_front) * beta_cf(a, b, x) / a
    } else {
        1.0 - exp(ln_front) * beta_cf(b, a, 1.0 - x) / b
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if fabs(d) < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = f64::from(m);
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if fabs(del - 1.0) < EPS {
            break;
        }
    }
    h
}

/// CDF of Student's t with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let tail = 0.5 * inc_beta(df / 2.0, 0.5, df / (df + t * t));
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Welch {
    /// `mean(a) - mean(b)`.
    pub diff: f64,
    pub t: f64,
    pub df: f64,
    pub p_two_sided: f64,
    /// One-sided p for the alternative `mean(a) < mean(b)`.
    pub p_less: f64,
}

/// Welch unequal-variance t-test of `a` against `b`.
///
/// With both variances zero the test degenerates: a nonzero difference is
/// certain (p = 0 on its side) and a zero difference carries no evidence.
pub fn welch(a: &[f64], b: &[f64]) -> Welch {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let diff = mean(a) - mean(b);
    let (va, vb) = (variance(a) / na, variance(b) / nb);
    let se2 = va + vb;
    if se2 == 0.0 {
        let (p_two_sided, p_less) = if diff == 0.0 {
            (1.0, 0.5)
        } else if diff < 0.0 {
            (0.0, 0.0)
        } else {
            (0.0, 1.0)
        };
        return Welch {
            diff,
            t: if diff == 0.0 { 0.0 } else { diff.signum() * f64::INFINITY },
            df: na + nb - 2.0,
            p_two_sided,
            p_less,
        };
    }
    let t = diff / sqrt(se2);
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let p_less = student_t_cdf(t, df);
    let p_two_sided = (2.0 * student_t_cdf(-fabs(t), df)).min(1.0);
    Welch {
        diff,
        t,
        df,
        p_two_sided,
        p_less,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use statrs::distribution::{ContinuousCDF, StudentsT};

    #[test]
    fn t_cdf_matches_reference_implementation() {
        for &df in &[1.0, 2.5, 7.0, 30.0, 197.3] {
            let reference = StudentsT::new(0.0, 1.0, df).unwrap();
            for i in -40..=40 {
                let t = f64::from(i) * 0.25;
                let ours = student_t_cdf(t, df);
                assert!((ours - reference.cdf(t)).abs() < 1e-10, "df={df} t={t}");
            }
        }
    }

    #[test]
    fn inc_beta_edges() {
        assert_eq!(inc_beta(2.0, 3.0, 0.0), 0.0);
        assert_eq!(inc_beta(2.0, 3.0, 1.0), 1.0);
        // I_x(1, 1) = x
        assert!((inc_beta(1.0, 1.0, 0.37) - 0.37).abs() < 1e-14);
    }

    #[test]
    fn welch_separated_normals() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let a: Vec<f64> = (0..100).map(|_| Normal::new(90.0, 1.0).unwrap().sample(&mut rng)).collect();
        let b: Vec<f64> = (0..100).map(|_| Normal::new(100.0, 1.0).unwrap().sample(&mut rng)).collect();
        let w = welch(&a, &b);
        assert!(((w.diff / mean(&b)) + 0.10).abs() < 0.005);
        assert!(w.p_two_sided < 1e-3);
        assert!(w.p_less < 1e-3);
    }

    #[test]
    fn welch_is_antisymmetric() {
        let a = [1.0, 2.0, 4.0, 3.5];
        let b = [2.0, 2.5, 5.0, 6.0, 4.0];
        let ab = welch(&a, &b);
        let ba = welch(&b, &a);
        assert_eq!(ab.diff, -ba.diff);
        assert_eq!(ab.p_two_sided, ba.p_two_sided);
        assert!((ab.p_less + ba.p_less - 1.0).abs() < 1e-12);
    }

    #[test]
    fn welch_against_hand_computed_value() {
        // means 2, 5; variances 1, 1; n = 3 each: t = -3 / sqrt(2/3), df = 4
        let w = welch(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]);
        assert!((w.t + 3.0 / (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((w.df - 4.0).abs() < 1e-12);
        let reference = StudentsT::new(0.0, 1.0, 4.0).unwrap();
        assert!((w.p_two_sided - 2.0 * reference.cdf(w.t)).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_cases() {
        assert_eq!(welch(&[1.0, 1.0], &[1.0, 1.0]).p_less, 0.5);
        assert_eq!(welch(&[0.0, 0.0], &[1.0, 1.0]).p_less, 0.0);
        assert_eq!(welch(&[2.0, 2.0], &[1.0, 1.0]).p_less, 1.0);
    }

    #[test]
    fn ci_contains_mean() {
        let (m, lo, hi) = mean_ci95(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        let h = Z_975 * (variance(&[1.0, 2.0, 3.0, 4.0]) / 4.0).sqrt();
        assert!((hi - m - h).abs() < 1e-12 && (m - lo - h).abs() < 1e-12);
    }
}
