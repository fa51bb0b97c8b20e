//! Small numerical helpers shared by the estimators.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

const SQRT_2PI: f64 = 2.506_628_274_631_000_2;

pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / SQRT_2PI
}

pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Upper tail `1 - Φ(z)` without cancellation.
pub fn norm_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

pub fn norm_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(p)
}

/// `ln Φ(z)`, accurate in the far left tail.
pub fn log_norm_cdf(z: f64) -> f64 {
    if z > -30.0 {
        norm_cdf(z).ln()
    } else {
        // Asymptotic series of the Mills ratio.
        let z2 = z * z;
        let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
        -0.5 * z2 - (-z).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + series.ln()
    }
}

/// Inverse Mills ratio `φ(z) / Φ(z)`, accurate in the far left tail.
pub fn inv_mills(z: f64) -> f64 {
    if z > -30.0 {
        norm_pdf(z) / norm_cdf(z)
    } else {
        let z2 = z * z;
        let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
        -z / series
    }
}

/// Two-sided p-value of a z statistic under the standard normal.
pub fn two_sided_p(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    (2.0 * norm_sf(z.abs())).min(1.0)
}

/// Two-sided p-value of `effect / se`; a zero SE gives 0 for a nonzero effect
/// and 1 for a zero effect.
pub fn p_value(effect: f64, se: f64) -> f64 {
    if se > 0.0 {
        two_sided_p(effect / se)
    } else if effect == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Upper-tail probability of a chi-squared statistic.
pub fn chi2_sf(stat: f64, df: f64) -> f64 {
    if stat <= 0.0 {
        return 1.0;
    }
    1.0 - ChiSquared::new(df).expect("df > 0").cdf(stat)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (denominator `n - 1`).
pub fn sd(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Equal-width histogram over `[min, max]` of the data.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(values: &[f64], bins: usize) -> Histogram {
        let bins = bins.max(1);
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        if finite.is_empty() {
            return Histogram {
                edges: vec![0.0; bins + 1],
                counts: vec![0; bins],
            };
        }
        let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Histogram::with_range(&finite, bins, lo, hi)
    }

    /// Equal-width bins over `[lo, hi]`; values outside are clamped into the
    /// end bins and non-finite values are skipped.
    pub fn with_range(values: &[f64], bins: usize, lo: f64, mut hi: f64) -> Histogram {
        let bins = bins.max(1);
        if hi <= lo {
            hi = lo + 1.0;
        }
        let finite = values.iter().copied().filter(|v| v.is_finite());
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|k| lo + width * k as f64).collect();
        let mut counts = vec![0usize; bins];
        for v in finite {
            let k = (((v - lo) / width).max(0.0) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Histogram { edges, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_basics() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((norm_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-12);
        assert!((two_sided_p(1.959_963_984_540_054) - 0.05).abs() < 1e-12);
        assert!((norm_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-9);
    }

    #[test]
    fn left_tail_helpers_are_continuous() {
        for z in [-29.999, -30.0, -30.001] {
            let direct = norm_pdf(z) / norm_cdf(z);
            assert!((inv_mills(z) - direct).abs() / direct < 1e-6);
            assert!((log_norm_cdf(z) - norm_cdf(z).ln()).abs() < 1e-6);
        }
        assert!(log_norm_cdf(-60.0).is_finite());
    }

    #[test]
    fn histogram_counts_sum() {
        let v: Vec<f64> = (0..101).map(|i| i as f64 / 100.0).collect();
        let h = Histogram::new(&v, 30);
        assert_eq!(h.total(), 101);
        assert_eq!(h.edges.len(), 31);
        let c = Histogram::new(&[2.0, 2.0], 5);
        assert_eq!(c.total(), 2);
    }
}
