//! One-nearest-neighbor propensity-score matching for the average
//! treatment effect, with bootstrap standard errors.

use super::probit::{probit_fit, ProbitFit};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;
use crate::stats;
use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

/// Draws allowed per replicate before a single-arm resample counts as failed.
const MAX_REDRAWS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsmFit {
    pub ate: f64,
    pub propensity: Vec<f64>,
    pub probit: ProbitFit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsmBootstrap {
    pub ate: f64,
    pub se: f64,
    pub p_value: f64,
    pub replicates: Vec<f64>,
    /// Resamples rejected for containing a single arm.
    pub n_redrawn: usize,
}

/// Nearest opposite-arm unit for each row: smallest `|Δp|`, ties to the
/// lower row index.
fn nearest(p: &[f64], dtilde: &[f64]) -> Vec<usize> {
    let arm = |a: f64| -> Vec<(f64, usize)> {
        let mut v: Vec<(f64, usize)> = (0..p.len()).filter(|&i| dtilde[i] == a).map(|i| (p[i], i)).collect();
        v.sort_unstable_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        v
    };
    let arms = [arm(0.0), arm(1.0)];
    (0..p.len())
        .map(|i| {
            let other = &arms[usize::from(dtilde[i] == 0.0)];
            let q = p[i];
            let pos = other.partition_point(|c| c.0 < q);
            let mut best: Option<(f64, usize)> = None;
            let mut consider = |c: (f64, usize)| {
                let dist = (c.0 - q).abs();
                best = match best {
                    Some((bd, bi)) if bd < dist || (bd == dist && bi < c.1) => Some((bd, bi)),
                    _ => Some((dist, c.1)),
                };
            };
            if pos < other.len() {
                consider(other[pos]);
            }
            if pos > 0 {
                // First row of the run sharing the left neighbor's score.
                let v = other[pos - 1].0;
                let start = other.partition_point(|c| c.0 < v);
                consider(other[start]);
            }
            best.expect("opposite arm is non-empty").1
        })
        .collect()
}

/// ATE by matching every unit, with replacement, to its nearest
/// opposite-arm unit on the propensity score.
pub fn psm_ate(y: &[f64], dtilde: &[f64], p: &[f64]) -> Result<f64> {
    let n = y.len();
    if dtilde.len() != n || p.len() != n {
        return Err(Error::validation("outcome, treatment and scores differ in length"));
    }
    let treated = dtilde.iter().filter(|&&d| d == 1.0).count();
    if treated == 0 || treated == n {
        return Err(Error::estimation("matching needs both treatment arms"));
    }
    if dtilde.iter().any(|&d| d != 0.0 && d != 1.0) {
        return Err(Error::validation("binary treatment must be 0/1"));
    }
    let m = nearest(p, dtilde);
    let total: f64 = (0..n)
        .map(|i| {
            if dtilde[i] == 1.0 {
                y[i] - y[m[i]]
            } else {
                y[m[i]] - y[i]
            }
        })
        .sum();
    Ok(total / n as f64)
}

/// Probit propensity scores on `design`, then matching.
pub fn psm_estimate(design: &Matrix, y: &[f64], dtilde: &[f64]) -> Result<PsmFit> {
    let probit = probit_fit(dtilde, design)?;
    let propensity = probit.predict(design)?;
    let ate = psm_ate(y, dtilde, &propensity)?;
    Ok(PsmFit {
        ate,
        propensity,
        probit,
    })
}

/// Resamples rows with replacement `b` times, refitting the probit and
/// rematching each time. Single-arm resamples are redrawn.
pub fn bootstrap_psm(design: &Matrix, y: &[f64], dtilde: &[f64], b: usize, seed: u64) -> Result<PsmBootstrap> {
    if b < 2 {
        return Err(Error::validation("bootstrap needs at least 2 replicates"));
    }
    let point = psm_estimate(design, y, dtilde)?;
    let n = y.len();
    let reps: Vec<Result<(f64, usize)>> = (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut r = rng::stream(seed, "psm-bootstrap", rep as u64);
            for redraws in 0..MAX_REDRAWS {
                let idx: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
                let dt: Vec<f64> = idx.iter().map(|&i| dtilde[i]).collect();
                let ones = dt.iter().filter(|&&v| v == 1.0).count();
                if ones == 0 || ones == n {
                    continue;
                }
                let yy: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
                let fit = psm_estimate(&design.select_rows(&idx), &yy, &dt)?;
                return Ok((fit.ate, redraws));
            }
            Err(Error::estimation("bootstrap could not draw a resample with both arms"))
        })
        .collect();
    let mut replicates = Vec::with_capacity(b);
    let mut n_redrawn = 0;
    for r in reps {
        let (ate, redraws) = r?;
        replicates.push(ate);
        n_redrawn += redraws;
    }
    let se = stats::sd(&replicates);
    Ok(PsmBootstrap {
        ate: point.ate,
        se,
        p_value: stats::p_value(point.ate, se),
        replicates,
        n_redrawn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_pairs_with_equal_outcomes() {
        let p = [0.2, 0.2, 0.6, 0.6];
        let d = [1.0, 0.0, 1.0, 0.0];
        let y = [1.0, 1.0, 0.0, 0.0];
        assert_eq!(psm_ate(&y, &d, &p).unwrap(), 0.0);
    }

    #[test]
    fn single_pair() {
        assert_eq!(psm_ate(&[1.0, 0.0], &[1.0, 0.0], &[0.5, 0.5]).unwrap(), 1.0);
    }

    #[test]
    fn ties_go_to_the_lower_index() {
        // Treated at 0.5; controls at 0.25 (row 1) and 0.75 (row 2) are equidistant.
        let p = [0.5, 0.25, 0.75, 0.25];
        let d = [1.0, 0.0, 0.0, 0.0];
        let m = nearest(&p, &d);
        assert_eq!(m[0], 1);
        let p = [0.5, 0.75, 0.25, 0.25];
        assert_eq!(nearest(&p, &d)[0], 1);
        // Equal scores: lowest index among them.
        let p = [0.5, 0.75, 0.25, 0.5, 0.5];
        let d = [1.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(nearest(&p, &d)[0], 3);
    }

    proptest! {
        #[test]
        fn shift_of_scores_leaves_ate_unchanged(
            units in proptest::collection::vec((0u32..64, any::<bool>(), 0u8..2), 4..40),
            shift in -8i32..8,
        ) {
            let p: Vec<f64> = units.iter().map(|u| f64::from(u.0) / 64.0).collect();
            let d: Vec<f64> = units.iter().map(|u| f64::from(u8::from(u.1))).collect();
            let y: Vec<f64> = units.iter().map(|u| f64::from(u.2)).collect();
            prop_assume!(d.contains(&1.0) && d.contains(&0.0));
            let c = f64::from(shift) / 8.0;
            let q: Vec<f64> = p.iter().map(|v| v + c).collect();
            prop_assert_eq!(psm_ate(&y, &d, &p).unwrap(), psm_ate(&y, &d, &q).unwrap());
        }

        #[test]
        fn matches_brute_force(units in proptest::collection::vec((0u32..16, any::<bool>(), 0u8..2), 2..30)) {
            let p: Vec<f64> = units.iter().map(|u| f64::from(u.0) / 16.0).collect();
            let d: Vec<f64> = units.iter().map(|u| f64::from(u8::from(u.1))).collect();
            prop_assume!(d.contains(&1.0) && d.contains(&0.0));
            let m = nearest(&p, &d);
            for i in 0..p.len() {
                let mut best = None;
                for j in 0..p.len() {
                    if d[j] != d[i] {
                        let dist = (p[i] - p[j]).abs();
                        if best.is_none_or(|(bd, _)| dist < bd) {
                            best = Some((dist, j));
                        }
                    }
                }
                prop_assert_eq!(m[i], best.unwrap().1);
            }
        }
    }

    fn toy() -> (Matrix, Vec<f64>, Vec<f64>) {
        let x: Vec<f64> = (0..40).map(|i| f64::from(i) / 40.0).collect();
        let d: Vec<f64> = (0..40).map(|i| f64::from(u8::from((i * 7) % 3 == 0))).collect();
        let y: Vec<f64> = (0..40).map(|i| f64::from(u8::from(i % 2 == 0))).collect();
        (
            Matrix::from_columns(vec!["x".into()], vec![x])
                .unwrap()
                .with_intercept(),
            d,
            y,
        )
    }

    #[test]
    fn constant_outcome_has_zero_bootstrap_se() {
        let (m, d, _) = toy();
        let b = bootstrap_psm(&m, &[1.0; 40], &d, 20, 1).unwrap();
        assert_eq!(b.ate, 0.0);
        assert_eq!(b.se, 0.0);
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let (m, d, y) = toy();
        let a = bootstrap_psm(&m, &y, &d, 30, 9).unwrap();
        let b = bootstrap_psm(&m, &y, &d, 30, 9).unwrap();
        assert_eq!(a.se.to_bits(), b.se.to_bits());
        assert!(a.se > 0.0);
        assert!(bootstrap_psm(&m, &y, &d, 1, 9).is_err());
    }
}
