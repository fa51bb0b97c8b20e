//! Least squares with HC1 heteroskedasticity-robust covariance.

use super::{independent_columns, to_dmatrix};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::stats;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OlsFit {
    /// Names of the retained columns, in design order.
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub se: Vec<f64>,
    pub p_values: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Columns removed as linear combinations of earlier columns.
    pub dropped: Vec<String>,
    pub n: usize,
    /// Robust covariance of the retained coefficients, row-major.
    pub covariance: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaldTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Least squares of `y` on `design` (which should carry its own intercept).
/// Rank-deficient columns are dropped with a warning.
pub fn ols(y: &[f64], design: &Matrix) -> Result<OlsFit> {
    let n = design.n_rows();
    if y.len() != n {
        return Err(Error::validation(format!("{} outcomes for {n} design rows", y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("outcome contains non-finite values"));
    }
    let keep = independent_columns(design);
    let dropped = super::dropped_columns(design, &keep, "ols");
    let k = keep.len();
    if k == 0 {
        return Err(Error::estimation("design has no usable columns"));
    }
    if n <= k {
        return Err(Error::estimation(format!("{n} observations for {k} coefficients")));
    }
    let x = to_dmatrix(design, &keep);
    let yv = DVector::from_column_slice(y);
    let qr = x.clone().qr();
    let (q, r) = (qr.q(), qr.r());
    let beta = r
        .solve_upper_triangular(&(q.transpose() * &yv))
        .ok_or_else(|| Error::estimation("singular design after rank screening"))?;
    let resid = &yv - &x * &beta;
    let r_inv = r
        .try_inverse()
        .ok_or_else(|| Error::estimation("singular design after rank screening"))?;
    // Q' diag(e²) Q
    let mut meat = DMatrix::<f64>::zeros(k, k);
    for i in 0..n {
        let e2 = resid[i] * resid[i];
        if e2 == 0.0 {
            continue;
        }
        let qi = q.row(i);
        meat += e2 * qi.transpose() * qi;
    }
    let scale = n as f64 / (n - k) as f64;
    let cov = scale * &r_inv * meat * r_inv.transpose();
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let se: Vec<f64> = (0..k).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();
    let p_values = coefficients
        .iter()
        .zip(&se)
        .map(|(b, s)| stats::p_value(*b, *s))
        .collect();
    Ok(OlsFit {
        names: keep.iter().map(|&j| design.names()[j].clone()).collect(),
        coefficients,
        se,
        p_values,
        residuals: resid.iter().copied().collect(),
        dropped,
        n,
        covariance: (0..k).map(|i| (0..k).map(|j| cov[(i, j)]).collect()).collect(),
    })
}

impl OlsFit {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn coef(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|j| self.coefficients[j])
    }

    /// Robust Wald test that the named coefficients are jointly zero. A
    /// single coefficient gives the squared robust t statistic.
    pub fn wald(&self, names: &[&str]) -> Result<WaldTest> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.index_of(n)
                    .ok_or_else(|| Error::validation(format!("no coefficient {n}")))
            })
            .collect::<Result<_>>()?;
        let m = idx.len();
        if m == 0 {
            return Err(Error::validation("wald test needs at least one coefficient"));
        }
        let b = DVector::from_iterator(m, idx.iter().map(|&j| self.coefficients[j]));
        let v = DMatrix::from_fn(m, m, |a, c| self.covariance[idx[a]][idx[c]]);
        let statistic = match v.clone().cholesky() {
            Some(ch) => (b.transpose() * ch.solve(&b))[(0, 0)],
            None => {
                if b.iter().all(|&x| x == 0.0) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        };
        let p_value = if m == 1 {
            let t = self.coefficients[idx[0]] / self.se[idx[0]];
            if t.is_finite() {
                stats::two_sided_p(t)
            } else {
                stats::p_value(self.coefficients[idx[0]], self.se[idx[0]])
            }
        } else {
            stats::chi2_sf(statistic, m as f64)
        };
        Ok(WaldTest {
            statistic,
            df: m,
            p_value,
        })
    }
}
