//! Conventional estimators used as benchmarks: least squares with robust
//! standard errors, probit maximum likelihood, and nearest-neighbor
//! propensity-score matching with bootstrap standard errors.

mod ols;
mod probit;
mod psm;

pub use ols::{ols, OlsFit, WaldTest};
pub use probit::{probit_fit, ProbitFit};
pub use psm::{bootstrap_psm, psm_ate, psm_estimate, PsmBootstrap, PsmFit};

use crate::matrix::Matrix;
use nalgebra::DMatrix;

/// Relative residual norm below which a column counts as a linear
/// combination of earlier columns.
const RANK_TOL: f64 = 1e-10;

pub(crate) fn to_dmatrix(m: &Matrix, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.n_rows(), cols.len(), |i, j| m.get(i, cols[j]))
}

/// Names of the columns not in `keep`, logging them. Constant columns are
/// routine (for example an imputation flag that is never set) and only
/// logged at debug level.
pub(crate) fn dropped_columns(design: &Matrix, keep: &[usize], model: &str) -> Vec<String> {
    let (mut constant, mut collinear) = (Vec::new(), Vec::new());
    for j in (0..design.n_cols()).filter(|j| !keep.contains(j)) {
        let c = design.column(j);
        let name = design.names()[j].clone();
        if c.iter().all(|&v| v == c[0]) {
            constant.push(name);
        } else {
            collinear.push(name);
        }
    }
    if !constant.is_empty() {
        log::debug!("{model} drops constant columns: {}", constant.join(", "));
    }
    if !collinear.is_empty() {
        log::warn!("{model} drops collinear columns: {}", collinear.join(", "));
    }
    (0..design.n_cols())
        .filter(|j| !keep.contains(j))
        .map(|j| design.names()[j].clone())
        .collect()
}

/// Greedy left-to-right selection of linearly independent columns by
/// Gram–Schmidt with reorthogonalization. Later duplicates are dropped.
pub(crate) fn independent_columns(m: &Matrix) -> Vec<usize> {
    let n = m.n_rows();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut keep = Vec::new();
    for j in 0..m.n_cols() {
        let mut v = m.column(j).to_vec();
        let norm0 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm0 == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for q in &basis {
                let dot: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                for i in 0..n {
                    v[i] -= dot * q[i];
                }
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > RANK_TOL * norm0 {
            v.iter_mut().for_each(|a| *a /= norm);
            basis.push(v);
            keep.push(j);
        }
    }
    keep
}
