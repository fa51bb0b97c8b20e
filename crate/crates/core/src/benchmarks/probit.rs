//! Probit maximum likelihood by Newton–Raphson with step halving.

use super::{independent_columns, to_dmatrix};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::stats;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

const MAX_ITER: usize = 100;
const MAX_HALVINGS: usize = 60;
const GRAD_TOL: f64 = 1e-8;
const LL_TOL: f64 = 1e-10;
/// Linear-index magnitude beyond which coefficients are treated as diverging.
const SEPARATION_BOUND: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbitFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Log-likelihood at the start and after every accepted step.
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Coefficients diverged, indicating (quasi-)complete separation.
    pub separation: bool,
    pub dropped: Vec<String>,
    /// Largest absolute score component at the returned coefficients.
    pub max_gradient: f64,
    keep: Vec<usize>,
}

fn loglik(x: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>) -> f64 {
    let z = x * beta;
    y.iter()
        .zip(z.iter())
        .map(|(&yi, &zi)| {
            if yi == 1.0 {
                stats::log_norm_cdf(zi)
            } else {
                stats::log_norm_cdf(-zi)
            }
        })
        .sum()
}

fn gradient_hessian(x: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let k = x.ncols();
    let z = x * beta;
    let mut g = DVector::zeros(k);
    let mut h = DMatrix::zeros(k, k);
    for i in 0..x.nrows() {
        let q = if y[i] == 1.0 { 1.0 } else { -1.0 };
        let zi = z[i];
        let lambda = q * stats::inv_mills(q * zi);
        let w = lambda * (lambda + zi);
        let xi = x.row(i);
        g += lambda * xi.transpose();
        h -= w * xi.transpose() * xi;
    }
    (g, h)
}

/// Fits `P(D̃ = 1 | x) = Φ(x'β)`. Perfect separation is flagged and the last
/// bounded iterate returned.
pub fn probit_fit(dtilde: &[f64], design: &Matrix) -> Result<ProbitFit> {
    let n = design.n_rows();
    if dtilde.len() != n {
        return Err(Error::validation(format!(
            "{} outcomes for {n} design rows",
            dtilde.len()
        )));
    }
    if dtilde.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::validation("probit outcome must be 0/1"));
    }
    let ones = dtilde.iter().filter(|&&v| v == 1.0).count();
    if ones == 0 || ones == n {
        return Err(Error::estimation("probit needs both outcome classes"));
    }
    let keep = independent_columns(design);
    let dropped = super::dropped_columns(design, &keep, "probit");
    let x = to_dmatrix(design, &keep);
    let k = keep.len();
    let mut beta = DVector::zeros(k);
    let mut ll = loglik(&x, dtilde, &beta);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut separation = false;
    let mut iterations = 0;
    let (mut g, mut h) = gradient_hessian(&x, dtilde, &beta);
    while iterations < MAX_ITER {
        if g.amax() < GRAD_TOL {
            converged = true;
            break;
        }
        let neg_h = -&h;
        let step = match neg_h.clone().cholesky() {
            Some(ch) => ch.solve(&g),
            None => match neg_h.lu().solve(&g) {
                Some(s) => s,
                None => break,
            },
        };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand = &beta + t * &step;
            let cand_ll = loglik(&x, dtilde, &cand);
            if cand_ll >= ll {
                accepted = Some((cand, cand_ll));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, cand_ll)) = accepted else {
            break;
        };
        iterations += 1;
        let z_max = (&x * &cand).amax();
        if z_max > SEPARATION_BOUND {
            separation = true;
            break;
        }
        let gain = cand_ll - ll;
        beta = cand;
        ll = cand_ll;
        trace.push(ll);
        (g, h) = gradient_hessian(&x, dtilde, &beta);
        if g.amax() < GRAD_TOL || gain.abs() < LL_TOL {
            converged = !separation;
            break;
        }
    }
    if separation {
        log::warn!("probit coefficients diverge; the classes are (nearly) separable");
    } else if !converged {
        log::warn!("probit did not converge in {MAX_ITER} iterations");
    }
    Ok(ProbitFit {
        names: keep.iter().map(|&j| design.names()[j].clone()).collect(),
        coefficients: beta.iter().copied().collect(),
        loglik_trace: trace,
        converged,
        iterations,
        separation,
        dropped,
        max_gradient: g.amax(),
        keep,
    })
}

impl ProbitFit {
    pub fn loglik(&self) -> f64 {
        *self.loglik_trace.last().expect("trace starts non-empty")
    }

    /// `Φ(x'β)` for each row of a design with the same columns as the fit.
    pub fn predict(&self, design: &Matrix) -> Result<Vec<f64>> {
        if self.keep.iter().any(|&j| j >= design.n_cols()) {
            return Err(Error::validation("design has fewer columns than the fitted probit"));
        }
        let x = to_dmatrix(design, &self.keep);
        let b = DVector::from_column_slice(&self.coefficients);
        Ok((x * b).iter().map(|&z| stats::norm_cdf(z)).collect())
    }
}
