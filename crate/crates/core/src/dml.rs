//! Double machine learning for a binary treatment.
//!
//! Outcome means per arm and the propensity score are cross-fitted with
//! random forests, observations with extreme propensities are trimmed, and
//! the average treatment effect is the mean doubly-robust score
//! `μ̂₁ − μ̂₀ + D̃(y − μ̂₁)/p̂₁ − (1 − D̃)(y − μ̂₀)/(1 − p̂₁)`.

use crate::error::{Error, Result};
use crate::forest::{fit_forest, tune_forest, ForestParams, Task};
use crate::matrix::Matrix;
use crate::rng;
use crate::stats::{self, Histogram};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

/// Propensities are clipped to `[PROPENSITY_FLOOR, 1 − PROPENSITY_FLOOR]`
/// before trimming.
pub const PROPENSITY_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmlParams {
    pub k_folds: usize,
    pub trim_threshold: f64,
    /// Nuisance forest settings; the seed is the master seed for folds and fits.
    pub forest: ForestParams,
    /// Choose `mtry` and `min_node_size` per nuisance and fold by
    /// out-of-bag error before the final fit.
    pub tune: bool,
}

impl DmlParams {
    pub fn new(n_trees: usize, seed: u64) -> Self {
        DmlParams {
            k_folds: 3,
            trim_threshold: 0.01,
            forest: ForestParams {
                min_node_size: Some(5),
                ..ForestParams::with_trees(n_trees, seed)
            },
            tune: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NuisanceEstimates {
    pub mu0: Vec<f64>,
    pub mu1: Vec<f64>,
    pub p1: Vec<f64>,
    pub fold: Vec<usize>,
}

impl NuisanceEstimates {
    pub fn len(&self) -> usize {
        self.p1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p1.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DrAteResult {
    pub ate: f64,
    pub se: f64,
    pub p_value: f64,
    pub n_used: usize,
    pub n_trimmed: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DmlFit {
    pub nuisances: NuisanceEstimates,
    pub kept: Vec<usize>,
    /// Scores of the kept observations, in `kept` order.
    pub scores: Vec<f64>,
    pub result: DrAteResult,
}

fn check_binary(dtilde: &[f64]) -> Result<()> {
    if dtilde.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::validation("binary treatment must be 0/1"));
    }
    Ok(())
}

/// Deterministic fold labels: a seeded shuffle dealt round-robin.
pub fn fold_assignment(n: usize, k_folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, "dml-folds", 0));
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % k_folds;
    }
    fold
}

/// Pilot forests used when tuning nuisances.
const PILOT_TREES: usize = 100;

fn fit_fold_forest(
    x: &Matrix,
    y: &[f64],
    task: Task,
    base: &ForestParams,
    tune: bool,
    tag: &str,
    k: usize,
) -> Result<crate::forest::Forest> {
    let n = y.len();
    let min = base.resolved_min_node_size(task).min(n / 2).max(1);
    let mut params = ForestParams {
        min_node_size: Some(min),
        seed: rng::derive_seed(base.seed, tag, k as u64),
        ..base.clone()
    };
    if tune && n >= 20 {
        params = tune_forest(x, y, task, &params, PILOT_TREES.min(base.n_trees))?.0;
    }
    fit_forest(x, y, task, &params)
}

/// Cross-fits `μ̂₀`, `μ̂₁` (regression forests on each arm) and `p̂₁`
/// (probability forest) so that every row is predicted by models that never
/// saw its fold.
pub fn crossfit_nuisances(
    x: &Matrix,
    y: &[f64],
    dtilde: &[f64],
    k_folds: usize,
    forest: &ForestParams,
    tune: bool,
) -> Result<NuisanceEstimates> {
    let n = x.n_rows();
    if y.len() != n || dtilde.len() != n {
        return Err(Error::validation("outcome, treatment and covariates differ in length"));
    }
    check_binary(dtilde)?;
    if k_folds < 2 || k_folds > n {
        return Err(Error::validation(format!("k_folds must be in [2, {n}], got {k_folds}")));
    }
    let fold = fold_assignment(n, k_folds, forest.seed);
    for k in 0..k_folds {
        let arm_size = |a: f64| (0..n).filter(|&i| fold[i] != k && dtilde[i] == a).count();
        if arm_size(0.0) < 2 || arm_size(1.0) < 2 {
            return Err(Error::estimation(format!(
                "training folds for fold {k} lack two rows of each treatment arm; use fewer folds"
            )));
        }
    }
    let mut mu0 = vec![0.0; n];
    let mut mu1 = vec![0.0; n];
    let mut p1 = vec![0.0; n];
    for k in 0..k_folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold[i] != k).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold[i] == k).collect();
        let treated: Vec<usize> = train.iter().copied().filter(|&i| dtilde[i] == 1.0).collect();
        let control: Vec<usize> = train.iter().copied().filter(|&i| dtilde[i] == 0.0).collect();
        let xt = x.select_rows(&test);
        let pick = |idx: &[usize], v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        let f1 = fit_fold_forest(
            &x.select_rows(&treated),
            &pick(&treated, y),
            Task::Regression,
            forest,
            tune,
            "dml-mu1",
            k,
        )?;
        let f0 = fit_fold_forest(
            &x.select_rows(&control),
            &pick(&control, y),
            Task::Regression,
            forest,
            tune,
            "dml-mu0",
            k,
        )?;
        let fp = fit_fold_forest(
            &x.select_rows(&train),
            &pick(&train, dtilde),
            Task::Classification,
            forest,
            tune,
            "dml-p1",
            k,
        )?;
        let (m1, m0, pp) = (f1.predict(&xt)?, f0.predict(&xt)?, fp.predict(&xt)?);
        for (j, &i) in test.iter().enumerate() {
            mu1[i] = m1[j];
            mu0[i] = m0[j];
            p1[i] = pp[j].clamp(PROPENSITY_FLOOR, 1.0 - PROPENSITY_FLOOR);
        }
    }
    Ok(NuisanceEstimates { mu0, mu1, p1, fold })
}

/// Indices with `threshold ≤ p ≤ 1 − threshold`; both bounds are kept.
pub fn trim(p1: &[f64], threshold: f64) -> Result<Vec<usize>> {
    if !(0.0..0.5).contains(&threshold) {
        return Err(Error::validation("trimming threshold must be in [0, 0.5)"));
    }
    let kept: Vec<usize> = (0..p1.len())
        .filter(|&i| p1[i] >= threshold && 1.0 - p1[i] >= threshold)
        .collect();
    if kept.is_empty() {
        return Err(Error::estimation("trimming removed every observation"));
    }
    Ok(kept)
}

/// Doubly-robust score of one observation.
#[inline]
pub fn dr_score(y: f64, dtilde: f64, mu0: f64, mu1: f64, p1: f64) -> f64 {
    mu1 - mu0 + dtilde * (y - mu1) / p1 - (1.0 - dtilde) * (y - mu0) / (1.0 - p1)
}

/// Mean score with standard error `sd/√n`, treating nuisances as known.
pub fn estimate_ate(scores: &[f64], n_trimmed: usize, threshold: f64) -> Result<DrAteResult> {
    let n = scores.len();
    if n == 0 {
        return Err(Error::estimation("no scores to average"));
    }
    if n < 30 {
        log::warn!("only {n} observations after trimming; normal approximation is unreliable");
    }
    let ate = stats::mean(scores);
    let se = stats::sd(scores) / (n as f64).sqrt();
    Ok(DrAteResult {
        ate,
        se,
        p_value: stats::p_value(ate, se),
        n_used: n,
        n_trimmed,
        threshold,
    })
}

/// Trims and scores with given nuisances.
pub fn ate_from_nuisances(y: &[f64], dtilde: &[f64], nui: NuisanceEstimates, threshold: f64) -> Result<DmlFit> {
    if y.len() != nui.len() || dtilde.len() != nui.len() {
        return Err(Error::validation("nuisances do not align with the data"));
    }
    check_binary(dtilde)?;
    let kept = trim(&nui.p1, threshold)?;
    let scores: Vec<f64> = kept
        .iter()
        .map(|&i| dr_score(y[i], dtilde[i], nui.mu0[i], nui.mu1[i], nui.p1[i]))
        .collect();
    let result = estimate_ate(&scores, y.len() - kept.len(), threshold)?;
    Ok(DmlFit {
        nuisances: nui,
        kept,
        scores,
        result,
    })
}

/// Cross-fits nuisances, trims and estimates the average treatment effect.
pub fn dml_ate(x: &Matrix, y: &[f64], dtilde: &[f64], params: &DmlParams) -> Result<DmlFit> {
    let nui = crossfit_nuisances(x, y, dtilde, params.k_folds, &params.forest, params.tune)?;
    ate_from_nuisances(y, dtilde, nui, params.trim_threshold)
}

/// Propensity histograms on `[0, 1]` for the control and treated arms.
pub fn propensity_histograms(p1: &[f64], dtilde: &[f64], bins: usize) -> (Histogram, Histogram) {
    let arm = |a: f64| -> Vec<f64> {
        p1.iter()
            .zip(dtilde)
            .filter(|(_, &d)| d == a)
            .map(|(&p, _)| p)
            .collect()
    };
    (
        Histogram::with_range(&arm(0.0), bins, 0.0, 1.0),
        Histogram::with_range(&arm(1.0), bins, 0.0, 1.0),
    )
}
