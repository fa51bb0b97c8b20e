//! Orthogonalized causal forest for a continuous treatment.
//!
//! Outcome and treatment are first residualized on the covariates with
//! out-of-bag predictions from two regression forests. Honest causal trees are
//! then grown on the residuals: each tree splits on one half of its subsample
//! and estimates leaf effects `Σ y·d / Σ d²` on the other half. Trees come in
//! groups that share a subsample, which gives a between-group variance
//! estimate for every conditional effect.
//!
//! The conditional effect at `x` is the forest-weighted residual regression
//! `Σ αᵢ(x) yᵢ dᵢ / Σ αᵢ(x) dᵢ²`, where `αᵢ(x)` is the leaf co-occupancy weight
//! of training row `i`. The average effect is the mean of doubly-robust scores
//! built from out-of-bag conditional effects.

mod tree;

pub use tree::{CausalTree, LeafStats};

use crate::error::{Error, Result};
use crate::forest::{fit_forest, ForestParams, Task};
use crate::matrix::Matrix;
use crate::rng;
use crate::stats;
use rand::seq::{index, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tree::CausalGrower;

/// Variance estimates below this are treated as missing in the scores.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Residual-to-total treatment variance ratio below which common support is
/// reported as doubtful.
pub const WEAK_SUPPORT_RATIO: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalForestParams {
    /// Rounded up to a multiple of `group_size`.
    pub n_trees: usize,
    /// Trees per group sharing one subsample; standard errors need at least 2.
    pub group_size: usize,
    /// Subsample fraction drawn for each group, without replacement.
    pub sample_frac: f64,
    /// Share of each subsample used for choosing splits.
    pub honesty_frac: f64,
    /// `None` means `min(p, ⌈√p⌉ + 20)`.
    pub mtry: Option<usize>,
    /// Minimum split-half rows per child.
    pub min_node_size: usize,
    pub max_depth: Option<usize>,
    /// Trees in each nuisance forest; `None` means `n_trees`.
    pub nuisance_trees: Option<usize>,
    pub seed: u64,
}

impl Default for CausalForestParams {
    fn default() -> Self {
        CausalForestParams {
            n_trees: 1000,
            group_size: 4,
            sample_frac: 0.5,
            honesty_frac: 0.5,
            mtry: None,
            min_node_size: 5,
            max_depth: None,
            nuisance_trees: None,
            seed: 0,
        }
    }
}

impl CausalForestParams {
    pub fn with_trees(n_trees: usize, seed: u64) -> Self {
        CausalForestParams {
            n_trees,
            seed,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::validation("n_trees must be >= 1"));
        }
        if self.group_size == 0 {
            return Err(Error::validation("group_size must be >= 1"));
        }
        if !(self.sample_frac > 0.0 && self.sample_frac <= 1.0) {
            return Err(Error::validation("sample_frac must be in (0, 1]"));
        }
        if !(self.honesty_frac > 0.0 && self.honesty_frac < 1.0) {
            return Err(Error::validation("honesty_frac must be in (0, 1)"));
        }
        Ok(())
    }

    fn nuisance_params(&self, tag: &str) -> ForestParams {
        ForestParams::with_trees(
            self.nuisance_trees.unwrap_or(self.n_trees),
            rng::derive_seed(self.seed, tag, 0),
        )
    }

    fn n_groups(&self) -> usize {
        self.n_trees.div_ceil(self.group_size)
    }
}

/// Out-of-bag residuals of outcome and treatment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residualization {
    /// `Y − m̂_Y(X)`; NaN for uncovered rows.
    pub y_res: Vec<f64>,
    /// `D − m̂_D(X)`; NaN for uncovered rows.
    pub d_res: Vec<f64>,
    pub y_hat: Vec<f64>,
    pub d_hat: Vec<f64>,
    /// Rows with out-of-bag coverage in both nuisance forests.
    pub kept: Vec<usize>,
    pub mean_y_res: f64,
    pub mean_d_res: f64,
    /// Treatment residual variance is under `WEAK_SUPPORT_RATIO` times the treatment variance,
    /// i.e. the treatment is close to a function of the covariates.
    pub weak_support: bool,
}

impl Residualization {
    pub fn n_uncovered(&self) -> usize {
        self.y_res.len() - self.kept.len()
    }

    fn kept_values(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.kept.iter().map(|&i| self.y_res[i]).collect(),
            self.kept.iter().map(|&i| self.d_res[i]).collect(),
        )
    }
}

/// Partials the covariates out of `y` and `d`.
///
/// Residuals are formed on the forests' centered scale, so adding a constant
/// to `y` leaves them unchanged whenever the shifted outcomes are exact.
pub fn residualize(x: &Matrix, y: &[f64], d: &[f64], params: &CausalForestParams) -> Result<Residualization> {
    params.validate()?;
    let n = x.n_rows();
    if y.len() != n || d.len() != n {
        return Err(Error::validation("outcome, treatment and covariates differ in length"));
    }
    let fy = fit_forest(x, y, Task::Regression, &params.nuisance_params("cf-outcome"))?;
    let fd = fit_forest(x, d, Task::Regression, &params.nuisance_params("cf-treatment"))?;
    let oy = fy.oob_predict();
    let od = fd.oob_predict();
    let mut y_res = vec![f64::NAN; n];
    let mut d_res = vec![f64::NAN; n];
    let mut kept = Vec::with_capacity(n);
    for i in 0..n {
        if oy.uncovered[i] || od.uncovered[i] {
            continue;
        }
        y_res[i] = (y[i] - y[0]) - oy.centered[i];
        d_res[i] = (d[i] - d[0]) - od.centered[i];
        kept.push(i);
    }
    if kept.len() < n {
        log::warn!(
            "{} rows lack out-of-bag nuisance predictions and are excluded",
            n - kept.len()
        );
    }
    let yk: Vec<f64> = kept.iter().map(|&i| y_res[i]).collect();
    let dk: Vec<f64> = kept.iter().map(|&i| d_res[i]).collect();
    let var_d = stats::sd(d).powi(2);
    let var_dres = dk.iter().map(|v| v * v).sum::<f64>() / dk.len().max(1) as f64;
    let weak_support = !(var_dres >= WEAK_SUPPORT_RATIO * var_d) || var_d == 0.0;
    if weak_support {
        log::warn!("treatment is nearly determined by the covariates; common support is doubtful");
    }
    Ok(Residualization {
        mean_y_res: stats::mean(&yk),
        mean_d_res: stats::mean(&dk),
        y_res,
        d_res,
        y_hat: oy.values,
        d_hat: od.values,
        kept,
        weak_support,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapeEstimate {
    pub tau: f64,
    pub se: f64,
    pub p_value: f64,
    pub significant_5: bool,
    pub significant_10: bool,
    /// Some coordinate lies outside the training range.
    pub extrapolated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApeEstimate {
    pub theta: f64,
    pub se: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Doubly-robust scores for the rows the forest was trained on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DrScores {
    /// Score per training row; NaN where excluded.
    pub scores: Vec<f64>,
    /// Out-of-bag conditional effect per training row.
    pub tau_oob: Vec<f64>,
    /// Local treatment-residual variance per training row.
    pub v_hat: Vec<f64>,
    /// Training rows (forest-local indices) without a usable score.
    pub excluded: Vec<usize>,
}

impl DrScores {
    pub fn used(&self) -> Vec<f64> {
        self.scores.iter().copied().filter(|v| !v.is_nan()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CausalForest {
    pub params: CausalForestParams,
    pub feature_names: Vec<String>,
    /// Covariates of the training rows.
    pub x: Matrix,
    pub y_res: Vec<f64>,
    pub d_res: Vec<f64>,
    /// Original row index of each training row.
    pub rows: Vec<usize>,
    pub trees: Vec<CausalTree>,
    /// Sorted subsample of each group.
    pub groups: Vec<Vec<u32>>,
    ranges: Vec<(f64, f64)>,
}

/// Grows the honest forest on residuals restricted to `res.kept`.
pub fn fit_causal_forest(x: &Matrix, res: &Residualization, params: &CausalForestParams) -> Result<CausalForest> {
    params.validate()?;
    if x.n_rows() != res.y_res.len() {
        return Err(Error::validation("covariates and residuals differ in length"));
    }
    let xk = x.select_rows(&res.kept);
    let (yk, dk) = res.kept_values();
    fit_on_residuals(xk, yk, dk, res.kept.clone(), params)
}

/// Residualizes and fits in one step.
pub fn fit(x: &Matrix, y: &[f64], d: &[f64], params: &CausalForestParams) -> Result<(Residualization, CausalForest)> {
    let res = residualize(x, y, d, params)?;
    let cf = fit_causal_forest(x, &res, params)?;
    Ok((res, cf))
}

fn fit_on_residuals(
    x: Matrix,
    y_res: Vec<f64>,
    d_res: Vec<f64>,
    rows: Vec<usize>,
    params: &CausalForestParams,
) -> Result<CausalForest> {
    let n = x.n_rows();
    let p = x.n_cols();
    if p == 0 {
        return Err(Error::validation("causal forest needs at least one covariate"));
    }
    if n < 4 {
        return Err(Error::validation(format!("{n} rows are too few for an honest forest")));
    }
    if d_res.iter().all(|&v| v == 0.0) {
        return Err(Error::estimation("treatment residuals have zero variance"));
    }
    let mtry = match params.mtry {
        Some(m) if m == 0 || m > p => return Err(Error::validation(format!("mtry {m} not in [1, {p}]"))),
        Some(m) => m,
        None => p.min((p as f64).sqrt().ceil() as usize + 20),
    };
    let half = ((params.sample_frac * n as f64).round() as usize).clamp(2, n);
    let n_split = ((params.honesty_frac * half as f64).round() as usize).clamp(1, half - 1);
    let n_groups = params.n_groups();
    let groups: Vec<Vec<u32>> = (0..n_groups)
        .map(|g| {
            let mut r = rng::stream(params.seed, "cf-group", g as u64);
            let mut s: Vec<u32> = index::sample(&mut r, n, half).into_iter().map(|i| i as u32).collect();
            s.sort_unstable();
            s
        })
        .collect();
    let keys: Vec<u64> = x.names().iter().map(|s| rng::fnv1a(s.as_bytes())).collect();
    let n_trees = n_groups * params.group_size;
    let trees: Vec<CausalTree> = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let g = t / params.group_size;
            let tree_seed = rng::derive_seed(params.seed, "cf-tree", t as u64);
            let mut r = rng::stream(tree_seed, "honesty", 0);
            let mut members: Vec<usize> = groups[g].iter().map(|&i| i as usize).collect();
            members.shuffle(&mut r);
            let mut split_half = members[..n_split].to_vec();
            let mut estimate_half = members[n_split..].to_vec();
            split_half.sort_unstable();
            estimate_half.sort_unstable();
            let grower = CausalGrower {
                x: &x,
                y: &y_res,
                d: &d_res,
                mtry,
                min_node_size: params.min_node_size,
                max_depth: params.max_depth,
                seed: tree_seed,
                feature_keys: &keys,
            };
            let (nodes, stats, usable) = grower.grow(&split_half, &estimate_half);
            CausalTree {
                nodes,
                stats,
                split_half: split_half.into_iter().map(|i| i as u32).collect(),
                estimate_half: estimate_half.into_iter().map(|i| i as u32).collect(),
                group: g as u32,
                usable,
            }
        })
        .collect();
    let ranges = (0..p)
        .map(|j| {
            let c = x.column(j);
            let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        })
        .collect();
    let mut resolved = params.clone();
    resolved.n_trees = n_trees;
    resolved.mtry = Some(mtry);
    Ok(CausalForest {
        params: resolved,
        feature_names: x.names().to_vec(),
        x,
        y_res,
        d_res,
        rows,
        trees,
        groups,
        ranges,
    })
}

/// Bias-corrected between-group variance, kept positive by a normal prior
/// on the debiasing error.
fn debias(var_between: f64, group_noise: f64, n_groups: f64) -> f64 {
    let initial = var_between - group_noise;
    let initial_se = var_between.max(group_noise) * (2.0 / n_groups).sqrt();
    if !(initial_se > 0.0) {
        return initial.max(0.0);
    }
    let ratio = initial / initial_se;
    let correction = initial_se * stats::norm_pdf(ratio) / stats::norm_cdf(ratio);
    if correction.is_finite() {
        initial + correction
    } else {
        initial.max(0.0)
    }
}

impl CausalForest {
    pub fn n_train(&self) -> usize {
        self.x.n_rows()
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    fn in_group(&self, g: usize, i: usize) -> bool {
        self.groups[g].binary_search(&(i as u32)).is_ok()
    }

    fn extrapolated(&self, row: &[f64]) -> bool {
        row.iter().zip(&self.ranges).any(|(v, (lo, hi))| v < lo || v > hi)
    }

    /// Per-tree leaf averages `(Σ y·d / n, Σ d² / n, group)` for the trees
    /// allowed by `exclude`.
    fn leaf_terms(&self, row: &[f64], exclude: Option<usize>) -> Vec<(f64, f64, usize)> {
        let mut out = Vec::with_capacity(self.trees.len());
        for (g, chunk) in self.trees.chunks(self.params.group_size).enumerate() {
            if let Some(i) = exclude {
                if self.in_group(g, i) {
                    continue;
                }
            }
            for t in chunk.iter().filter(|t| t.usable) {
                let s = t.stats[t.leaf_of_slice(row)];
                let n = f64::from(s.n);
                out.push((s.syd / n, s.sdd / n, g));
            }
        }
        out
    }

    fn estimate_from_terms(&self, terms: &[(f64, f64, usize)], extrapolated: bool) -> CapeEstimate {
        let nan = CapeEstimate {
            tau: f64::NAN,
            se: f64::NAN,
            p_value: f64::NAN,
            significant_5: false,
            significant_10: false,
            extrapolated,
        };
        if terms.is_empty() {
            return nan;
        }
        let (mut num, mut den) = (0.0, 0.0);
        for &(a, b, _) in terms {
            num += a;
            den += b;
        }
        if !(den > 0.0) {
            return nan;
        }
        let tau = num / den;
        let se = self.grouped_se(terms, tau, den / terms.len() as f64);
        let p_value = stats::p_value(tau, se);
        CapeEstimate {
            tau,
            se,
            p_value,
            significant_5: p_value < 0.05,
            significant_10: p_value < 0.10,
            extrapolated,
        }
    }

    fn grouped_se(&self, terms: &[(f64, f64, usize)], tau: f64, mean_dd: f64) -> f64 {
        let mut group_means = Vec::new();
        let (mut sum_sq, mut count) = (0.0, 0usize);
        let mut k = 0;
        while k < terms.len() {
            let g = terms[k].2;
            let mut end = k;
            while end < terms.len() && terms[end].2 == g {
                end += 1;
            }
            if end - k == self.params.group_size {
                let psi: Vec<f64> = terms[k..end].iter().map(|&(a, b, _)| a - tau * b).collect();
                group_means.push(psi.iter().sum::<f64>() / psi.len() as f64);
                sum_sq += psi.iter().map(|v| v * v).sum::<f64>();
                count += psi.len();
            }
            k = end;
        }
        let n_groups = group_means.len();
        if n_groups < 2 || self.params.group_size < 2 {
            return f64::NAN;
        }
        let psi_bar = group_means.iter().sum::<f64>() / n_groups as f64;
        let var_total = sum_sq / count as f64 - psi_bar * psi_bar;
        let var_between = group_means.iter().map(|m| m * m).sum::<f64>() / n_groups as f64 - psi_bar * psi_bar;
        let group_noise = (var_total - var_between) / (self.params.group_size - 1) as f64;
        let var = debias(var_between, group_noise, n_groups as f64);
        var.max(0.0).sqrt() / mean_dd
    }

    fn check_row(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.feature_names.len() {
            return Err(Error::validation(format!(
                "row has {} values, forest expects {}",
                row.len(),
                self.feature_names.len()
            )));
        }
        Ok(())
    }

    /// Conditional effect at one covariate row using all trees.
    pub fn estimate_cape(&self, row: &[f64]) -> Result<CapeEstimate> {
        self.check_row(row)?;
        Ok(self.estimate_from_terms(&self.leaf_terms(row, None), self.extrapolated(row)))
    }

    /// Conditional effects at every row of `x`, whose columns must match the
    /// training columns.
    pub fn predict_cape(&self, x: &Matrix) -> Result<Vec<CapeEstimate>> {
        if x.names() != self.feature_names.as_slice() {
            return Err(Error::validation("prediction columns do not match training columns"));
        }
        Ok((0..x.n_rows())
            .into_par_iter()
            .map(|i| {
                let row = x.row(i);
                self.estimate_from_terms(&self.leaf_terms(&row, None), self.extrapolated(&row))
            })
            .collect())
    }

    /// Conditional effect at each training row from the groups whose
    /// subsample excludes that row.
    pub fn oob_cape(&self) -> Vec<CapeEstimate> {
        (0..self.n_train())
            .into_par_iter()
            .map(|i| self.estimate_from_terms(&self.leaf_terms(&self.x.row(i), Some(i)), false))
            .collect()
    }

    /// Forest weights `αᵢ(x)` over training rows; they are nonnegative and
    /// sum to one. `exclude` drops the groups containing that training row.
    pub fn weights(&self, row: &[f64], exclude: Option<usize>) -> Result<Vec<f64>> {
        self.check_row(row)?;
        let mut alpha = vec![0.0; self.n_train()];
        let mut used = 0usize;
        for (g, chunk) in self.trees.chunks(self.params.group_size).enumerate() {
            if exclude.is_some_and(|i| self.in_group(g, i)) {
                continue;
            }
            for t in chunk.iter().filter(|t| t.usable) {
                let leaf = t.leaf_of_slice(row);
                let members: Vec<usize> = t
                    .estimate_half
                    .iter()
                    .map(|&i| i as usize)
                    .filter(|&i| t.leaf_of_row(&self.x, i) == leaf)
                    .collect();
                let w = 1.0 / members.len() as f64;
                for i in members {
                    alpha[i] += w;
                }
                used += 1;
            }
        }
        if used == 0 {
            return Err(Error::estimation("no usable trees for this row"));
        }
        for a in &mut alpha {
            *a /= used as f64;
        }
        Ok(alpha)
    }

    /// Every tree's split and estimation halves are disjoint and lie inside
    /// its group's subsample.
    pub fn is_honest(&self) -> bool {
        self.trees.iter().all(|t| {
            let g = &self.groups[t.group as usize];
            let disjoint = t.split_half.iter().all(|i| t.estimate_half.binary_search(i).is_err());
            let inside = t
                .split_half
                .iter()
                .chain(&t.estimate_half)
                .all(|i| g.binary_search(i).is_ok());
            disjoint && inside
        })
    }

    /// Continuous-treatment doubly-robust scores
    /// `Γᵢ = τ̂₋ᵢ + dᵢ (yᵢ − τ̂₋ᵢ dᵢ) / V̂ᵢ`, with `V̂` an out-of-bag
    /// regression forest of squared treatment residuals on the covariates.
    pub fn doubly_robust_scores(&self) -> Result<DrScores> {
        let n = self.n_train();
        let dd: Vec<f64> = self.d_res.iter().map(|d| d * d).collect();
        let vf = fit_forest(
            &self.x,
            &dd,
            Task::Regression,
            &self.params.nuisance_params("cf-variance"),
        )?;
        let vo = vf.oob_predict();
        let tau: Vec<f64> = self.oob_cape().into_iter().map(|c| c.tau).collect();
        let mut scores = vec![f64::NAN; n];
        let mut excluded = Vec::new();
        for i in 0..n {
            let v = vo.values[i];
            if vo.uncovered[i] || !(v >= VARIANCE_FLOOR) || !tau[i].is_finite() {
                excluded.push(i);
                continue;
            }
            scores[i] = tau[i] + self.d_res[i] * (self.y_res[i] - tau[i] * self.d_res[i]) / v;
        }
        if !excluded.is_empty() {
            log::warn!("{} rows have no usable doubly-robust score", excluded.len());
        }
        Ok(DrScores {
            scores,
            tau_oob: tau,
            v_hat: vo.values,
            excluded,
        })
    }

    /// Average partial effect: the mean doubly-robust score with standard
    /// error `sd/√n`.
    pub fn estimate_ape(&self) -> Result<ApeEstimate> {
        ape_from_scores(&self.doubly_robust_scores()?)
    }
}

pub fn ape_from_scores(scores: &DrScores) -> Result<ApeEstimate> {
    let used = scores.used();
    let n = used.len();
    if n < 2 {
        return Err(Error::estimation("fewer than two usable scores"));
    }
    if n < 30 {
        log::warn!("only {n} scores; normal approximation is unreliable");
    }
    let theta = stats::mean(&used);
    let se = stats::sd(&used) / (n as f64).sqrt();
    Ok(ApeEstimate {
        theta,
        se,
        p_value: stats::p_value(theta, se),
        n,
    })
}
