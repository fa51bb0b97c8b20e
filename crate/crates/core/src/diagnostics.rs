//! Testable implications of the identification strategy and
//! effect-heterogeneity regressions.
//!
//! Monotonicity of selection implies that the share of additional trips
//! rises with the discount; it is tested with a causal forest, a linear
//! regression and a binary-contrast double machine learning estimate.
//! Conditional independence of discount and personal characteristics among
//! always buyers is tested with one robust Wald test per characteristic.
//! None of the tests is adjusted for multiple testing.

use crate::benchmarks::{ols, OlsFit};
use crate::causal_forest::{self, CausalForestParams};
use crate::data::Dataset;
use crate::dml::{dml_ate, DmlParams};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::report::ResultRecord;
use crate::stats::Histogram;
use serde::Serialize;

/// Printed under every table of test results.
pub const MULTIPLICITY_NOTE: &str = "p-values are not adjusted for multiple testing";

/// Printed under the conditional-change histogram.
pub const CONDITIONAL_SE_NOTE: &str =
    "conditional-change standard errors come from the between-group variance of grouped causal trees";

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityParams {
    pub cf: CausalForestParams,
    pub dml: DmlParams,
    pub bins: usize,
}

impl MonotonicityParams {
    pub fn new(n_trees: usize, seed: u64) -> Self {
        MonotonicityParams {
            cf: CausalForestParams::with_trees(n_trees, crate::rng::derive_seed(seed, "monotonicity-cf", 0)),
            dml: DmlParams::new(n_trees, crate::rng::derive_seed(seed, "monotonicity-dml", 0)),
            bins: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub cf: ResultRecord,
    pub lr: ResultRecord,
    pub dml: ResultRecord,
    /// Out-of-bag conditional changes of the additional-trip share.
    pub conditional_changes: Vec<f64>,
    pub share_positive: f64,
    pub share_significant_10: f64,
    pub share_significant_5: f64,
    #[serde(skip)]
    pub histogram: Histogram,
    /// Some method gives a significantly negative estimate at 5%.
    pub violation: bool,
}

impl MonotonicityReport {
    pub fn records(&self) -> Vec<ResultRecord> {
        vec![self.cf.clone(), self.lr.clone(), self.dml.clone()]
    }

    pub fn n_evaluated(&self) -> usize {
        self.conditional_changes.len()
    }
}

fn d_on_x_design(d: &[f64], x: &Matrix) -> Matrix {
    let mut m = Matrix::from_columns(vec!["d_discount".into()], vec![d.to_vec()]).expect("one column");
    m = m.hstack(x).expect("same rows");
    m.with_intercept()
}

fn ols_record(method: &str, fit: &OlsFit, name: &str) -> Result<ResultRecord> {
    let j = fit
        .index_of(name)
        .ok_or_else(|| Error::estimation(format!("{name} was dropped from the regression")))?;
    Ok(ResultRecord::new(
        method,
        fit.coefficients[j],
        fit.se[j],
        fit.p_values[j],
        fit.n,
    ))
}

/// Runs the three monotonicity tests on the full survey sample with
/// `1 − S(0)` as outcome and the demand covariates as controls.
pub fn monotonicity_tests(full: &Dataset, params: &MonotonicityParams) -> Result<MonotonicityReport> {
    let a = full.additional_trip();
    if a.iter().all(|&v| v == a[0]) {
        return Err(Error::estimation(
            "1 − S(0) is constant; the monotonicity test is undefined",
        ));
    }
    let x = full.x_matrix();
    let d = full.d();

    let (_, cf) = causal_forest::fit(&x, &a, &d, &params.cf)?;
    let ape = cf.estimate_ape()?;
    let oob = cf.oob_cape();
    let finite: Vec<_> = oob.iter().filter(|c| c.tau.is_finite()).collect();
    let m = finite.len().max(1) as f64;
    let conditional_changes: Vec<f64> = finite.iter().map(|c| c.tau).collect();
    let share_positive = finite.iter().filter(|c| c.tau > 0.0).count() as f64 / m;
    let share_significant_10 = finite.iter().filter(|c| c.significant_10).count() as f64 / m;
    let share_significant_5 = finite.iter().filter(|c| c.significant_5).count() as f64 / m;
    let histogram = Histogram::new(&conditional_changes, params.bins);
    let cf_rec = ResultRecord::new("cf_average_change", ape.theta, ape.se, ape.p_value, ape.n);

    let fit = ols(&a, &d_on_x_design(&d, &x))?;
    let lr_rec = ols_record("lr_coefficient", &fit, "d_discount")?;

    let dml = dml_ate(&x, &a, &full.dtilde(), &params.dml)?;
    let mut dml_rec = ResultRecord::new(
        "dml_contrast",
        dml.result.ate,
        dml.result.se,
        dml.result.p_value,
        dml.result.n_used,
    );
    dml_rec.n_trimmed = dml.result.n_trimmed;
    dml_rec.threshold = Some(dml.result.threshold);

    let violation = [&cf_rec, &lr_rec, &dml_rec].iter().any(|r| r.negative_at(0.05));
    Ok(MonotonicityReport {
        cf: cf_rec,
        lr: lr_rec,
        dml: dml_rec,
        conditional_changes,
        share_positive,
        share_significant_10,
        share_significant_5,
        histogram,
        violation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaldRow {
    /// A W column, or the source name of a one-hot block.
    pub variable: String,
    /// Coefficient of a single tested column; NaN for joint tests.
    pub coefficient: f64,
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaldIndependenceTable {
    pub rows: Vec<WaldRow>,
    pub average_p_value: f64,
    pub n_significant_5: usize,
}

impl WaldIndependenceTable {
    pub fn tested(&self) -> impl Iterator<Item = &WaldRow> {
        self.rows.iter().filter(|r| !r.p_value.is_nan())
    }
}

/// For each personal characteristic (or one-hot block) regresses the
/// discount on X plus that characteristic and tests its coefficients.
pub fn independence_wald(always_buyers: &Dataset) -> Result<WaldIndependenceTable> {
    if always_buyers.w_columns.is_empty() {
        return Err(Error::validation("no personal covariates to test"));
    }
    let d = always_buyers.d();
    let x = always_buyers.x_matrix();
    let w = always_buyers.w_matrix();
    let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
    for (j, c) in always_buyers.w_columns.iter().enumerate() {
        match groups.iter_mut().find(|(g, _)| *g == c.group) {
            Some((_, cols)) => cols.push(j),
            None => groups.push((c.group.clone(), vec![j])),
        }
    }
    let mut rows = Vec::with_capacity(groups.len());
    for (group, cols) in groups {
        let design = x.hstack(&w.select_columns(&cols))?.with_intercept();
        let fit = ols(&d, &design)?;
        let names: Vec<&str> = cols
            .iter()
            .map(|&j| always_buyers.w_columns[j].name.as_str())
            .filter(|n| fit.index_of(n).is_some())
            .collect();
        if names.is_empty() {
            rows.push(WaldRow {
                variable: group,
                coefficient: f64::NAN,
                statistic: f64::NAN,
                df: 0,
                p_value: f64::NAN,
                note: "collinear with X; skipped".into(),
            });
            continue;
        }
        let test = fit.wald(&names)?;
        let note = if names.len() < cols.len() {
            format!("{} collinear level(s) dropped", cols.len() - names.len())
        } else {
            String::new()
        };
        rows.push(WaldRow {
            variable: group,
            coefficient: if names.len() == 1 {
                fit.coef(names[0]).unwrap_or(f64::NAN)
            } else {
                f64::NAN
            },
            statistic: test.statistic,
            df: test.df,
            p_value: test.p_value,
            note,
        });
    }
    let tested: Vec<f64> = rows.iter().map(|r| r.p_value).filter(|p| !p.is_nan()).collect();
    let average_p_value = if tested.is_empty() {
        f64::NAN
    } else {
        tested.iter().sum::<f64>() / tested.len() as f64
    };
    let n_significant_5 = tested.iter().filter(|&&p| p < 0.05).count();
    Ok(WaldIndependenceTable {
        rows,
        average_p_value,
        n_significant_5,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlpReport {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub se: Vec<f64>,
    pub p_values: Vec<f64>,
    pub dropped: Vec<String>,
}

impl BlpReport {
    pub fn records(&self, prefix: &str, n: usize) -> Vec<ResultRecord> {
        (0..self.names.len())
            .map(|j| {
                ResultRecord::new(
                    format!("{prefix}:{}", self.names[j]),
                    self.coefficients[j],
                    self.se[j],
                    self.p_values[j],
                    n,
                )
            })
            .collect()
    }
}

/// Best linear predictor of effect heterogeneity: robust regression of
/// doubly-robust scores on a basis that includes an intercept.
pub fn blp_heterogeneity(scores: &[f64], basis: &Matrix) -> Result<BlpReport> {
    let has_intercept = (0..basis.n_cols()).any(|j| {
        let c = basis.column(j);
        !c.is_empty() && c[0] != 0.0 && c.iter().all(|&v| v == c[0])
    });
    if !has_intercept {
        return Err(Error::validation("basis must include an intercept column"));
    }
    let fit = ols(scores, basis)?;
    Ok(BlpReport {
        names: fit.names,
        coefficients: fit.coefficients,
        se: fit.se,
        p_values: fit.p_values,
        dropped: fit.dropped,
    })
}
