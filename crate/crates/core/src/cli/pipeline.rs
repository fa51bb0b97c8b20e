//! Analysis pipelines behind the commands: effect estimation on always
//! buyers, predictive outcome analysis and effect heterogeneity.

use crate::benchmarks::{bootstrap_psm, ols};
use crate::causal_forest::{self, CausalForest, CausalForestParams, DrScores};
use crate::data::{balance_binary_outcome, train_test_split, Dataset, Outcome};
use crate::diagnostics::{blp_heterogeneity, BlpReport};
use crate::dml::{dml_ate, propensity_histograms, DmlParams};
use crate::error::{Error, Result};
use crate::forest::{classification_accuracy, fit_forest, variable_importance, ForestParams, ImportanceTable, Task};
use crate::matrix::Matrix;
use crate::report::ResultRecord;
use crate::rng::derive_seed;
use crate::stats::Histogram;

/// Predictors dropped when predicting upselling.
pub const UPSELLING_EXCLUDED: &[&str] = &["class", "seat_capacity", "seat capacity"];

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateParams {
    pub n_trees: usize,
    pub k_folds: usize,
    pub trim: f64,
    pub bootstrap: usize,
    pub tune: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    /// One row per method, in the order cf_ape, dml_ate, ols, psm.
    pub records: Vec<ResultRecord>,
    /// Method name and message for each estimator that failed.
    pub failures: Vec<(String, String)>,
    /// Propensity histograms by discount arm (treated, control), when DML ran.
    pub propensity: Option<(Histogram, Histogram)>,
    pub n: usize,
}

fn run<T>(method: &str, failures: &mut Vec<(String, String)>, f: impl FnOnce() -> Result<T>) -> Option<T> {
    match f() {
        Ok(v) => Some(v),
        Err(e) => {
            log::warn!("{method} failed: {e}");
            failures.push((method.to_string(), e.to_string()));
            None
        }
    }
}

/// X and W followed by an intercept, as used by the linear benchmarks.
fn controls_with_intercept(ds: &Dataset) -> Matrix {
    ds.xw_matrix().with_intercept()
}

/// Runs the causal forest, double machine learning, OLS and matching
/// estimators on an always-buyer sample with X and W as controls. Failing
/// estimators are reported without stopping the others.
pub fn estimate_effects(ab: &Dataset, params: &EstimateParams) -> Result<EstimateReport> {
    if ab.is_empty() {
        return Err(Error::validation("the sample has no always buyers"));
    }
    let xw = ab.xw_matrix();
    let y = ab.y();
    let d = ab.d();
    let dtilde = ab.dtilde();
    let mut failures = Vec::new();
    let mut records = Vec::new();

    let cf = run("cf_ape", &mut failures, || {
        let p = CausalForestParams::with_trees(params.n_trees, derive_seed(params.seed, "estimate-cf", 0));
        let (_, cf) = causal_forest::fit(&xw, &y, &d, &p)?;
        cf.estimate_ape()
    });
    records.push(cf.map_or_else(
        || ResultRecord::failed("cf_ape"),
        |a| ResultRecord::new("cf_ape", a.theta, a.se, a.p_value, a.n),
    ));

    let dml = run("dml_ate", &mut failures, || {
        let mut p = DmlParams::new(params.n_trees, derive_seed(params.seed, "estimate-dml", 0));
        p.k_folds = params.k_folds;
        p.trim_threshold = params.trim;
        p.tune = params.tune;
        dml_ate(&xw, &y, &dtilde, &p)
    });
    let mut propensity = None;
    records.push(match dml {
        Some(fit) => {
            propensity = Some(propensity_histograms(&fit.nuisances.p1, &dtilde, 20));
            let r = &fit.result;
            let mut rec = ResultRecord::new("dml_ate", r.ate, r.se, r.p_value, r.n_used);
            rec.n_trimmed = r.n_trimmed;
            rec.threshold = Some(r.threshold);
            rec
        }
        None => ResultRecord::failed("dml_ate"),
    });

    let lr = run("ols", &mut failures, || {
        let mut design = Matrix::from_columns(vec!["d_discount".into()], vec![d.clone()])?;
        design = design.hstack(&xw)?.with_intercept();
        let fit = ols(&y, &design)?;
        let j = fit
            .index_of("d_discount")
            .ok_or_else(|| Error::estimation("the discount was dropped as collinear"))?;
        Ok(ResultRecord::new(
            "ols",
            fit.coefficients[j],
            fit.se[j],
            fit.p_values[j],
            fit.n,
        ))
    });
    records.push(lr.unwrap_or_else(|| ResultRecord::failed("ols")));

    let psm = run("psm", &mut failures, || {
        let b = bootstrap_psm(
            &controls_with_intercept(ab),
            &y,
            &dtilde,
            params.bootstrap,
            derive_seed(params.seed, "estimate-psm", 0),
        )?;
        Ok(ResultRecord::new("psm", b.ate, b.se, b.p_value, ab.len()))
    });
    records.push(psm.unwrap_or_else(|| ResultRecord::failed("psm")));

    Ok(EstimateReport {
        records,
        failures,
        propensity,
        n: ab.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictParams {
    pub n_trees: usize,
    pub train_frac: f64,
    pub top_k: usize,
    pub seed: u64,
}

impl Default for PredictParams {
    fn default() -> Self {
        PredictParams {
            n_trees: 500,
            train_frac: 0.75,
            top_k: 30,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveResult {
    pub outcome: Outcome,
    /// `all`, `dtilde=1` or `dtilde=0`.
    pub subsample: String,
    pub n_balanced: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Held-out share of correct predictions at a 0.5 cut-off.
    pub accuracy: f64,
    /// Importance of the top predictors.
    pub importance: ImportanceTable,
}

/// Discount followed by X and W.
pub fn predictors(ds: &Dataset) -> Matrix {
    let d = Matrix::from_columns(vec!["d_discount".into()], vec![ds.d()]).expect("one column");
    d.hstack(&ds.xw_matrix()).expect("same rows")
}

/// Balances the outcome, splits 75/25, fits a classification forest on the
/// discount, X and W and scores it on the held-out part.
pub fn predictive_analysis(
    ds: &Dataset,
    outcome: Outcome,
    subsample: &str,
    params: &PredictParams,
) -> Result<PredictiveResult> {
    let tag = format!("predict-{}-{subsample}", outcome.name());
    let ds = if outcome == Outcome::Upselling {
        ds.drop_covariates(UPSELLING_EXCLUDED)
    } else {
        ds.clone()
    };
    let balanced = balance_binary_outcome(&ds, outcome, derive_seed(params.seed, &tag, 0))?;
    let (train, test) = train_test_split(&balanced, params.train_frac, derive_seed(params.seed, &tag, 1))?;
    let label = |d: &Dataset| d.outcome(outcome).expect("checked by balancing");
    let (y_train, y_test) = (label(&train), label(&test));
    if y_train.iter().all(|&v| v == y_train[0]) {
        return Err(Error::validation(format!(
            "outcome {} is constant in the training split",
            outcome.name()
        )));
    }
    let fp = ForestParams::with_trees(params.n_trees, derive_seed(params.seed, &tag, 2));
    let forest = fit_forest(&predictors(&train), &y_train, Task::Classification, &fp)?;
    let probs = forest.predict(&predictors(&test))?;
    Ok(PredictiveResult {
        outcome,
        subsample: subsample.to_string(),
        n_balanced: balanced.len(),
        n_train: train.len(),
        n_test: test.len(),
        accuracy: classification_accuracy(&probs, &y_test, 0.5)?,
        importance: variable_importance(&forest).top(params.top_k),
    })
}

/// Rows of `ds` in discount arm `arm` (1: at or above the threshold).
pub fn arm_subsample(ds: &Dataset, arm: u8) -> Dataset {
    let dt = ds.dtilde();
    let idx: Vec<usize> = (0..ds.len()).filter(|&i| dt[i] == f64::from(arm)).collect();
    ds.subset(&idx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeterogeneityReport {
    pub ape: ResultRecord,
    /// Out-of-bag conditional effects; NaN where no group left the row out.
    pub capes: Vec<f64>,
    pub cape_se: Vec<f64>,
    pub share_positive: f64,
    pub share_significant_10: f64,
    pub share_significant_5: f64,
    pub histogram: Histogram,
    /// Regression-forest importance for predicting the conditional effects.
    pub importance: ImportanceTable,
    /// Scores regressed on an intercept and the binary discount.
    pub blp_discount: BlpReport,
    /// Scores regressed on an intercept and the chosen characteristics.
    pub blp_characteristics: BlpReport,
    pub n_scores: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeterogeneityParams {
    pub n_trees: usize,
    pub seed: u64,
    pub bins: usize,
    pub top_k: usize,
    /// Covariates for the characteristics basis; empty means every W column.
    pub basis: Vec<String>,
}

fn score_rows(cf: &CausalForest, scores: &DrScores) -> (Vec<usize>, Vec<f64>) {
    let mut rows = Vec::new();
    let mut vals = Vec::new();
    for (i, &s) in scores.scores.iter().enumerate() {
        if !s.is_nan() {
            rows.push(cf.rows[i]);
            vals.push(s);
        }
    }
    (rows, vals)
}

/// Conditional-effect distribution, its predictors and best linear
/// predictors of the doubly-robust scores.
pub fn heterogeneity_analysis(ab: &Dataset, params: &HeterogeneityParams) -> Result<HeterogeneityReport> {
    if ab.is_empty() {
        return Err(Error::validation("the sample has no always buyers"));
    }
    let xw = ab.xw_matrix();
    let p = CausalForestParams::with_trees(params.n_trees, derive_seed(params.seed, "heterogeneity-cf", 0));
    let (_, cf) = causal_forest::fit(&xw, &ab.y(), &ab.d(), &p)?;
    let scores = cf.doubly_robust_scores()?;
    let ape = causal_forest::ape_from_scores(&scores)?;

    let oob = cf.oob_cape();
    let capes: Vec<f64> = oob.iter().map(|c| c.tau).collect();
    let cape_se: Vec<f64> = oob.iter().map(|c| c.se).collect();
    let finite: Vec<_> = oob.iter().filter(|c| c.tau.is_finite()).collect();
    let m = finite.len().max(1) as f64;
    let share = |f: &dyn Fn(&&causal_forest::CapeEstimate) -> bool| finite.iter().filter(|c| f(c)).count() as f64 / m;
    let finite_capes: Vec<f64> = finite.iter().map(|c| c.tau).collect();

    let cape_rows: Vec<usize> = (0..oob.len()).filter(|&i| oob[i].tau.is_finite()).collect();
    let cape_x = cf.x.select_rows(&cape_rows);
    let importance = if cape_rows.len() >= 10 {
        let fp = ForestParams::with_trees(params.n_trees, derive_seed(params.seed, "heterogeneity-importance", 0));
        variable_importance(&fit_forest(&cape_x, &finite_capes, Task::Regression, &fp)?).top(params.top_k)
    } else {
        ImportanceTable { entries: Vec::new() }
    };

    let (rows, vals) = score_rows(&cf, &scores);
    let sub = ab.subset(&rows);
    let dt = Matrix::from_columns(vec!["dtilde".into()], vec![sub.dtilde()])?.with_intercept();
    let blp_discount = blp_heterogeneity(&vals, &dt)?;
    let wm = sub.xw_matrix();
    let chosen: Vec<usize> = if params.basis.is_empty() {
        let n_x = sub.x_matrix().n_cols();
        (n_x..wm.n_cols()).collect()
    } else {
        params
            .basis
            .iter()
            .map(|name| {
                wm.names()
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| Error::validation(format!("basis column {name} not found")))
            })
            .collect::<Result<_>>()?
    };
    let blp_characteristics = blp_heterogeneity(&vals, &wm.select_columns(&chosen).with_intercept())?;

    Ok(HeterogeneityReport {
        ape: ResultRecord::new("cf_ape", ape.theta, ape.se, ape.p_value, ape.n),
        share_positive: share(&|c| c.tau > 0.0),
        share_significant_10: share(&|c| c.significant_10),
        share_significant_5: share(&|c| c.significant_5),
        histogram: Histogram::new(&finite_capes, params.bins),
        capes,
        cape_se,
        importance,
        blp_discount,
        blp_characteristics,
        n_scores: vals.len(),
    })
}
