//! Monte Carlo studies: repeated simulate → filter → estimate runs scored
//! against the oracle.

use super::oracle::{oracle_nuisances, oracle_truth, OracleTruth};
use super::{simulate, DgpConfig};
use crate::benchmarks::ols;
use crate::causal_forest::{self, CausalForestParams};
use crate::data::filter_always_buyers;
use crate::dml::{ate_from_nuisances, dml_ate, DmlParams};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::report::ResultRecord;
use crate::rng;
use crate::stats::{mean, norm_quantile, sd};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum McEstimator {
    /// Causal-forest average partial effect among always buyers.
    CfApe,
    /// Cross-fitted doubly-robust binary-discount effect among always buyers.
    DmlAte,
    /// The same score with the true nuisance functions plugged in.
    DmlOracle,
    /// Slope of the outcome on the discount over all surveyed buyers, no controls.
    NaiveOls,
}

impl McEstimator {
    pub fn name(self) -> &'static str {
        match self {
            McEstimator::CfApe => "cf_ape",
            McEstimator::DmlAte => "dml_ate",
            McEstimator::DmlOracle => "dml_oracle",
            McEstimator::NaiveOls => "naive_ols",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "cf_ape" | "cf" => McEstimator::CfApe,
            "dml_ate" | "dml" => McEstimator::DmlAte,
            "dml_oracle" => McEstimator::DmlOracle,
            "naive_ols" => McEstimator::NaiveOls,
            _ => return Err(Error::validation(format!("unknown estimator {s:?}"))),
        })
    }

    /// Oracle quantity the estimator targets.
    pub fn truth(self, t: &OracleTruth) -> f64 {
        match self {
            McEstimator::CfApe | McEstimator::NaiveOls => t.theta_ab,
            McEstimator::DmlAte | McEstimator::DmlOracle => t.delta_ab_binary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McParams {
    pub reps: usize,
    pub n_trees: usize,
    pub k_folds: usize,
    pub trim: f64,
    pub tune: bool,
    pub oracle_draws: usize,
}

impl Default for McParams {
    fn default() -> Self {
        McParams {
            reps: 20,
            n_trees: 500,
            k_folds: 3,
            trim: 0.01,
            tune: true,
            oracle_draws: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepRecord {
    pub rep: usize,
    pub seed: u64,
    pub record: ResultRecord,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub estimator: McEstimator,
    pub truth: f64,
    pub n_ok: usize,
    pub n_failed: usize,
    pub mean_estimate: f64,
    pub bias: f64,
    pub rmse: f64,
    /// Share of 95% intervals covering the truth.
    pub coverage: f64,
    pub mean_se: f64,
    /// Standard deviation of the estimates across replications.
    pub sd_estimate: f64,
    /// Standard error of the mean estimate across replications.
    pub mc_se: f64,
    #[serde(skip)]
    pub oracle: OracleTruth,
    #[serde(skip)]
    pub reps: Vec<RepRecord>,
}

/// Seed of replication `rep`.
pub fn rep_seed(cfg: &DgpConfig, rep: usize) -> u64 {
    rng::derive_seed(cfg.seed, "mc-rep", rep as u64)
}

fn run_rep(cfg: &DgpConfig, est: McEstimator, params: &McParams, seed: u64) -> Result<ResultRecord> {
    let rep_cfg = DgpConfig { seed, ..cfg.clone() };
    let sim = simulate(&rep_cfg)?;
    if est == McEstimator::NaiveOls {
        let obs = &sim.observed;
        let design = Matrix::from_columns(vec!["d_discount".into()], vec![obs.d()])?.with_intercept();
        let fit = ols(&obs.y(), &design)?;
        let j = fit
            .index_of("d_discount")
            .ok_or_else(|| Error::estimation("discount has no variation"))?;
        return Ok(ResultRecord::new(
            est.name(),
            fit.coefficients[j],
            fit.se[j],
            fit.p_values[j],
            fit.n,
        ));
    }
    let ab = filter_always_buyers(&sim.observed);
    let y = ab.y();
    match est {
        McEstimator::CfApe => {
            let cf_params = CausalForestParams::with_trees(params.n_trees, rng::derive_seed(seed, "mc-cf", 0));
            let (_, cf) = causal_forest::fit(&ab.xw_matrix(), &y, &ab.d(), &cf_params)?;
            let ape = cf.estimate_ape()?;
            Ok(ResultRecord::new(est.name(), ape.theta, ape.se, ape.p_value, ape.n))
        }
        McEstimator::DmlAte | McEstimator::DmlOracle => {
            let fit = if est == McEstimator::DmlAte {
                let mut p = DmlParams::new(params.n_trees, rng::derive_seed(seed, "mc-dml", 0));
                p.k_folds = params.k_folds;
                p.trim_threshold = params.trim;
                p.tune = params.tune;
                dml_ate(&ab.xw_matrix(), &y, &ab.dtilde(), &p)?
            } else {
                ate_from_nuisances(&y, &ab.dtilde(), oracle_nuisances(&rep_cfg, &ab)?, params.trim)?
            };
            let r = &fit.result;
            let mut rec = ResultRecord::new(est.name(), r.ate, r.se, r.p_value, r.n_used);
            rec.n_trimmed = r.n_trimmed;
            rec.threshold = Some(r.threshold);
            Ok(rec)
        }
        McEstimator::NaiveOls => unreachable!(),
    }
}

/// Runs `params.reps` independent replications of `est` on `cfg`.
/// Failed replications are recorded and excluded from the summary.
pub fn monte_carlo_study(cfg: &DgpConfig, est: McEstimator, params: &McParams) -> Result<McSummary> {
    if params.reps < 2 {
        return Err(Error::validation("a Monte Carlo study needs at least 2 replications"));
    }
    let oracle = oracle_truth(cfg, params.oracle_draws)?;
    let truth = est.truth(&oracle);
    let reps: Vec<RepRecord> = (0..params.reps)
        .into_par_iter()
        .map(|rep| {
            let seed = rep_seed(cfg, rep);
            match run_rep(cfg, est, params, seed) {
                Ok(record) => RepRecord {
                    rep,
                    seed,
                    record,
                    error: None,
                },
                Err(e) => {
                    log::warn!("replication {rep} failed: {e}");
                    RepRecord {
                        rep,
                        seed,
                        record: ResultRecord::failed(est.name()),
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();
    let ok: Vec<&ResultRecord> = reps
        .iter()
        .filter(|r| r.error.is_none() && r.record.effect.is_finite())
        .map(|r| &r.record)
        .collect();
    let effects: Vec<f64> = ok.iter().map(|r| r.effect).collect();
    let z = norm_quantile(0.975);
    let k = ok.len();
    let mean_estimate = mean(&effects);
    let sd_estimate = sd(&effects);
    let covered = ok.iter().filter(|r| (r.effect - truth).abs() <= z * r.se).count();
    Ok(McSummary {
        estimator: est,
        truth,
        n_ok: k,
        n_failed: params.reps - k,
        mean_estimate,
        bias: mean_estimate - truth,
        rmse: (effects.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / k as f64).sqrt(),
        coverage: covered as f64 / k as f64,
        mean_se: mean(&ok.iter().map(|r| r.se).collect::<Vec<_>>()),
        sd_estimate,
        mc_se: sd_estimate / (k as f64).sqrt(),
        oracle,
        reps,
    })
}
