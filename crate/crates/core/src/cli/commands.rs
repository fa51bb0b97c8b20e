//! Command bodies. Each writes its files into the output directory and
//! returns the process exit code.

use super::pipeline::{
    arm_subsample, estimate_effects, heterogeneity_analysis, predictive_analysis, EstimateParams, HeterogeneityParams,
    PredictParams,
};
use super::{CommandKind, RunConfig, EXIT_ESTIMATION, EXIT_OK};
use crate::data::{
    filter_always_buyers, load_survey, write_schema, write_survey, Dataset, Outcome, Schema, TreatmentSpec,
};
use crate::diagnostics::{
    independence_wald, monotonicity_tests, MonotonicityParams, CONDITIONAL_SE_NOTE, MULTIPLICITY_NOTE,
};
use crate::error::{Error, Result};
use crate::forest::ImportanceTable;
use crate::report::{write_csv, write_histogram};
use crate::simulator::{monte_carlo_study, oracle_truth, simulate, McEstimator, McParams, OracleTruth};
use serde::Serialize;
use std::path::{Path, PathBuf};

struct Out {
    dir: PathBuf,
}

impl Out {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Out { dir: dir.to_path_buf() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn csv<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<()> {
        write_csv(&self.path(name), rows)
    }

    fn text(&self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    }

    fn importance(&self, name: &str, table: &ImportanceTable) -> Result<()> {
        let p = self.path(name);
        let f = std::fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
        table.write_csv(std::io::BufWriter::new(f))
    }
}

/// Runs the configured command, writing outputs and the manifest to `out`.
pub fn execute(cfg: &RunConfig, out: &Path) -> Result<i32> {
    let out = Out::new(out)?;
    out.text("manifest.txt", &cfg.to_manifest())?;
    match cfg.command {
        CommandKind::Simulate => cmd_simulate(cfg, &out),
        CommandKind::Estimate => cmd_estimate(cfg, &out),
        CommandKind::Diagnose => cmd_diagnose(cfg, &out),
        CommandKind::Predict => cmd_predict(cfg, &out),
        CommandKind::Heterogeneity => cmd_heterogeneity(cfg, &out),
        CommandKind::McStudy => cmd_mc_study(cfg, &out),
    }
}

fn load(cfg: &RunConfig) -> Result<Dataset> {
    let data = cfg
        .data
        .as_ref()
        .ok_or_else(|| Error::validation("--data is required for this command"))?;
    let schema_path = cfg.schema.clone().unwrap_or_else(|| data.with_extension("schema"));
    let schema = Schema::from_file(&schema_path)?;
    let (ds, report) = load_survey(data, &schema, TreatmentSpec::new(cfg.max_discount, cfg.binarize_at)?)?;
    if report.rejected() > 0 {
        log::info!(
            "{} of {} rows rejected during ingestion",
            report.rejected(),
            report.rows_read
        );
    }
    Ok(ds)
}

fn always_buyers(ds: &Dataset) -> Result<Dataset> {
    let ab = filter_always_buyers(ds);
    if ab.is_empty() {
        return Err(Error::validation("the sample has no always buyers (s0 = 1)"));
    }
    Ok(ab)
}

fn cmd_simulate(cfg: &RunConfig, out: &Out) -> Result<i32> {
    let sim = simulate(&cfg.dgp)?;
    write_survey(&sim.observed, out.path("survey.csv"))?;
    write_schema(&sim.observed, out.path("survey.schema"))?;
    sim.latent.write_csv(out.path("latent.csv"))?;
    out.text("dgp.txt", &cfg.dgp.to_text())?;
    let truth = oracle_truth(&cfg.dgp, cfg.oracle_draws)?;
    out.csv("oracle.csv", &[OracleRow::from(&truth)])?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct OracleRow {
    theta_ab: f64,
    theta_ab_se: f64,
    delta_ab_binary: f64,
    delta_se: f64,
    monotonicity_slope: f64,
    monotonicity_se: f64,
    always_buyer_share: f64,
    always_buyer_share_se: f64,
    computed_by: String,
}

impl From<&OracleTruth> for OracleRow {
    fn from(t: &OracleTruth) -> Self {
        OracleRow {
            theta_ab: t.theta_ab,
            theta_ab_se: t.theta_ab_se,
            delta_ab_binary: t.delta_ab_binary,
            delta_se: t.delta_se,
            monotonicity_slope: t.monotonicity_slope,
            monotonicity_se: t.monotonicity_se,
            always_buyer_share: t.always_buyer_share,
            always_buyer_share_se: t.always_buyer_share_se,
            computed_by: match t.computed_by {
                crate::simulator::ComputedBy::Analytic => "analytic".into(),
                crate::simulator::ComputedBy::MonteCarlo { draws } => format!("monte-carlo with {draws} draws"),
            },
        }
    }
}

#[derive(Serialize)]
struct FailureRow<'a> {
    method: &'a str,
    error: &'a str,
}

fn cmd_estimate(cfg: &RunConfig, out: &Out) -> Result<i32> {
    let ab = always_buyers(&load(cfg)?)?;
    let params = EstimateParams {
        n_trees: cfg.trees,
        k_folds: cfg.folds,
        trim: cfg.trim,
        bootstrap: cfg.bootstrap,
        tune: cfg.tune,
        seed: cfg.seed,
    };
    let rep = estimate_effects(&ab, &params)?;
    out.csv("estimates.csv", &rep.records)?;
    if let Some((treated, control)) = &rep.propensity {
        write_histogram(&out.path("propensity_treated_hist.csv"), treated)?;
        write_histogram(&out.path("propensity_control_hist.csv"), control)?;
    }
    let failures: Vec<FailureRow> = rep
        .failures
        .iter()
        .map(|(m, e)| FailureRow { method: m, error: e })
        .collect();
    out.csv("failures.csv", &failures)?;
    Ok(if rep.failures.is_empty() {
        EXIT_OK
    } else {
        EXIT_ESTIMATION
    })
}

#[derive(Serialize)]
struct MonotonicitySummary {
    n_evaluated: usize,
    share_positive: f64,
    share_significant_10: f64,
    share_significant_5: f64,
    violation: bool,
}

#[derive(Serialize)]
struct WaldSummary {
    n_tested: usize,
    average_p_value: f64,
    n_significant_5: usize,
}

fn cmd_diagnose(cfg: &RunConfig, out: &Out) -> Result<i32> {
    let full = load(cfg)?;
    let mut mp = MonotonicityParams::new(cfg.trees, cfg.seed);
    mp.dml.k_folds = cfg.folds;
    mp.dml.trim_threshold = cfg.trim;
    mp.dml.tune = cfg.tune;
    let mono = monotonicity_tests(&full, &mp)?;
    out.csv("monotonicity.csv", &mono.records())?;
    out.csv(
        "monotonicity_summary.csv",
        &[MonotonicitySummary {
            n_evaluated: mono.n_evaluated(),
            share_positive: mono.share_positive,
            share_significant_10: mono.share_significant_10,
            share_significant_5: mono.share_significant_5,
            violation: mono.violation,
        }],
    )?;
    write_histogram(&out.path("conditional_changes_hist.csv"), &mono.histogram)?;

    let ab = always_buyers(&full)?;
    let wald = independence_wald(&ab)?;
    out.csv("independence_wald.csv", &wald.rows)?;
    out.csv(
        "independence_wald_summary.csv",
        &[WaldSummary {
            n_tested: wald.tested().count(),
            average_p_value: wald.average_p_value,
            n_significant_5: wald.n_significant_5,
        }],
    )?;
    out.text("notes.txt", &format!("{MULTIPLICITY_NOTE}\n{CONDITIONAL_SE_NOTE}\n"))?;
    if mono.violation {
        log::warn!("a monotonicity test is significantly negative at 5%");
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct AccuracyRow<'a> {
    outcome: &'a str,
    subsample: &'a str,
    n_balanced: usize,
    n_train: usize,
    n_test: usize,
    accuracy: f64,
    note: String,
}

fn cmd_predict(cfg: &RunConfig, out: &Out) -> Result<i32> {
    let full = load(cfg)?;
    let params = PredictParams {
        n_trees: cfg.trees,
        seed: cfg.seed,
        ..PredictParams::default()
    };
    let mut samples = vec![("all".to_string(), full.clone())];
    if cfg.subsamples {
        samples.push(("dtilde=1".into(), arm_subsample(&full, 1)));
        samples.push(("dtilde=0".into(), arm_subsample(&full, 0)));
    }
    let mut rows = Vec::new();
    let mut any_ok = false;
    for outcome in [Outcome::DemandShift, Outcome::Upselling, Outcome::AdditionalTrip] {
        for (label, ds) in &samples {
            match predictive_analysis(ds, outcome, label, &params) {
                Ok(r) => {
                    any_ok = true;
                    let suffix = match label.as_str() {
                        "all" => String::new(),
                        "dtilde=1" => "_dtilde1".into(),
                        _ => "_dtilde0".into(),
                    };
                    out.importance(&format!("importance_{}{suffix}.csv", outcome.name()), &r.importance)?;
                    rows.push(AccuracyRow {
                        outcome: outcome.name(),
                        subsample: label,
                        n_balanced: r.n_balanced,
                        n_train: r.n_train,
                        n_test: r.n_test,
                        accuracy: r.accuracy,
                        note: String::new(),
                    });
                }
                Err(e) => rows.push(AccuracyRow {
                    outcome: outcome.name(),
                    subsample: label,
                    n_balanced: 0,
                    n_train: 0,
                    n_test: 0,
                    accuracy: f64::NAN,
                    note: e.to_string(),
                }),
            }
        }
    }
    out.csv("predictive_accuracy.csv", &rows)?;
    if !any_ok {
        return Err(Error::validation("no outcome could be analysed"));
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct CapeRow {
    row: usize,
    cape: f64,
    se: f64,
}

#[derive(Serialize)]
struct CapeSummary {
    n_evaluated: usize,
    share_positive: f64,
    share_significant_10: f64,
    share_significant_5: f64,
}

fn cmd_heterogeneity(cfg: &RunConfig, out: &Out) -> Result<i32> {
    let ab = always_buyers(&load(cfg)?)?;
    let params = HeterogeneityParams {
        n_trees: cfg.trees,
        seed: cfg.seed,
        bins: 30,
        top_k: 30,
        basis: cfg.basis.clone(),
    };
    let rep = heterogeneity_analysis(&ab, &params)?;
    out.csv("ape.csv", std::slice::from_ref(&rep.ape))?;
    let capes: Vec<CapeRow> = rep
        .capes
        .iter()
        .zip(&rep.cape_se)
        .enumerate()
        .map(|(row, (&cape, &se))| CapeRow { row, cape, se })
        .collect();
    out.csv("cape.csv", &capes)?;
    out.csv(
        "cape_summary.csv",
        &[CapeSummary {
            n_evaluated: rep.histogram.total(),
            share_positive: rep.share_positive,
            share_significant_10: rep.share_significant_10,
            share_significant_5: rep.share_significant_5,
        }],
    )?;
    write_histogram(&out.path("cape_hist.csv"), &rep.histogram)?;
    out.importance("cape_importance.csv", &rep.importance)?;
    out.csv("blp_discount.csv", &rep.blp_discount.records("blp", rep.n_scores))?;
    out.csv(
        "blp_characteristics.csv",
        &rep.blp_characteristics.records("blp", rep.n_scores),
    )?;
    out.text("notes.txt", &format!("{MULTIPLICITY_NOTE}\n{CONDITIONAL_SE_NOTE}\n"))?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct McRow {
    estimator: &'static str,
    truth: f64,
    n_ok: usize,
    n_failed: usize,
    mean_estimate: f64,
    bias: f64,
    rmse: f64,
    coverage: f64,
    mean_se: f64,
    sd_estimate: f64,
    mc_se: f64,
}

#[derive(Serialize)]
struct McRepRow<'a> {
    rep: usize,
    seed: u64,
    effect: f64,
    se: f64,
    p_value: f64,
    n: usize,
    n_trimmed: usize,
    error: &'a str,
}

fn cmd_mc_study(cfg: &RunConfig, out: &Out) -> Result<i32> {
    let est = McEstimator::parse(&cfg.estimator)?;
    let params = McParams {
        reps: cfg.reps,
        n_trees: cfg.trees,
        k_folds: cfg.folds,
        trim: cfg.trim,
        tune: cfg.tune,
        oracle_draws: cfg.oracle_draws,
    };
    let s = monte_carlo_study(&cfg.dgp, est, &params)?;
    out.csv(
        "mc_summary.csv",
        &[McRow {
            estimator: est.name(),
            truth: s.truth,
            n_ok: s.n_ok,
            n_failed: s.n_failed,
            mean_estimate: s.mean_estimate,
            bias: s.bias,
            rmse: s.rmse,
            coverage: s.coverage,
            mean_se: s.mean_se,
            sd_estimate: s.sd_estimate,
            mc_se: s.mc_se,
        }],
    )?;
    let reps: Vec<McRepRow> = s
        .reps
        .iter()
        .map(|r| McRepRow {
            rep: r.rep,
            seed: r.seed,
            effect: r.record.effect,
            se: r.record.se,
            p_value: r.record.p_value,
            n: r.record.n,
            n_trimmed: r.record.n_trimmed,
            error: r.error.as_deref().unwrap_or(""),
        })
        .collect();
    out.csv("mc_reps.csv", &reps)?;
    out.csv("oracle.csv", &[OracleRow::from(&s.oracle)])?;
    Ok(if s.n_failed > 0 { EXIT_ESTIMATION } else { EXIT_OK })
}
