//! Synthetic surveys with known ground truth.
//!
//! Customers draw demand covariates X, personal covariates W and an
//! unobserved confounder V. The discount depends on X only. A single latent
//! index decides whether a customer buys at discount d, so buying is monotone
//! in d for every customer. V also shifts the chance of rescheduling, which
//! makes buyers at high discounts differ from buyers at low discounts in
//! unobservables. Only buyers are surveyed.

mod config;
mod oracle;
mod study;

pub use config::{parse_pairs, DgpConfig, KEYS};
pub use oracle::{oracle_cape, oracle_nuisances, oracle_truth, ComputedBy, OracleTruth};
pub use study::{monte_carlo_study, rep_seed, McEstimator, McParams, McSummary, RepRecord};

use crate::data::{ColumnMeta, Dataset, Provenance, SurveyRecord, TreatmentSpec};
use crate::error::{Error, Result};
use crate::rng;
use rand::Rng as _;
use rand_distr::StandardNormal;
use std::io::Write as _;
use std::path::Path;

pub const MIN_SURVEY_ROWS: usize = 100;

/// Structural functions of a validated config.
#[derive(Debug, Clone)]
pub(crate) struct Model {
    pub cfg: DgpConfig,
    discount_coef: Vec<f64>,
    sel_x: Vec<f64>,
    sel_w: Vec<f64>,
    outcome_coef: Vec<f64>,
}

impl Model {
    pub fn new(cfg: &DgpConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Model {
            discount_coef: cfg.discount_coef(),
            sel_x: cfg.selection_coef_x(),
            sel_w: cfg.selection_coef_w(),
            outcome_coef: cfg.outcome_coef(),
            cfg: cfg.clone(),
        })
    }

    pub fn draw_covariates(&self, r: &mut rng::Rng) -> (Vec<f64>, Vec<f64>) {
        let c = &self.cfg;
        let draw = |r: &mut rng::Rng, j: usize, p: usize, binary: usize| -> f64 {
            if j >= p - binary {
                f64::from(u8::from(r.random::<bool>()))
            } else {
                r.sample(StandardNormal)
            }
        };
        let x = (0..c.p_x).map(|j| draw(r, j, c.p_x, c.x_binary)).collect();
        let w = (0..c.p_w).map(|j| draw(r, j, c.p_w, c.w_binary)).collect();
        (x, w)
    }

    /// Mean of the discount before noise and clipping.
    pub fn discount_mean(&self, x: &[f64]) -> f64 {
        self.cfg.discount_intercept + dot(&self.discount_coef, x)
    }

    pub fn discount(&self, x: &[f64], eps: f64) -> f64 {
        (self.discount_mean(x) + self.cfg.discount_noise * eps).clamp(self.cfg.min_discount, self.cfg.max_discount)
    }

    pub fn alpha(&self, x: &[f64], w: &[f64]) -> f64 {
        self.cfg.selection_intercept + dot(&self.sel_x, x) + dot(&self.sel_w, w)
    }

    /// Selection index at discount `d`, before adding `v_scale·V`.
    pub fn selection_index(&self, alpha: f64, d: f64) -> f64 {
        if d > 0.0 {
            alpha + self.cfg.selection_shift + self.cfg.selection_slope * d
        } else {
            alpha
        }
    }

    pub fn q(&self, x: &[f64]) -> f64 {
        let s: f64 = self.outcome_coef.iter().zip(x).map(|(c, v)| c * v.tanh()).sum();
        (self.cfg.outcome_intercept + s).max(0.0)
    }

    pub fn kappa(&self, x: &[f64], v: f64) -> f64 {
        self.q(x) * (1.0 + self.cfg.v_outcome_loading * v.tanh())
    }

    pub fn x_columns(&self) -> Vec<ColumnMeta> {
        (0..self.cfg.p_x)
            .map(|j| {
                let name = format!("x{}", j + 1);
                if j >= self.cfg.p_x - self.cfg.x_binary {
                    ColumnMeta::binary(name)
                } else {
                    ColumnMeta::continuous(name)
                }
            })
            .collect()
    }

    pub fn w_columns(&self) -> Vec<ColumnMeta> {
        (0..self.cfg.p_w)
            .map(|j| {
                let name = format!("w{}", j + 1);
                if j >= self.cfg.p_w - self.cfg.w_binary {
                    ColumnMeta::binary(name)
                } else {
                    ColumnMeta::continuous(name)
                }
            })
            .collect()
    }

    pub fn treatment(&self) -> Result<TreatmentSpec> {
        TreatmentSpec::new(self.cfg.max_discount, self.cfg.binarize_at)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Every drawn customer, including those who did not buy.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTable {
    pub x_names: Vec<String>,
    pub w_names: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub d: Vec<f64>,
    pub v: Vec<f64>,
    pub alpha: Vec<f64>,
    pub kappa: Vec<f64>,
    /// Uniform draw coupling the potential outcomes: Y(d) = I{u < κ·d}.
    pub u: Vec<f64>,
    pub s0: Vec<u8>,
    pub s_d: Vec<u8>,
    pub y0: Vec<u8>,
    pub y_d: Vec<u8>,
    /// Row of each customer in the observed survey, if surveyed.
    pub survey_row: Vec<Option<usize>>,
    v_scale: f64,
    shift: f64,
    slope: f64,
}

impl LatentTable {
    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// Potential buying decision of customer `i` at discount `d`.
    pub fn selection_at(&self, i: usize, d: f64) -> u8 {
        let idx = if d > 0.0 {
            self.alpha[i] + self.shift + self.slope * d
        } else {
            self.alpha[i]
        };
        u8::from(idx + self.v_scale * self.v[i] >= 0.0)
    }

    /// Potential outcome of customer `i` at discount `d`.
    pub fn outcome_at(&self, i: usize, d: f64) -> u8 {
        u8::from(self.u[i] < (self.kappa[i] * d).min(1.0))
    }

    /// Writes the table as CSV; latent-only columns carry a `latent_` prefix.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(f);
        let mut header: Vec<String> = self.x_names.iter().chain(&self.w_names).cloned().collect();
        header.push("d_discount".into());
        for c in ["v", "alpha", "kappa", "u", "s0", "s_d", "y0", "y_d", "surveyed"] {
            header.push(format!("latent_{c}"));
        }
        let io = |e| Error::io(path, e);
        writeln!(out, "{}", header.join(",")).map_err(io)?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.x[i].iter().chain(&self.w[i]).map(|v| format!("{v:?}")).collect();
            row.push(format!("{:?}", self.d[i]));
            for v in [self.v[i], self.alpha[i], self.kappa[i], self.u[i]] {
                row.push(format!("{v:?}"));
            }
            for v in [self.s0[i], self.s_d[i], self.y0[i], self.y_d[i]] {
                row.push(v.to_string());
            }
            row.push(u8::from(self.survey_row[i].is_some()).to_string());
            writeln!(out, "{}", row.join(",")).map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    /// Survey respondents: customers who bought at their discount.
    pub observed: Dataset,
    pub latent: LatentTable,
}

/// Draws `cfg.n` customers and surveys the buyers.
pub fn simulate(cfg: &DgpConfig) -> Result<Simulation> {
    let model = Model::new(cfg)?;
    let n = cfg.n;
    let mut cov = rng::stream(cfg.seed, "sim-covariates", 0);
    let mut eps_r = rng::stream(cfg.seed, "sim-discount", 0);
    let mut v_r = rng::stream(cfg.seed, "sim-confounder", 0);
    let mut u_r = rng::stream(cfg.seed, "sim-outcome", 0);

    let mut t = LatentTable {
        x_names: model.x_columns().into_iter().map(|c| c.name).collect(),
        w_names: model.w_columns().into_iter().map(|c| c.name).collect(),
        x: Vec::with_capacity(n),
        w: Vec::with_capacity(n),
        d: Vec::with_capacity(n),
        v: Vec::with_capacity(n),
        alpha: Vec::with_capacity(n),
        kappa: Vec::with_capacity(n),
        u: Vec::with_capacity(n),
        s0: Vec::with_capacity(n),
        s_d: Vec::with_capacity(n),
        y0: Vec::with_capacity(n),
        y_d: Vec::with_capacity(n),
        survey_row: Vec::with_capacity(n),
        v_scale: cfg.v_scale,
        shift: cfg.selection_shift,
        slope: cfg.selection_slope,
    };
    let mut records = Vec::new();
    for i in 0..n {
        let (x, w) = model.draw_covariates(&mut cov);
        let eps: f64 = eps_r.sample(StandardNormal);
        let v: f64 = v_r.sample(StandardNormal);
        let u: f64 = u_r.random();
        let d = model.discount(&x, eps);
        t.alpha.push(model.alpha(&x, &w));
        t.kappa.push(model.kappa(&x, v));
        t.v.push(v);
        t.u.push(u);
        t.d.push(d);
        t.x.push(x);
        t.w.push(w);
        let s0 = t.selection_at(i, 0.0);
        let s_d = t.selection_at(i, d);
        let y_d = t.outcome_at(i, d);
        t.s0.push(s0);
        t.s_d.push(s_d);
        t.y0.push(t.outcome_at(i, 0.0));
        t.y_d.push(y_d);
        if s_d == 1 {
            t.survey_row.push(Some(records.len()));
            records.push(SurveyRecord {
                y_demand_shift: y_d,
                d_discount: d,
                s0_would_buy: s0,
                upselling: None,
                x_demand: t.x[i].clone(),
                w_personal: t.w[i].clone(),
                imputed_flag: 0,
                imputed_share: 0.0,
            });
        } else {
            t.survey_row.push(None);
        }
    }
    if records.len() < MIN_SURVEY_ROWS {
        return Err(Error::validation(format!(
            "only {} of {n} simulated customers bought; need at least {MIN_SURVEY_ROWS}",
            records.len()
        )));
    }
    let observed = Dataset::new(
        records,
        model.x_columns(),
        model.w_columns(),
        Provenance::Simulated,
        model.treatment()?,
    )?;
    Ok(Simulation { observed, latent: t })
}

#[cfg(test)]
mod tests;
