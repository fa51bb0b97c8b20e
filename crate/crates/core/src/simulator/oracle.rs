//! Ground truth of a configuration.
//!
//! Conditional expectations over V and the discount noise are computed in
//! closed form or by one-dimensional quadrature; the remaining average over
//! the covariate distribution is a Monte Carlo mean with its own standard
//! error.

use super::{DgpConfig, Model};
use crate::data::Dataset;
use crate::dml::NuisanceEstimates;
use crate::error::{Error, Result};
use crate::rng;
use crate::stats::{inv_mills, norm_cdf, norm_pdf, norm_sf};
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::OnceLock;

const CHUNK: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ComputedBy {
    Analytic,
    MonteCarlo { draws: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleTruth {
    /// Average partial effect of the discount among always buyers.
    pub theta_ab: f64,
    pub theta_ab_se: f64,
    /// Effect of a discount at or above the binarization threshold among
    /// always buyers, averaged over the arm-conditional discount distributions.
    pub delta_ab_binary: f64,
    pub delta_se: f64,
    /// Average derivative in d of Pr[S(0) = 0 | X, W, D = d, S = 1] among buyers.
    pub monotonicity_slope: f64,
    pub monotonicity_se: f64,
    /// Share of always buyers among surveyed buyers.
    pub always_buyer_share: f64,
    pub always_buyer_share_se: f64,
    /// How `theta_ab` was obtained.
    pub computed_by: ComputedBy,
    /// Covariate draws dropped from `delta_ab_binary` because one discount arm
    /// has no mass there.
    pub n_without_overlap: usize,
}

/// `∫_c^∞ tanh(v) φ(v) dv` tabulated on a fine grid.
struct TanhTail {
    lo: f64,
    h: f64,
    values: Vec<f64>,
}

impl TanhTail {
    fn build() -> Self {
        let (lo, hi, h): (f64, f64, f64) = (-12.0, 12.0, 1e-3);
        let m = ((hi - lo) / h).round() as usize;
        let f = |v: f64| v.tanh() * norm_pdf(v);
        let mut values = vec![0.0; m + 1];
        for k in (0..m).rev() {
            let a = lo + k as f64 * h;
            let b = a + h;
            values[k] = values[k + 1] + h / 6.0 * (f(a) + 4.0 * f(a + 0.5 * h) + f(b));
        }
        TanhTail { lo, h, values }
    }

    fn tail(&self, c: f64) -> f64 {
        let t = ((c - self.lo) / self.h).max(0.0);
        let k = t.floor() as usize;
        if k + 1 >= self.values.len() {
            return 0.0;
        }
        let frac = t - k as f64;
        self.values[k] * (1.0 - frac) + self.values[k + 1] * frac
    }

    /// `E[tanh V | V ≥ c]` for standard normal V.
    fn conditional_mean(&self, c: f64) -> f64 {
        if c > 8.0 {
            return c.tanh();
        }
        self.tail(c) / norm_sf(c)
    }
}

fn tanh_tail() -> &'static TanhTail {
    static TABLE: OnceLock<TanhTail> = OnceLock::new();
    TABLE.get_or_init(TanhTail::build)
}

/// `E[tanh V | always buyer, X, W]`.
pub(crate) fn tanh_v_given_always_buyer(alpha: f64, v_scale: f64) -> f64 {
    tanh_tail().conditional_mean(-alpha / v_scale)
}

/// Normal probability mass on `(a, b)` in standardized units, computed on
/// the side that avoids cancellation.
fn mass(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        norm_sf(a) - norm_sf(b)
    } else {
        norm_cdf(b) - norm_cdf(a)
    }
}

/// `∫_a^b z dN(μ, s²)` over `(a, b)`.
fn partial_mean(mu: f64, s: f64, a: f64, b: f64) -> f64 {
    let (za, zb) = ((a - mu) / s, (b - mu) / s);
    let phi = |z: f64| if z.is_finite() { norm_pdf(z) } else { 0.0 };
    mu * mass(za, zb) - s * (phi(zb) - phi(za))
}

/// Treatment-arm probability and arm-conditional mean discounts at X.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Arms {
    pub p1: f64,
    pub m0: f64,
    pub m1: f64,
}

impl Model {
    pub(crate) fn arms(&self, x: &[f64]) -> Arms {
        let c = &self.cfg;
        let mu = self.discount_mean(x);
        let s = c.discount_noise;
        let (lo, hi, b) = (c.min_discount, c.max_discount, c.binarize_at);
        if s == 0.0 {
            let d = mu.clamp(lo, hi);
            return if d >= b {
                Arms {
                    p1: 1.0,
                    m0: f64::NAN,
                    m1: d,
                }
            } else {
                Arms {
                    p1: 0.0,
                    m0: d,
                    m1: f64::NAN,
                }
            };
        }
        let p1 = norm_sf((b - mu) / s);
        let p0 = norm_cdf((b - mu) / s);
        let e1 = partial_mean(mu, s, b, hi) + hi * norm_sf((hi - mu) / s);
        let e0 = lo * norm_cdf((lo - mu) / s) + partial_mean(mu, s, lo, b);
        Arms {
            p1,
            m0: e0 / p0,
            m1: e1 / p1,
        }
    }

    /// Conditional effect of the discount among always buyers at (X, W).
    pub(crate) fn cape(&self, x: &[f64], w: &[f64]) -> f64 {
        let alpha = self.alpha(x, w);
        self.q(x) * (1.0 + self.cfg.v_outcome_loading * tanh_v_given_always_buyer(alpha, self.cfg.v_scale))
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Ratio {
    a: f64,
    b: f64,
    aa: f64,
    ab: f64,
    bb: f64,
}

impl Ratio {
    fn add(&mut self, a: f64, b: f64) {
        self.a += a;
        self.b += b;
        self.aa += a * a;
        self.ab += a * b;
        self.bb += b * b;
    }

    fn merge(&mut self, o: &Ratio) {
        self.a += o.a;
        self.b += o.b;
        self.aa += o.aa;
        self.ab += o.ab;
        self.bb += o.bb;
    }

    /// Ratio of sums with its delta-method standard error.
    fn estimate(&self) -> (f64, f64) {
        let r = self.a / self.b;
        let ss = (self.aa - 2.0 * r * self.ab + r * r * self.bb).max(0.0);
        (r, ss.sqrt() / self.b)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    theta: Ratio,
    delta: Ratio,
    slope: Ratio,
    share: Ratio,
    no_overlap: usize,
}

fn chunk_sums(model: &Model, seed: u64, chunk: usize, draws: usize) -> Sums {
    let c = &model.cfg;
    let mut r = rng::stream(seed, "oracle", chunk as u64);
    let mut s = Sums::default();
    for _ in 0..draws {
        let (x, w) = model.draw_covariates(&mut r);
        let eps: f64 = r.sample(StandardNormal);
        let alpha = model.alpha(&x, &w);
        let p_ab = norm_cdf(alpha / c.v_scale);
        let cape = model.cape(&x, &w);
        s.theta.add(p_ab * cape, p_ab);

        let arms = model.arms(&x);
        if arms.p1 > 0.0 && arms.p1 < 1.0 && arms.m0.is_finite() && arms.m1.is_finite() {
            s.delta.add(p_ab * cape * (arms.m1 - arms.m0), p_ab);
        } else {
            s.no_overlap += 1;
        }

        let d = model.discount(&x, eps);
        let z = model.selection_index(alpha, d) / c.v_scale;
        let p_buy = norm_cdf(z);
        s.share.add(p_ab, p_buy);
        // p_ab · φ(z) / Φ(z)² · slope / v_scale, weighted by Φ(z)
        s.slope.add(p_ab * inv_mills(z) * c.selection_slope / c.v_scale, p_buy);
    }
    s
}

/// Computes the population truths of `cfg` from `draws` covariate draws.
pub fn oracle_truth(cfg: &DgpConfig, draws: usize) -> Result<OracleTruth> {
    let model = Model::new(cfg)?;
    if draws < 2 {
        return Err(Error::validation("oracle needs at least 2 draws"));
    }
    let seed = rng::derive_seed(cfg.seed, "oracle-truth", 0);
    let n_chunks = draws.div_ceil(CHUNK);
    let parts: Vec<Sums> = (0..n_chunks)
        .into_par_iter()
        .map(|k| chunk_sums(&model, seed, k, CHUNK.min(draws - k * CHUNK)))
        .collect();
    let mut s = Sums::default();
    for p in &parts {
        s.theta.merge(&p.theta);
        s.delta.merge(&p.delta);
        s.slope.merge(&p.slope);
        s.share.merge(&p.share);
        s.no_overlap += p.no_overlap;
    }
    let analytic = cfg.v_outcome_loading == 0.0 && cfg.outcome_coef.iter().all(|&c| c == 0.0);
    let (theta_ab, theta_ab_se, computed_by) = if analytic {
        (cfg.outcome_intercept.max(0.0), 0.0, ComputedBy::Analytic)
    } else {
        let (t, se) = s.theta.estimate();
        (t, se, ComputedBy::MonteCarlo { draws })
    };
    let (delta_ab_binary, delta_se) = if s.delta.b > 0.0 {
        s.delta.estimate()
    } else {
        (f64::NAN, f64::NAN)
    };
    let (monotonicity_slope, monotonicity_se) = s.slope.estimate();
    let (always_buyer_share, always_buyer_share_se) = s.share.estimate();
    Ok(OracleTruth {
        theta_ab,
        theta_ab_se,
        delta_ab_binary,
        delta_se,
        monotonicity_slope,
        monotonicity_se,
        always_buyer_share,
        always_buyer_share_se,
        computed_by,
        n_without_overlap: s.no_overlap,
    })
}

fn check_columns(model: &Model, ds: &Dataset) -> Result<()> {
    if ds.x_columns.len() != model.cfg.p_x || ds.w_columns.len() != model.cfg.p_w {
        return Err(Error::validation("dataset covariates do not match the configuration"));
    }
    Ok(())
}

/// True nuisance functions of the binary-discount contrast among always
/// buyers, evaluated at the rows of `ds`.
pub fn oracle_nuisances(cfg: &DgpConfig, ds: &Dataset) -> Result<NuisanceEstimates> {
    let model = Model::new(cfg)?;
    check_columns(&model, ds)?;
    let n = ds.len();
    let mut out = NuisanceEstimates {
        mu0: Vec::with_capacity(n),
        mu1: Vec::with_capacity(n),
        p1: Vec::with_capacity(n),
        fold: vec![0; n],
    };
    for r in &ds.records {
        let arms = model.arms(&r.x_demand);
        if !(arms.p1 > 0.0 && arms.p1 < 1.0) {
            return Err(Error::estimation("a row has no overlap between discount arms"));
        }
        let cape = model.cape(&r.x_demand, &r.w_personal);
        out.mu0.push(cape * arms.m0);
        out.mu1.push(cape * arms.m1);
        out.p1.push(arms.p1);
    }
    Ok(out)
}

/// True conditional effect among always buyers at each row of `ds`.
pub fn oracle_cape(cfg: &DgpConfig, ds: &Dataset) -> Result<Vec<f64>> {
    let model = Model::new(cfg)?;
    check_columns(&model, ds)?;
    Ok(ds
        .records
        .iter()
        .map(|r| model.cape(&r.x_demand, &r.w_personal))
        .collect())
}
