//! Data-generating process configuration and its key-value text format.
//!
//! ```text
//! # comment
//! n = 14000
//! discount_coef = 0.06, 0.04
//! ```
//!
//! Coefficient lists may be shorter than the covariate count; missing
//! entries are zero.

use crate::error::{Error, Result};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

pub const KEYS: &[&str] = &[
    "n",
    "p_x",
    "x_binary",
    "p_w",
    "w_binary",
    "discount_intercept",
    "discount_coef",
    "discount_noise",
    "min_discount",
    "max_discount",
    "selection_intercept",
    "selection_coef_x",
    "selection_coef_w",
    "selection_shift",
    "selection_slope",
    "v_scale",
    "outcome_intercept",
    "outcome_coef",
    "v_outcome_loading",
    "binarize_at",
    "seed",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DgpConfig {
    /// Customers drawn; only those who buy appear in the survey.
    pub n: usize,
    pub p_x: usize,
    /// The last `x_binary` demand covariates are Bernoulli(0.5), the rest N(0, 1).
    pub x_binary: usize,
    pub p_w: usize,
    pub w_binary: usize,
    /// Discount: D = clip(intercept + coef·X + noise·ε, min_discount, max_discount).
    pub discount_intercept: f64,
    pub discount_coef: Vec<f64>,
    pub discount_noise: f64,
    pub min_discount: f64,
    pub max_discount: f64,
    /// Selection: S(d) = I{α(X, W) + shift·I{d > 0} + slope·d + v_scale·V ≥ 0}
    /// with α = intercept + coef_x·X + coef_w·W.
    pub selection_intercept: f64,
    pub selection_coef_x: Vec<f64>,
    pub selection_coef_w: Vec<f64>,
    pub selection_shift: f64,
    pub selection_slope: f64,
    pub v_scale: f64,
    /// Outcome: Pr[Y(d) = 1] = min(1, q(X)·(1 + loading·tanh V)·d) with
    /// q = max(0, intercept + Σ coef_j·tanh(x_j)).
    pub outcome_intercept: f64,
    pub outcome_coef: Vec<f64>,
    pub v_outcome_loading: f64,
    pub binarize_at: f64,
    pub seed: u64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        DgpConfig {
            n: 14_000,
            p_x: 6,
            x_binary: 2,
            p_w: 4,
            w_binary: 2,
            discount_intercept: 0.3,
            discount_coef: vec![0.06, 0.04],
            discount_noise: 0.15,
            min_discount: 0.01,
            max_discount: 0.7,
            selection_intercept: -0.65,
            selection_coef_x: vec![0.0, 0.0, 0.3, -0.2],
            selection_coef_w: vec![0.2, 0.0, 0.3],
            selection_shift: 0.4,
            selection_slope: 2.0,
            v_scale: 1.0,
            outcome_intercept: 0.06,
            outcome_coef: vec![0.02, 0.0, 0.0, 0.0, 0.105],
            v_outcome_loading: 0.8,
            binarize_at: 0.3,
            seed: 1,
        }
    }
}

fn padded(v: &[f64], len: usize) -> Vec<f64> {
    let mut out = v.to_vec();
    out.resize(len, 0.0);
    out
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::validation(m));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if self.x_binary > self.p_x || self.w_binary > self.p_w {
            return bad("more binary covariates than covariates".into());
        }
        for (name, v, p) in [
            ("discount_coef", &self.discount_coef, self.p_x),
            ("selection_coef_x", &self.selection_coef_x, self.p_x),
            ("selection_coef_w", &self.selection_coef_w, self.p_w),
            ("outcome_coef", &self.outcome_coef, self.p_x),
        ] {
            if v.len() > p {
                return bad(format!("{name} has {} entries for {p} covariates", v.len()));
            }
            if v.iter().any(|c| !c.is_finite()) {
                return bad(format!("{name} contains non-finite values"));
            }
        }
        if !(self.min_discount > 0.0 && self.min_discount < self.max_discount && self.max_discount <= 1.0) {
            return bad("need 0 < min_discount < max_discount <= 1".into());
        }
        if !(self.binarize_at > self.min_discount && self.binarize_at <= self.max_discount) {
            return bad("binarize_at must lie inside the discount range".into());
        }
        if !(self.discount_noise >= 0.0) || !(self.v_scale > 0.0) {
            return bad("discount_noise must be >= 0 and v_scale > 0".into());
        }
        if !(self.selection_slope >= 0.0) || !(self.selection_shift >= 0.0) {
            return bad("selection_slope and selection_shift must be >= 0 for monotone selection".into());
        }
        if !(self.v_outcome_loading.abs() <= 1.0) {
            return bad("v_outcome_loading must lie in [-1, 1]".into());
        }
        let q_max = self.outcome_intercept.max(0.0) + self.outcome_coef.iter().map(|c| c.abs()).sum::<f64>();
        if q_max * (1.0 + self.v_outcome_loading.abs()) * self.max_discount > 1.0 {
            return bad("outcome probabilities could exceed 1; the effect would not be linear in the discount".into());
        }
        Ok(())
    }

    pub fn discount_coef(&self) -> Vec<f64> {
        padded(&self.discount_coef, self.p_x)
    }

    pub fn selection_coef_x(&self) -> Vec<f64> {
        padded(&self.selection_coef_x, self.p_x)
    }

    pub fn selection_coef_w(&self) -> Vec<f64> {
        padded(&self.selection_coef_w, self.p_w)
    }

    pub fn outcome_coef(&self) -> Vec<f64> {
        padded(&self.outcome_coef, self.p_x)
    }

    /// Parses `key = value` lines on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = DgpConfig::default();
        for (k, v) in parse_pairs(text)? {
            cfg.set(&k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        DgpConfig::parse(&text)
    }

    pub fn is_key(key: &str) -> bool {
        KEYS.contains(&key)
    }

    /// Sets one field from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = |v: &str| -> Result<f64> {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::validation(format!("{key}: cannot parse {v:?} as a number")))
        };
        let count = |v: &str| -> Result<usize> {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::validation(format!("{key}: cannot parse {v:?} as a count")))
        };
        let list = |v: &str| -> Result<Vec<f64>> {
            if v.trim().is_empty() {
                return Ok(Vec::new());
            }
            v.split(',').map(num).collect()
        };
        match key {
            "n" => self.n = count(value)?,
            "p_x" => self.p_x = count(value)?,
            "x_binary" => self.x_binary = count(value)?,
            "p_w" => self.p_w = count(value)?,
            "w_binary" => self.w_binary = count(value)?,
            "discount_intercept" => self.discount_intercept = num(value)?,
            "discount_coef" => self.discount_coef = list(value)?,
            "discount_noise" => self.discount_noise = num(value)?,
            "min_discount" => self.min_discount = num(value)?,
            "max_discount" => self.max_discount = num(value)?,
            "selection_intercept" => self.selection_intercept = num(value)?,
            "selection_coef_x" => self.selection_coef_x = list(value)?,
            "selection_coef_w" => self.selection_coef_w = list(value)?,
            "selection_shift" => self.selection_shift = num(value)?,
            "selection_slope" => self.selection_slope = num(value)?,
            "v_scale" => self.v_scale = num(value)?,
            "outcome_intercept" => self.outcome_intercept = num(value)?,
            "outcome_coef" => self.outcome_coef = list(value)?,
            "v_outcome_loading" => self.v_outcome_loading = num(value)?,
            "binarize_at" => self.binarize_at = num(value)?,
            "seed" => {
                self.seed = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::validation(format!("seed: cannot parse {value:?}")))?
            }
            _ => return Err(Error::validation(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    /// Writes every field; `parse` of the output reproduces the config.
    pub fn to_text(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|c| format!("{c:?}")).collect::<Vec<_>>().join(", ");
        let mut s = String::new();
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "p_x = {}", self.p_x);
        let _ = writeln!(s, "x_binary = {}", self.x_binary);
        let _ = writeln!(s, "p_w = {}", self.p_w);
        let _ = writeln!(s, "w_binary = {}", self.w_binary);
        let _ = writeln!(s, "discount_intercept = {:?}", self.discount_intercept);
        let _ = writeln!(s, "discount_coef = {}", list(&self.discount_coef));
        let _ = writeln!(s, "discount_noise = {:?}", self.discount_noise);
        let _ = writeln!(s, "min_discount = {:?}", self.min_discount);
        let _ = writeln!(s, "max_discount = {:?}", self.max_discount);
        let _ = writeln!(s, "selection_intercept = {:?}", self.selection_intercept);
        let _ = writeln!(s, "selection_coef_x = {}", list(&self.selection_coef_x));
        let _ = writeln!(s, "selection_coef_w = {}", list(&self.selection_coef_w));
        let _ = writeln!(s, "selection_shift = {:?}", self.selection_shift);
        let _ = writeln!(s, "selection_slope = {:?}", self.selection_slope);
        let _ = writeln!(s, "v_scale = {:?}", self.v_scale);
        let _ = writeln!(s, "outcome_intercept = {:?}", self.outcome_intercept);
        let _ = writeln!(s, "outcome_coef = {}", list(&self.outcome_coef));
        let _ = writeln!(s, "v_outcome_loading = {:?}", self.v_outcome_loading);
        let _ = writeln!(s, "binarize_at = {:?}", self.binarize_at);
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }
}

/// Splits `key = value` lines, skipping blanks and `#` comments. Later
/// duplicates win.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::validation(format!("line {}: expected key = value", lineno + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let cfg = DgpConfig {
            selection_slope: 0.0,
            discount_coef: vec![0.1 / 3.0],
            seed: u64::MAX,
            ..DgpConfig::default()
        };
        let back = DgpConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn comments_and_unknown_keys() {
        let cfg = DgpConfig::parse("# x\n\nn = 500 # customers\n").unwrap();
        assert_eq!(cfg.n, 500);
        assert!(DgpConfig::parse("colour = blue").is_err());
        assert!(DgpConfig::parse("n 5").is_err());
        assert!(DgpConfig::is_key("selection_slope"));
        assert!(!DgpConfig::is_key("trees"));
    }

    #[test]
    fn invalid_configs() {
        for text in [
            "selection_slope = -0.1",
            "v_outcome_loading = 1.5",
            "outcome_intercept = 2",
            "discount_coef = 1, 2, 3, 4, 5, 6, 7",
            "binarize_at = 0.9",
            "x_binary = 7",
        ] {
            assert!(DgpConfig::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn short_lists_pad_with_zeros() {
        let cfg = DgpConfig::default();
        assert_eq!(cfg.discount_coef(), vec![0.06, 0.04, 0.0, 0.0, 0.0, 0.0]);
    }
}
