//! Random forests for regression and binary classification.
//!
//! Trees are grown on subsamples drawn without replacement (fraction 0.632 by
//! default, bootstrap optional), with `mtry` features sampled at each node and
//! an exhaustive search over midpoints between sorted distinct values. Each
//! tree draws from its own seed stream, so results do not depend on how trees
//! are scheduled across threads.
//!
//! Regression targets are centered on the first training outcome before
//! fitting. Leaf means, split gains and out-of-bag predictions are computed on
//! the centered scale, which makes the fitted structure exactly invariant to
//! adding a constant to the outcome whenever that addition is itself exact.

mod importance;
pub(crate) mod tree;
mod tune;

pub use importance::{variable_importance, ImportanceTable};
pub use tree::{Node, Task, Tree};
pub use tune::{tune_forest, TuneResult};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;
use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;
use tree::{GrowConfig, Grower};

pub const FOREST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features tried per split; `None` means ⌈√p⌉ (classification) or ⌈p/3⌉ (regression).
    pub mtry: Option<usize>,
    /// Minimum rows per leaf; `None` means 5 (regression) or 1 (classification).
    pub min_node_size: Option<usize>,
    pub subsample_frac: f64,
    /// Draw `n` rows with replacement instead of subsampling.
    pub bootstrap: bool,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 1000,
            mtry: None,
            min_node_size: None,
            subsample_frac: 0.632,
            bootstrap: false,
            max_depth: None,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn with_trees(n_trees: usize, seed: u64) -> Self {
        ForestParams {
            n_trees,
            seed,
            ..ForestParams::default()
        }
    }

    pub fn resolved_mtry(&self, task: Task, p: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| match task {
                Task::Classification => (p as f64).sqrt().ceil() as usize,
                Task::Regression => p.div_ceil(3),
            })
            .clamp(1, p.max(1))
    }

    pub fn resolved_min_node_size(&self, task: Task) -> usize {
        self.min_node_size.unwrap_or(match task {
            Task::Regression => 5,
            Task::Classification => 1,
        })
    }
}

/// Fitted ensemble with out-of-bag bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub version: u32,
    pub task: Task,
    pub params: ForestParams,
    pub feature_names: Vec<String>,
    /// Added to centered leaf values at prediction time (regression only).
    pub offset: f64,
    pub trees: Vec<Tree>,
    pub n_train: usize,
    oob_sum: Vec<f64>,
    oob_count: Vec<u32>,
}

/// Out-of-bag predictions for the training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct OobPrediction {
    /// Prediction on the outcome scale; NaN where uncovered.
    pub values: Vec<f64>,
    /// Prediction minus the forest offset; NaN where uncovered.
    pub centered: Vec<f64>,
    /// Number of trees whose subsample excludes the row.
    pub n_trees: Vec<u32>,
    /// True where no tree left the row out.
    pub uncovered: Vec<bool>,
}

impl OobPrediction {
    pub fn n_uncovered(&self) -> usize {
        self.uncovered.iter().filter(|&&u| u).count()
    }
}

fn feature_keys(names: &[String]) -> Vec<u64> {
    names.iter().map(|n| rng::fnv1a(n.as_bytes())).collect()
}

/// Fits a forest of `params.n_trees` trees.
pub fn fit_forest(x: &Matrix, y: &[f64], task: Task, params: &ForestParams) -> Result<Forest> {
    let n = x.n_rows();
    let p = x.n_cols();
    if n == 0 {
        return Err(Error::validation("cannot fit a forest on zero rows"));
    }
    if y.len() != n {
        return Err(Error::validation(format!("{} outcomes for {n} rows", y.len())));
    }
    if p == 0 {
        return Err(Error::validation("forest needs at least one feature"));
    }
    if params.n_trees == 0 {
        return Err(Error::validation("n_trees must be >= 1"));
    }
    if !(params.subsample_frac > 0.0 && params.subsample_frac <= 1.0) {
        return Err(Error::validation("subsample_frac must be in (0, 1]"));
    }
    if let Some(m) = params.mtry {
        if m == 0 || m > p {
            return Err(Error::validation(format!("mtry {m} not in [1, {p}]")));
        }
    }
    if y.iter().any(|v| !v.is_finite()) || (0..p).any(|j| x.column(j).iter().any(|v| !v.is_finite())) {
        return Err(Error::validation("forest inputs contain non-finite values"));
    }
    if task == Task::Classification && y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::validation("classification outcome must be 0/1"));
    }
    let min_node_size = params.resolved_min_node_size(task);
    if n < 2 * min_node_size {
        return Err(Error::validation(format!(
            "{n} rows is fewer than 2 * min_node_size ({min_node_size})"
        )));
    }
    let constant_x = (0..p).all(|j| {
        let c = x.column(j);
        c.iter().all(|&v| v == c[0])
    });
    if constant_x && y.iter().any(|&v| v != y[0]) {
        log::warn!("all features are constant; trees reduce to their root");
    }

    let offset = match task {
        Task::Regression => y[0],
        Task::Classification => 0.0,
    };
    let target: Vec<f64> = y.iter().map(|v| v - offset).collect();
    let cfg = GrowConfig {
        task,
        mtry: params.resolved_mtry(task, p),
        min_node_size,
        max_depth: params.max_depth,
    };
    let keys = feature_keys(x.names());
    let sample_size = ((params.subsample_frac * n as f64).round() as usize).clamp(1, n);

    let trees: Vec<Tree> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let tree_seed = rng::derive_seed(params.seed, "forest-tree", t as u64);
            let mut r = rng::stream(tree_seed, "sample", 0);
            let mut sample: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| r.random_range(0..n)).collect()
            } else {
                index::sample(&mut r, n, sample_size).into_vec()
            };
            sample.sort_unstable();
            let nodes = Grower::new(x, &target, &cfg, tree_seed, &keys).grow(sample.clone());
            Tree {
                nodes,
                subsample: sample.into_iter().map(|i| i as u32).collect(),
            }
        })
        .collect();

    // Out-of-bag accumulation in tree order keeps sums bit-stable.
    let per_tree: Vec<Vec<(u32, f64)>> = trees
        .par_iter()
        .map(|tree| {
            let in_bag = tree.in_bag();
            let mut out = Vec::with_capacity(n - in_bag.len());
            let mut k = 0;
            for i in 0..n as u32 {
                if k < in_bag.len() && in_bag[k] == i {
                    k += 1;
                    continue;
                }
                out.push((i, tree.predict_row(x, i as usize)));
            }
            out
        })
        .collect();
    let mut oob_sum = vec![0.0; n];
    let mut oob_count = vec![0u32; n];
    for preds in per_tree {
        for (i, v) in preds {
            oob_sum[i as usize] += v;
            oob_count[i as usize] += 1;
        }
    }

    let mut resolved = params.clone();
    resolved.mtry = Some(cfg.mtry);
    resolved.min_node_size = Some(min_node_size);
    Ok(Forest {
        version: FOREST_FORMAT_VERSION,
        task,
        params: resolved,
        feature_names: x.names().to_vec(),
        offset,
        trees,
        n_train: n,
        oob_sum,
        oob_count,
    })
}

impl Forest {
    fn check_columns(&self, x: &Matrix) -> Result<()> {
        if x.names() != self.feature_names.as_slice() {
            return Err(Error::validation(format!(
                "prediction columns {:?} do not match training columns {:?}",
                x.names(),
                self.feature_names
            )));
        }
        Ok(())
    }

    /// Mean of tree predictions on the centered scale.
    pub fn predict_centered(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.check_columns(x)?;
        let n = x.n_rows();
        let sums: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| self.trees.iter().map(|t| t.predict_row(x, i)).sum::<f64>())
            .collect();
        let b = self.trees.len() as f64;
        Ok(sums.into_iter().map(|s| s / b).collect())
    }

    /// Regression: mean of leaf means. Classification: mean of leaf class-1
    /// shares, a probability.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self.predict_centered(x)?.into_iter().map(|v| v + self.offset).collect())
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.feature_names.len() {
            return Err(Error::validation("row length does not match training columns"));
        }
        let s: f64 = self.trees.iter().map(|t| t.predict_slice(row)).sum();
        Ok(s / self.trees.len() as f64 + self.offset)
    }

    /// Averages, for each training row, the trees whose subsample excludes it.
    pub fn oob_predict(&self) -> OobPrediction {
        let n = self.n_train;
        let mut values = vec![f64::NAN; n];
        let mut centered = vec![f64::NAN; n];
        let mut uncovered = vec![false; n];
        for i in 0..n {
            if self.oob_count[i] == 0 {
                uncovered[i] = true;
            } else {
                let c = self.oob_sum[i] / f64::from(self.oob_count[i]);
                centered[i] = c;
                values[i] = c + self.offset;
            }
        }
        OobPrediction {
            values,
            centered,
            n_trees: self.oob_count.clone(),
            uncovered,
        }
    }

    /// Out-of-bag mean squared error over covered rows (Brier score for
    /// classification).
    pub fn oob_mse(&self, y: &[f64]) -> f64 {
        let oob = self.oob_predict();
        let (mut s, mut k) = (0.0, 0usize);
        for ((&yi, &v), &unc) in y.iter().zip(&oob.values).zip(&oob.uncovered) {
            if !unc {
                let e = yi - v;
                s += e * e;
                k += 1;
            }
        }
        if k == 0 {
            f64::NAN
        } else {
            s / k as f64
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(f), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Forest> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let forest: Forest = serde_json::from_reader(std::io::BufReader::new(f))?;
        if forest.version != FOREST_FORMAT_VERSION {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                message: format!("unsupported forest format version {}", forest.version),
            });
        }
        Ok(forest)
    }
}

/// Share of rows where `I{prob >= threshold}` equals the label.
pub fn classification_accuracy(probs: &[f64], actual: &[f64], threshold: f64) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::validation("accuracy of empty vectors"));
    }
    if probs.len() != actual.len() {
        return Err(Error::validation("probabilities and labels differ in length"));
    }
    let hits = probs
        .iter()
        .zip(actual)
        .filter(|(p, a)| f64::from(u8::from(**p >= threshold)) == **a)
        .count();
    Ok(hits as f64 / probs.len() as f64)
}
