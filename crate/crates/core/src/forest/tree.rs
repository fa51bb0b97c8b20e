//! CART trees grown on a subsample with per-node feature sampling.

use crate::matrix::Matrix;
use crate::rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Task {
    Regression,
    Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Impurity decrease (SSE or n-weighted Gini) achieved by this split.
        decrease: f64,
    },
    Leaf {
        /// Mean target (regression) or share of class 1 (classification).
        value: f64,
        n: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    /// Training rows drawn for this tree, sorted; repeats under bootstrap.
    pub subsample: Vec<u32>,
}

impl Tree {
    /// Index of the leaf node reached by `row`.
    #[inline]
    pub fn leaf_index(&self, x: &Matrix, row: usize) -> usize {
        let mut k = 0;
        loop {
            match &self.nodes[k] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    k = if x.get(row, *feature) <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                Node::Leaf { .. } => return k,
            }
        }
    }

    #[inline]
    pub fn predict_row(&self, x: &Matrix, row: usize) -> f64 {
        match self.nodes[self.leaf_index(x, row)] {
            Node::Leaf { value, .. } => value,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn predict_slice(&self, row: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match &self.nodes[k] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => k = if row[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { value, .. } => return *value,
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn total_decrease(&self) -> f64 {
        self.nodes
            .iter()
            .map(|n| match n {
                Node::Split { decrease, .. } => *decrease,
                Node::Leaf { .. } => 0.0,
            })
            .sum()
    }

    /// Sorted, deduplicated in-bag rows.
    pub fn in_bag(&self) -> Vec<u32> {
        let mut v = self.subsample.clone();
        v.dedup();
        v
    }
}

pub(crate) struct GrowConfig {
    pub task: Task,
    pub mtry: usize,
    pub min_node_size: usize,
    pub max_depth: Option<usize>,
}

/// Candidate split found for one node.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Candidate {
    fn beats(&self, other: &Option<Candidate>) -> bool {
        match other {
            None => true,
            Some(b) => {
                self.gain > b.gain
                    || (self.gain == b.gain
                        && (self.feature < b.feature || (self.feature == b.feature && self.threshold < b.threshold)))
            }
        }
    }
}

/// Midpoint that stays strictly below `hi` so `x <= t` separates `lo` from `hi`.
#[inline]
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) * 0.5;
    if m >= hi {
        lo
    } else {
        m
    }
}

/// Picks `mtry` features with the smallest keyed hashes at this node. Keys
/// come from feature identities, so the chosen set follows a feature when
/// columns are reordered.
pub(crate) fn sample_features(seed: u64, node_seq: u64, feature_keys: &[u64], mtry: usize, out: &mut Vec<usize>) {
    out.clear();
    if mtry >= feature_keys.len() {
        out.extend(0..feature_keys.len());
        return;
    }
    let mut keyed: Vec<(u64, usize)> = feature_keys
        .iter()
        .enumerate()
        .map(|(j, &k)| (rng::hash3(seed, node_seq, k), j))
        .collect();
    keyed.select_nth_unstable(mtry - 1);
    out.extend(keyed[..mtry].iter().map(|&(_, j)| j));
    out.sort_unstable();
}

pub(crate) struct Grower<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    cfg: &'a GrowConfig,
    seed: u64,
    feature_keys: &'a [u64],
    pairs: Vec<(f64, f64)>,
    features: Vec<usize>,
}

impl<'a> Grower<'a> {
    pub fn new(x: &'a Matrix, y: &'a [f64], cfg: &'a GrowConfig, seed: u64, feature_keys: &'a [u64]) -> Self {
        Grower {
            x,
            y,
            cfg,
            seed,
            feature_keys,
            pairs: Vec::new(),
            features: Vec::new(),
        }
    }

    fn leaf_value(&self, idx: &[usize]) -> f64 {
        idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64
    }

    fn is_pure(&self, idx: &[usize]) -> bool {
        let first = self.y[idx[0]];
        idx.iter().all(|&i| self.y[i] == first)
    }

    fn best_split(&mut self, idx: &[usize], node_seq: u64) -> Option<Candidate> {
        let m = idx.len();
        let min = self.cfg.min_node_size.max(1);
        let mut features = std::mem::take(&mut self.features);
        sample_features(self.seed, node_seq, self.feature_keys, self.cfg.mtry, &mut features);
        let mut best: Option<Candidate> = None;
        let total: f64 = idx.iter().map(|&i| self.y[i]).sum();
        for &f in &features {
            let col = self.x.column(f);
            self.pairs.clear();
            self.pairs.extend(idx.iter().map(|&i| (col[i], self.y[i])));
            self.pairs
                .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            if self.pairs[0].0 == self.pairs[m - 1].0 {
                continue;
            }
            let parent = match self.cfg.task {
                Task::Regression => total * total / m as f64,
                Task::Classification => gini_n(m as f64, total),
            };
            let mut left_sum = 0.0;
            for k in 1..m {
                left_sum += self.pairs[k - 1].1;
                if k < min || m - k < min {
                    continue;
                }
                let (lo, hi) = (self.pairs[k - 1].0, self.pairs[k].0);
                if lo == hi {
                    continue;
                }
                let nl = k as f64;
                let nr = (m - k) as f64;
                let right_sum = total - left_sum;
                let gain = match self.cfg.task {
                    Task::Regression => left_sum * left_sum / nl + right_sum * right_sum / nr - parent,
                    Task::Classification => parent - gini_n(nl, left_sum) - gini_n(nr, right_sum),
                };
                if gain <= 0.0 {
                    continue;
                }
                let cand = Candidate {
                    feature: f,
                    threshold: midpoint(lo, hi),
                    gain,
                };
                if cand.beats(&best) {
                    best = Some(cand);
                }
            }
        }
        self.features = features;
        best
    }

    /// Grows a tree over `sample` (row indices, repeats allowed).
    pub fn grow(mut self, mut sample: Vec<usize>) -> Vec<Node> {
        let mut nodes = vec![Node::Leaf { value: 0.0, n: 0 }];
        // (node id, start, end, depth)
        let mut stack = vec![(0usize, 0usize, sample.len(), 0usize)];
        let mut node_seq = 0u64;
        let mut scratch: Vec<usize> = Vec::new();
        while let Some((id, start, end, depth)) = stack.pop() {
            node_seq += 1;
            let idx = &sample[start..end];
            let m = idx.len();
            let depth_ok = self.cfg.max_depth.is_none_or(|d| depth < d);
            let split = if depth_ok && m >= 2 * self.cfg.min_node_size.max(1) && !self.is_pure(idx) {
                self.best_split(idx, node_seq)
            } else {
                None
            };
            let Some(c) = split else {
                nodes[id] = Node::Leaf {
                    value: self.leaf_value(idx),
                    n: m,
                };
                continue;
            };
            let col = self.x.column(c.feature);
            scratch.clear();
            scratch.extend(idx.iter().copied().filter(|&i| col[i] <= c.threshold));
            let n_left = scratch.len();
            scratch.extend(idx.iter().copied().filter(|&i| col[i] > c.threshold));
            sample[start..end].copy_from_slice(&scratch);
            let left = nodes.len();
            nodes.push(Node::Leaf { value: 0.0, n: 0 });
            let right = nodes.len();
            nodes.push(Node::Leaf { value: 0.0, n: 0 });
            nodes[id] = Node::Split {
                feature: c.feature,
                threshold: c.threshold,
                left,
                right,
                decrease: c.gain,
            };
            stack.push((right, start + n_left, end, depth + 1));
            stack.push((left, start, start + n_left, depth + 1));
        }
        nodes
    }
}

/// `n * Gini` for a node with `n` rows of which `ones` are class 1.
#[inline]
fn gini_n(n: f64, ones: f64) -> f64 {
    2.0 * ones * (n - ones) / n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_separates_adjacent_floats() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let t = midpoint(a, b);
        assert!(a <= t && t < b);
        assert_eq!(midpoint(1.0, 3.0), 2.0);
    }

    #[test]
    fn feature_sampling_follows_identity() {
        let keys = [11u64, 22, 33, 44, 55];
        let mut a = Vec::new();
        sample_features(5, 9, &keys, 2, &mut a);
        let permuted = [55u64, 44, 33, 22, 11];
        let mut b = Vec::new();
        sample_features(5, 9, &permuted, 2, &mut b);
        let ka: Vec<u64> = a.iter().map(|&j| keys[j]).collect();
        let mut kb: Vec<u64> = b.iter().map(|&j| permuted[j]).collect();
        kb.sort_unstable();
        let mut ka = ka;
        ka.sort_unstable();
        assert_eq!(ka, kb);
    }

    #[test]
    fn gini_decrease_of_perfect_split() {
        // 4 rows, 2 ones: n*Gini = 2, children pure
        assert_eq!(gini_n(4.0, 2.0), 2.0);
        assert_eq!(gini_n(2.0, 2.0), 0.0);
    }
}
