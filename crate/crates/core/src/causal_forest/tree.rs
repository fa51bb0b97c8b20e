//! Honest causal trees on residualized outcome and treatment.

use crate::forest::tree::{midpoint, sample_features};
use crate::forest::Node;
use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};

/// Leaf sums over the estimation half: `Σ y·d`, `Σ d²` and the row count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LeafStats {
    pub syd: f64,
    pub sdd: f64,
    pub n: u32,
}

impl LeafStats {
    fn add(&mut self, y: f64, d: f64) {
        self.syd += y * d;
        self.sdd += d * d;
        self.n += 1;
    }

    /// Residual-on-residual slope `Σ y·d / Σ d²`.
    pub fn effect(&self) -> f64 {
        self.syd / self.sdd
    }

    pub fn usable(&self) -> bool {
        self.n > 0 && self.sdd > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalTree {
    pub nodes: Vec<Node>,
    /// Per node; meaningful for reachable leaves.
    pub stats: Vec<LeafStats>,
    /// Rows used to choose splits, sorted.
    pub split_half: Vec<u32>,
    /// Rows used to estimate leaf effects, sorted.
    pub estimate_half: Vec<u32>,
    /// Index of the tree group sharing this tree's subsample.
    pub group: u32,
    /// False when the whole estimation half has zero treatment variation.
    pub usable: bool,
}

impl CausalTree {
    #[inline]
    pub fn leaf_of_slice(&self, row: &[f64]) -> usize {
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
                Node::Leaf { .. } => return k,
            }
        }
    }

    #[inline]
    pub fn leaf_of_row(&self, x: &Matrix, i: usize) -> usize {
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
                    k = if x.get(i, *feature) <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                Node::Leaf { .. } => return k,
            }
        }
    }

    pub fn n_leaves_reachable(&self) -> usize {
        let mut stack = vec![0usize];
        let mut count = 0;
        while let Some(k) = stack.pop() {
            match &self.nodes[k] {
                Node::Split { left, right, .. } => {
                    stack.push(*left);
                    stack.push(*right);
                }
                Node::Leaf { .. } => count += 1,
            }
        }
        count
    }
}

pub(crate) struct CausalGrower<'a> {
    pub x: &'a Matrix,
    pub y: &'a [f64],
    pub d: &'a [f64],
    pub mtry: usize,
    pub min_node_size: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
    pub feature_keys: &'a [u64],
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl CausalGrower<'_> {
    fn best_split(
        &self,
        idx: &[usize],
        node_seq: u64,
        features: &mut Vec<usize>,
        order: &mut Vec<(f64, usize)>,
    ) -> Option<Split> {
        let m = idx.len();
        let min = self.min_node_size.max(1);
        sample_features(self.seed, node_seq, self.feature_keys, self.mtry, features);
        let (mut syd, mut sdd) = (0.0, 0.0);
        for &i in idx {
            syd += self.y[i] * self.d[i];
            sdd += self.d[i] * self.d[i];
        }
        if sdd <= 0.0 {
            return None;
        }
        let tau = syd / sdd;
        let mut best: Option<Split> = None;
        for &f in features.iter() {
            let col = self.x.column(f);
            order.clear();
            order.extend(idx.iter().map(|&i| (col[i], i)));
            order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if order[0].0 == order[m - 1].0 {
                continue;
            }
            let (mut lyd, mut ldd) = (0.0, 0.0);
            for k in 1..m {
                let i = order[k - 1].1;
                lyd += self.y[i] * self.d[i];
                ldd += self.d[i] * self.d[i];
                if k < min || m - k < min {
                    continue;
                }
                let (lo, hi) = (order[k - 1].0, order[k].0);
                if lo == hi {
                    continue;
                }
                let rdd = sdd - ldd;
                if ldd <= 0.0 || rdd <= 0.0 {
                    continue;
                }
                let tl = lyd / ldd;
                let tr = (syd - lyd) / rdd;
                let gain = k as f64 * (tl - tau) * (tl - tau) + (m - k) as f64 * (tr - tau) * (tr - tau);
                if !(gain > 0.0) {
                    continue;
                }
                let better = match &best {
                    None => true,
                    Some(b) => gain > b.gain || (gain == b.gain && f < b.feature),
                };
                if better {
                    best = Some(Split {
                        feature: f,
                        threshold: midpoint(lo, hi),
                        gain,
                    });
                }
            }
        }
        best
    }

    /// Grows the structure on `split_half`, then fills leaves from
    /// `estimate_half`, merging leaves without treatment variation into
    /// their parents.
    pub fn grow(&self, split_half: &[usize], estimate_half: &[usize]) -> (Vec<Node>, Vec<LeafStats>, bool) {
        let mut sample = split_half.to_vec();
        let mut nodes = vec![Node::Leaf { value: 0.0, n: 0 }];
        let mut parent = vec![usize::MAX];
        let mut stack = vec![(0usize, 0usize, sample.len(), 0usize)];
        let mut node_seq = 0u64;
        let mut scratch = Vec::new();
        let mut features = Vec::new();
        let mut order = Vec::new();
        while let Some((id, start, end, depth)) = stack.pop() {
            node_seq += 1;
            let m = end - start;
            let depth_ok = self.max_depth.is_none_or(|d| depth < d);
            let split = if depth_ok && m >= 2 * self.min_node_size.max(1) {
                self.best_split(&sample[start..end], node_seq, &mut features, &mut order)
            } else {
                None
            };
            let Some(s) = split else {
                nodes[id] = Node::Leaf { value: 0.0, n: 0 };
                continue;
            };
            let col = self.x.column(s.feature);
            scratch.clear();
            scratch.extend(sample[start..end].iter().copied().filter(|&i| col[i] <= s.threshold));
            let n_left = scratch.len();
            scratch.extend(sample[start..end].iter().copied().filter(|&i| col[i] > s.threshold));
            sample[start..end].copy_from_slice(&scratch);
            let left = nodes.len();
            let right = left + 1;
            nodes.push(Node::Leaf { value: 0.0, n: 0 });
            nodes.push(Node::Leaf { value: 0.0, n: 0 });
            parent.push(id);
            parent.push(id);
            nodes[id] = Node::Split {
                feature: s.feature,
                threshold: s.threshold,
                left,
                right,
                decrease: s.gain,
            };
            stack.push((right, start + n_left, end, depth + 1));
            stack.push((left, start, start + n_left, depth + 1));
        }

        // Accumulate estimation-half sums on every node along each path.
        let mut stats = vec![LeafStats::default(); nodes.len()];
        for &i in estimate_half {
            let mut k = 0;
            loop {
                stats[k].add(self.y[i], self.d[i]);
                match &nodes[k] {
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                        ..
                    } => {
                        k = if self.x.get(i, *feature) <= *threshold {
                            *left
                        } else {
                            *right
                        }
                    }
                    Node::Leaf { .. } => break,
                }
            }
        }

        loop {
            let mut merged = false;
            let mut stack = vec![0usize];
            while let Some(k) = stack.pop() {
                match &nodes[k] {
                    Node::Split { left, right, .. } => {
                        stack.push(*left);
                        stack.push(*right);
                    }
                    Node::Leaf { .. } => {
                        if !stats[k].usable() && k != 0 {
                            let p = parent[k];
                            nodes[p] = Node::Leaf { value: 0.0, n: 0 };
                            merged = true;
                            break;
                        }
                    }
                }
            }
            if !merged {
                break;
            }
        }
        let usable = stats[0].usable();
        for (k, node) in nodes.iter_mut().enumerate() {
            if let Node::Leaf { value, n } = node {
                *n = stats[k].n as usize;
                *value = if stats[k].usable() { stats[k].effect() } else { 0.0 };
            }
        }
        (nodes, stats, usable)
    }
}
