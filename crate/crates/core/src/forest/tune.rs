use super::{fit_forest, Forest, ForestParams, Task};
use crate::error::Result;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub mtry: usize,
    pub min_node_size: usize,
    pub oob_error: f64,
}

/// Grid search over `mtry ∈ {⌈√p⌉, ⌈p/3⌉, ⌈p/2⌉}` and
/// `min_node_size ∈ {5, 20, 50, 100}` minimizing out-of-bag error, using
/// `pilot_trees` trees per candidate. Returns `base` with the winning
/// settings and the full grid.
pub fn tune_forest(
    x: &Matrix,
    y: &[f64],
    task: Task,
    base: &ForestParams,
    pilot_trees: usize,
) -> Result<(ForestParams, Vec<TuneResult>)> {
    let p = x.n_cols();
    let n = x.n_rows();
    let mut mtrys = vec![
        ((p as f64).sqrt().ceil() as usize).clamp(1, p),
        p.div_ceil(3).clamp(1, p),
        p.div_ceil(2).clamp(1, p),
    ];
    mtrys.dedup();
    mtrys.sort_unstable();
    mtrys.dedup();
    let mut grid = Vec::new();
    for &mtry in &mtrys {
        for min_node_size in [5usize, 20, 50, 100] {
            if n < 2 * min_node_size {
                continue;
            }
            let params = ForestParams {
                n_trees: pilot_trees.max(1),
                mtry: Some(mtry),
                min_node_size: Some(min_node_size),
                ..base.clone()
            };
            let f: Forest = fit_forest(x, y, task, &params)?;
            grid.push(TuneResult {
                mtry,
                min_node_size,
                oob_error: f.oob_mse(y),
            });
        }
    }
    let best = grid
        .iter()
        .filter(|r| r.oob_error.is_finite())
        .min_by(|a, b| {
            a.oob_error
                .total_cmp(&b.oob_error)
                .then(a.mtry.cmp(&b.mtry))
                .then(a.min_node_size.cmp(&b.min_node_size))
        })
        .cloned();
    let mut tuned = base.clone();
    if let Some(b) = best {
        tuned.mtry = Some(b.mtry);
        tuned.min_node_size = Some(b.min_node_size);
    }
    Ok((tuned, grid))
}
