//! Result records and CSV writers shared by every command.

use crate::error::{Error, Result};
use crate::stats::Histogram;
use serde::Serialize;
use std::path::Path;

/// One estimate in the unified report schema.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRecord {
    pub method: String,
    pub effect: f64,
    pub se: f64,
    pub p_value: f64,
    pub n: usize,
    pub n_trimmed: usize,
    /// Trimming threshold, where one applies.
    pub threshold: Option<f64>,
}

impl ResultRecord {
    pub fn new(method: impl Into<String>, effect: f64, se: f64, p_value: f64, n: usize) -> Self {
        ResultRecord {
            method: method.into(),
            effect,
            se,
            p_value,
            n,
            n_trimmed: 0,
            threshold: None,
        }
    }

    /// A failed estimator, kept in the report with NaN fields.
    pub fn failed(method: impl Into<String>) -> Self {
        ResultRecord::new(method, f64::NAN, f64::NAN, f64::NAN, 0)
    }

    pub fn significant_at(&self, level: f64) -> bool {
        self.p_value < level
    }

    /// Significantly negative at `level`.
    pub fn negative_at(&self, level: f64) -> bool {
        self.effect < 0.0 && self.p_value < level
    }
}

/// Writes any serializable rows as a headed CSV file.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct BinRow {
    lower: f64,
    upper: f64,
    count: usize,
}

/// Histogram bins as `lower,upper,count` rows.
pub fn write_histogram(path: &Path, h: &Histogram) -> Result<()> {
    let rows: Vec<BinRow> = h
        .counts
        .iter()
        .enumerate()
        .map(|(k, &count)| BinRow {
            lower: h.edges[k],
            upper: h.edges[k + 1],
            count,
        })
        .collect();
    write_csv(path, &rows)
}
