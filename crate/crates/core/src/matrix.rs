//! Dense column-major covariate matrix with column names.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n_rows: usize,
    names: Vec<String>,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from named columns of equal length.
    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::validation(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let n_rows = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * columns.len());
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n_rows {
                return Err(Error::validation(format!(
                    "column {name} has {} rows, expected {n_rows}",
                    col.len()
                )));
            }
            data.extend_from_slice(col);
        }
        Ok(Matrix { n_rows, names, data })
    }

    /// Builds a matrix from rows; columns are named `x0, x1, ...`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        let mut cols = vec![Vec::with_capacity(rows.len()); p];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::validation(format!(
                    "row {i} has {} entries, expected {p}",
                    row.len()
                )));
            }
            for (c, v) in cols.iter_mut().zip(row) {
                c.push(*v);
            }
        }
        let names = (0..p).map(|j| format!("x{j}")).collect();
        if p == 0 {
            return Ok(Matrix {
                n_rows: rows.len(),
                names,
                data: Vec::new(),
            });
        }
        Self::from_columns(names, cols)
    }

    /// Matrix with `n_rows` rows and no columns.
    pub fn empty(n_rows: usize) -> Self {
        Matrix {
            n_rows,
            names: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[col * self.n_rows + row]
    }

    #[inline]
    pub fn column(&self, col: usize) -> &[f64] {
        &self.data[col * self.n_rows..(col + 1) * self.n_rows]
    }

    pub fn column_by_name(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|j| self.column(j))
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        (0..self.n_cols()).map(|j| self.get(row, j)).collect()
    }

    /// Rows at `indices`, in that order (repeats allowed).
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.n_cols());
        for j in 0..self.n_cols() {
            let col = self.column(j);
            data.extend(indices.iter().map(|&i| col[i]));
        }
        Matrix {
            n_rows: indices.len(),
            names: self.names.clone(),
            data,
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.n_rows * cols.len());
        for &j in cols {
            data.extend_from_slice(self.column(j));
        }
        Matrix {
            n_rows: self.n_rows,
            names: cols.iter().map(|&j| self.names[j].clone()).collect(),
            data,
        }
    }

    /// Appends the columns of `other` (same row count).
    pub fn hstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.n_cols() > 0 && other.n_cols() > 0 && self.n_rows != other.n_rows {
            return Err(Error::validation("hstack: row counts differ"));
        }
        let n_rows = if self.n_cols() == 0 { other.n_rows } else { self.n_rows };
        let mut names = self.names.clone();
        names.extend(other.names.iter().cloned());
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Matrix { n_rows, names, data })
    }

    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if self.n_cols() == 0 {
            self.n_rows = values.len();
        } else if values.len() != self.n_rows {
            return Err(Error::validation("push_column: length mismatch"));
        }
        self.names.push(name.into());
        self.data.extend(values);
        Ok(())
    }

    /// Prepends a column of ones named `(intercept)`.
    pub fn with_intercept(&self) -> Matrix {
        let mut m = Matrix {
            n_rows: self.n_rows,
            names: vec!["(intercept)".to_string()],
            data: vec![1.0; self.n_rows],
        };
        m.names.extend(self.names.iter().cloned());
        m.data.extend_from_slice(&self.data);
        m
    }

    pub fn rename(&mut self, names: Vec<String>) -> Result<()> {
        if names.len() != self.n_cols() {
            return Err(Error::validation("rename: wrong number of names"));
        }
        self.names = names;
        Ok(())
    }
}
