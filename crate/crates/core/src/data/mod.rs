//! Survey records, ingestion and the sample-construction rules.
//!
//! Every record is a supersaver buyer (`S = 1`). The additional-trip outcome
//! is `1 - S(0)`: the customer would not have bought the same ticket without
//! a discount.

mod ingest;
mod sample;
mod sections;

pub use ingest::{load_survey, write_schema, write_survey, ColumnRole, IngestReport, Schema};
pub use sample::{balance_binary_outcome, filter_always_buyers, train_test_split};
pub use sections::{
    aggregate_trip_discount, impute_utilization, load_section_tables, summarize_trips, Section, SectionTable,
    TripSummary, UtilizationImputation,
};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};

/// Discount range and the cut-off used to binarize it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreatmentSpec {
    pub max_discount: f64,
    pub binarize_threshold: f64,
}

impl Default for TreatmentSpec {
    fn default() -> Self {
        TreatmentSpec {
            max_discount: 0.7,
            binarize_threshold: 0.3,
        }
    }
}

impl TreatmentSpec {
    pub fn new(max_discount: f64, binarize_threshold: f64) -> Result<Self> {
        let spec = TreatmentSpec {
            max_discount,
            binarize_threshold,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.binarize_threshold && self.binarize_threshold < self.max_discount && self.max_discount <= 1.0) {
            return Err(Error::validation(format!(
                "need 0 < binarize_threshold ({}) < max_discount ({}) <= 1",
                self.binarize_threshold, self.max_discount
            )));
        }
        Ok(())
    }

    pub fn contains(&self, d: f64) -> bool {
        d > 0.0 && d <= self.max_discount
    }
}

/// `1` iff `d >= threshold`; the threshold itself counts as treated.
pub fn binarize_treatment(d: f64, spec: &TreatmentSpec) -> Result<u8> {
    if !spec.contains(d) {
        return Err(Error::validation(format!(
            "discount {d} outside (0, {}]",
            spec.max_discount
        )));
    }
    Ok(u8::from(d >= spec.binarize_threshold))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyRecord {
    pub y_demand_shift: u8,
    pub d_discount: f64,
    pub s0_would_buy: u8,
    pub upselling: Option<u8>,
    pub x_demand: Vec<f64>,
    pub w_personal: Vec<f64>,
    pub imputed_flag: u8,
    pub imputed_share: f64,
}

impl SurveyRecord {
    /// `S - S(0)` with `S = 1`.
    pub fn additional_trip(&self) -> u8 {
        1 - self.s0_would_buy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnKind {
    Continuous,
    Binary,
    /// One-hot indicator produced from a categorical source column.
    Indicator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub kind: ColumnKind,
    /// Source column for one-hot indicators; equals `name` otherwise.
    pub group: String,
}

impl ColumnMeta {
    pub fn continuous(name: impl Into<String>) -> Self {
        let name = name.into();
        ColumnMeta {
            group: name.clone(),
            name,
            kind: ColumnKind::Continuous,
        }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        let name = name.into();
        ColumnMeta {
            group: name.clone(),
            name,
            kind: ColumnKind::Binary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Ingested,
    Simulated,
}

/// Binary outcomes the predictive analysis can target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    DemandShift,
    Upselling,
    AdditionalTrip,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::DemandShift => "demand_shift",
            Outcome::Upselling => "upselling",
            Outcome::AdditionalTrip => "additional_trip",
        }
    }
}

/// Rectangular, fully observed survey sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub records: Vec<SurveyRecord>,
    pub x_columns: Vec<ColumnMeta>,
    pub w_columns: Vec<ColumnMeta>,
    pub provenance: Provenance,
    pub treatment: TreatmentSpec,
}

impl Dataset {
    pub fn new(
        records: Vec<SurveyRecord>,
        x_columns: Vec<ColumnMeta>,
        w_columns: Vec<ColumnMeta>,
        provenance: Provenance,
        treatment: TreatmentSpec,
    ) -> Result<Self> {
        treatment.validate()?;
        for (i, r) in records.iter().enumerate() {
            if r.x_demand.len() != x_columns.len() || r.w_personal.len() != w_columns.len() {
                return Err(Error::validation(format!("record {i} is not rectangular")));
            }
            if !treatment.contains(r.d_discount) {
                return Err(Error::validation(format!(
                    "record {i}: discount {} outside (0, {}]",
                    r.d_discount, treatment.max_discount
                )));
            }
        }
        Ok(Dataset {
            records,
            x_columns,
            w_columns,
            provenance,
            treatment,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn y(&self) -> Vec<f64> {
        self.records.iter().map(|r| f64::from(r.y_demand_shift)).collect()
    }

    pub fn d(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.d_discount).collect()
    }

    pub fn s0(&self) -> Vec<f64> {
        self.records.iter().map(|r| f64::from(r.s0_would_buy)).collect()
    }

    pub fn additional_trip(&self) -> Vec<f64> {
        self.records.iter().map(|r| f64::from(r.additional_trip())).collect()
    }

    pub fn dtilde(&self) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| f64::from(u8::from(r.d_discount >= self.treatment.binarize_threshold)))
            .collect()
    }

    /// Values of a binary outcome; `None` when upselling is not recorded.
    pub fn outcome(&self, outcome: Outcome) -> Option<Vec<f64>> {
        match outcome {
            Outcome::DemandShift => Some(self.y()),
            Outcome::AdditionalTrip => Some(self.additional_trip()),
            Outcome::Upselling => self.records.iter().map(|r| r.upselling.map(f64::from)).collect(),
        }
    }

    /// Demand covariates followed by the two imputation indicators.
    pub fn x_matrix(&self) -> Matrix {
        let mut names: Vec<String> = self.x_columns.iter().map(|c| c.name.clone()).collect();
        let mut cols: Vec<Vec<f64>> = (0..self.x_columns.len())
            .map(|j| self.records.iter().map(|r| r.x_demand[j]).collect())
            .collect();
        names.push("imputed_flag".into());
        cols.push(self.records.iter().map(|r| f64::from(r.imputed_flag)).collect());
        names.push("imputed_share".into());
        cols.push(self.records.iter().map(|r| r.imputed_share).collect());
        Matrix::from_columns(names, cols).expect("rectangular by construction")
    }

    pub fn w_matrix(&self) -> Matrix {
        let names: Vec<String> = self.w_columns.iter().map(|c| c.name.clone()).collect();
        let cols: Vec<Vec<f64>> = (0..self.w_columns.len())
            .map(|j| self.records.iter().map(|r| r.w_personal[j]).collect())
            .collect();
        if self.w_columns.is_empty() {
            return Matrix::empty(self.len());
        }
        Matrix::from_columns(names, cols).expect("rectangular by construction")
    }

    /// X, imputation indicators, then W.
    pub fn xw_matrix(&self) -> Matrix {
        let x = self.x_matrix();
        if self.w_columns.is_empty() {
            return x;
        }
        x.hstack(&self.w_matrix()).expect("same rows")
    }

    /// Records at `indices`, keeping column metadata.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            x_columns: self.x_columns.clone(),
            w_columns: self.w_columns.clone(),
            provenance: self.provenance,
            treatment: self.treatment,
        }
    }

    /// Drops covariate columns whose name or source group is in `names`.
    pub fn drop_covariates(&self, names: &[&str]) -> Dataset {
        let hit = |c: &ColumnMeta| names.iter().any(|n| *n == c.name || *n == c.group);
        let keep_x: Vec<usize> = (0..self.x_columns.len())
            .filter(|&j| !hit(&self.x_columns[j]))
            .collect();
        let keep_w: Vec<usize> = (0..self.w_columns.len())
            .filter(|&j| !hit(&self.w_columns[j]))
            .collect();
        Dataset {
            records: self
                .records
                .iter()
                .map(|r| SurveyRecord {
                    x_demand: keep_x.iter().map(|&j| r.x_demand[j]).collect(),
                    w_personal: keep_w.iter().map(|&j| r.w_personal[j]).collect(),
                    ..r.clone()
                })
                .collect(),
            x_columns: keep_x.iter().map(|&j| self.x_columns[j].clone()).collect(),
            w_columns: keep_w.iter().map(|&j| self.w_columns[j].clone()).collect(),
            provenance: self.provenance,
            treatment: self.treatment,
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn record(y: u8, d: f64, s0: u8, x: Vec<f64>) -> SurveyRecord {
        SurveyRecord {
            y_demand_shift: y,
            d_discount: d,
            s0_would_buy: s0,
            upselling: Some(0),
            x_demand: x,
            w_personal: vec![],
            imputed_flag: 0,
            imputed_share: 0.0,
        }
    }

    pub(crate) fn toy(records: Vec<SurveyRecord>) -> Dataset {
        let p = records.first().map_or(0, |r| r.x_demand.len());
        let xs = (0..p).map(|j| ColumnMeta::continuous(format!("x{j}"))).collect();
        Dataset::new(records, xs, vec![], Provenance::Simulated, TreatmentSpec::default()).unwrap()
    }

    #[test]
    fn binarize_is_inclusive_at_threshold() {
        let spec = TreatmentSpec::default();
        assert_eq!(binarize_treatment(0.30, &spec).unwrap(), 1);
        assert_eq!(binarize_treatment(0.299, &spec).unwrap(), 0);
        assert_eq!(binarize_treatment(0.70, &spec).unwrap(), 1);
        assert!(binarize_treatment(0.0, &spec).is_err());
        assert!(binarize_treatment(0.71, &spec).is_err());
    }

    #[test]
    fn treatment_spec_invariants() {
        assert!(TreatmentSpec::new(0.7, 0.3).is_ok());
        assert!(TreatmentSpec::new(0.3, 0.3).is_err());
        assert!(TreatmentSpec::new(1.2, 0.3).is_err());
        assert!(TreatmentSpec::new(0.7, 0.0).is_err());
    }

    #[test]
    fn x_matrix_appends_imputation_indicators() {
        let ds = toy(vec![record(1, 0.4, 1, vec![2.0]), record(0, 0.2, 0, vec![3.0])]);
        let x = ds.x_matrix();
        assert_eq!(x.names(), &["x0", "imputed_flag", "imputed_share"]);
        assert_eq!(ds.additional_trip(), vec![0.0, 1.0]);
        assert_eq!(ds.dtilde(), vec![1.0, 0.0]);
    }

    proptest::proptest! {
        #[test]
        fn binarize_monotone(a in 0.001f64..0.7, b in 0.001f64..0.7) {
            let spec = TreatmentSpec::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            proptest::prop_assert!(binarize_treatment(lo, &spec).unwrap() <= binarize_treatment(hi, &spec).unwrap());
        }
    }
}
