//! CSV ingestion driven by a column-role schema.
//!
//! Schema files are `key = value` text, one column per line:
//!
//! ```text
//! # column = role[:kind]
//! rescheduled = outcome
//! discount    = treatment
//! would_buy   = s0
//! weekday     = x:categorical
//! age         = w
//! ```
//!
//! Roles: `outcome`, `treatment`, `s0`, `upselling`, `x`, `w`,
//! `imputed_flag`, `imputed_share`, `ignore`. Kinds: `continuous` (default),
//! `binary`, `categorical`. Absent values are empty fields or `NA`.

use super::{ColumnKind, ColumnMeta, Dataset, Provenance, SurveyRecord, TreatmentSpec};
use crate::error::{Error, Result};
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnRole {
    Outcome,
    Treatment,
    S0,
    Upselling,
    X,
    W,
    ImputedFlag,
    ImputedShare,
    Ignore,
}

impl ColumnRole {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "outcome" => ColumnRole::Outcome,
            "treatment" => ColumnRole::Treatment,
            "s0" => ColumnRole::S0,
            "upselling" => ColumnRole::Upselling,
            "x" => ColumnRole::X,
            "w" => ColumnRole::W,
            "imputed_flag" => ColumnRole::ImputedFlag,
            "imputed_share" => ColumnRole::ImputedShare,
            "ignore" => ColumnRole::Ignore,
            _ => return None,
        })
    }

    fn as_str(self) -> &'static str {
        match self {
            ColumnRole::Outcome => "outcome",
            ColumnRole::Treatment => "treatment",
            ColumnRole::S0 => "s0",
            ColumnRole::Upselling => "upselling",
            ColumnRole::X => "x",
            ColumnRole::W => "w",
            ColumnRole::ImputedFlag => "imputed_flag",
            ColumnRole::ImputedShare => "imputed_share",
            ColumnRole::Ignore => "ignore",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SourceKind {
    Continuous,
    Binary,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct ColumnSpec {
    role: ColumnRole,
    kind: SourceKind,
}

/// Column-role mapping for a survey CSV, in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Schema {
    columns: Vec<(String, ColumnSpec)>,
}

impl Schema {
    pub fn parse(text: &str) -> Result<Self> {
        let mut columns: Vec<(String, ColumnSpec)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::validation(format!("schema line {}: expected column = role", lineno + 1)))?;
            let key = key.trim().to_string();
            let (role_s, kind_s) = match value.trim().split_once(':') {
                Some((r, k)) => (r.trim(), Some(k.trim())),
                None => (value.trim(), None),
            };
            let role = ColumnRole::parse(role_s)
                .ok_or_else(|| Error::validation(format!("schema line {}: unknown role {role_s:?}", lineno + 1)))?;
            let kind = match kind_s {
                None | Some("continuous") => SourceKind::Continuous,
                Some("binary") => SourceKind::Binary,
                Some("categorical") => SourceKind::Categorical,
                Some(other) => {
                    return Err(Error::validation(format!(
                        "schema line {}: unknown kind {other:?}",
                        lineno + 1
                    )))
                }
            };
            if kind == SourceKind::Categorical && !matches!(role, ColumnRole::X | ColumnRole::W) {
                return Err(Error::validation(format!(
                    "schema line {}: only x/w columns can be categorical",
                    lineno + 1
                )));
            }
            if columns.iter().any(|(k, _)| *k == key) {
                return Err(Error::validation(format!("schema assigns {key} twice")));
            }
            columns.push((key, ColumnSpec { role, kind }));
        }
        let schema = Schema { columns };
        for role in [ColumnRole::Outcome, ColumnRole::Treatment, ColumnRole::S0] {
            match schema.columns.iter().filter(|(_, c)| c.role == role).count() {
                0 => return Err(Error::validation(format!("schema has no {} column", role.as_str()))),
                1 => {}
                _ => {
                    return Err(Error::validation(format!(
                        "schema has several {} columns",
                        role.as_str()
                    )))
                }
            }
        }
        for role in [ColumnRole::Upselling, ColumnRole::ImputedFlag, ColumnRole::ImputedShare] {
            if schema.columns.iter().filter(|(_, c)| c.role == role).count() > 1 {
                return Err(Error::validation(format!(
                    "schema has several {} columns",
                    role.as_str()
                )));
            }
        }
        Ok(schema)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Schema::parse(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn role_of(&self, column: &str) -> Option<ColumnRole> {
        self.columns.iter().find(|(k, _)| k == column).map(|(_, c)| c.role)
    }

    fn spec_of(&self, column: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|(k, _)| k == column).map(|(_, c)| c)
    }
}

/// Row rejections during ingestion, by reason.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rejected_missing_core: usize,
    pub rejected_zero_discount: usize,
    pub rejected_missing_covariate: usize,
}

impl IngestReport {
    pub fn rejected(&self) -> usize {
        self.rejected_missing_core + self.rejected_zero_discount + self.rejected_missing_covariate
    }
}

fn is_absent(s: &str) -> bool {
    let t = s.trim();
    t.is_empty() || t == "NA"
}

fn parse_num(s: &str, col: &str, row: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::validation(format!("row {row}, column {col}: non-numeric value {s:?}")))
}

fn parse_binary(s: &str, col: &str, row: usize) -> Result<u8> {
    let v = parse_num(s, col, row)?;
    if v == 0.0 {
        Ok(0)
    } else if v == 1.0 {
        Ok(1)
    } else {
        Err(Error::validation(format!(
            "row {row}, column {col}: expected 0/1, got {s:?}"
        )))
    }
}

/// Reads a survey CSV. Rows with an absent outcome, treatment, `S(0)` or
/// covariate are rejected and counted, as are rows with a zero discount
/// (the survey only covers buyers who received a discount).
pub fn load_survey(
    path: impl AsRef<Path>,
    schema: &Schema,
    treatment: TreatmentSpec,
) -> Result<(Dataset, IngestReport)> {
    let path = path.as_ref();
    treatment.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();

    let mut specs = Vec::with_capacity(headers.len());
    for h in &headers {
        let spec = schema
            .spec_of(h)
            .ok_or_else(|| Error::validation(format!("column {h} has no role in the schema")))?;
        specs.push(spec.clone());
    }
    for (name, _) in &schema.columns {
        if !headers.contains(name) {
            return Err(Error::validation(format!(
                "schema column {name} not in {}",
                path.display()
            )));
        }
    }

    let rows: Vec<csv::StringRecord> = reader.records().collect::<std::result::Result<_, _>>()?;
    let mut report = IngestReport {
        rows_read: rows.len(),
        ..IngestReport::default()
    };

    let find = |role: ColumnRole| specs.iter().position(|s| s.role == role);
    let y_col = find(ColumnRole::Outcome).expect("validated schema");
    let d_col = find(ColumnRole::Treatment).expect("validated schema");
    let s0_col = find(ColumnRole::S0).expect("validated schema");
    let up_col = find(ColumnRole::Upselling);
    let flag_col = find(ColumnRole::ImputedFlag);
    let share_col = find(ColumnRole::ImputedShare);
    let cov_cols: Vec<usize> = (0..specs.len())
        .filter(|&j| matches!(specs[j].role, ColumnRole::X | ColumnRole::W))
        .collect();

    let mut kept: Vec<&csv::StringRecord> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let rowno = i + 2;
        if row.len() != headers.len() {
            return Err(Error::validation(format!(
                "row {rowno}: {} fields, expected {}",
                row.len(),
                headers.len()
            )));
        }
        if [y_col, d_col, s0_col].iter().any(|&c| is_absent(&row[c])) {
            report.rejected_missing_core += 1;
            continue;
        }
        let d = parse_num(&row[d_col], &headers[d_col], rowno)?;
        if d <= 0.0 {
            report.rejected_zero_discount += 1;
            continue;
        }
        if d > treatment.max_discount {
            return Err(Error::validation(format!(
                "row {rowno}: discount {d} outside (0, {}]",
                treatment.max_discount
            )));
        }
        if cov_cols
            .iter()
            .chain(flag_col.iter())
            .chain(share_col.iter())
            .any(|&c| is_absent(&row[c]))
        {
            report.rejected_missing_covariate += 1;
            continue;
        }
        kept.push(row);
    }

    // Levels of categorical columns over the retained rows, sorted.
    let mut levels: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for &c in &cov_cols {
        if specs[c].kind == SourceKind::Categorical {
            let set: BTreeSet<String> = kept.iter().map(|r| r[c].trim().to_string()).collect();
            levels.insert(c, set.into_iter().collect());
        }
    }

    let mut x_columns = Vec::new();
    let mut w_columns = Vec::new();
    for &c in &cov_cols {
        let target = if specs[c].role == ColumnRole::X {
            &mut x_columns
        } else {
            &mut w_columns
        };
        let name = &headers[c];
        match specs[c].kind {
            SourceKind::Continuous => target.push(ColumnMeta::continuous(name.clone())),
            SourceKind::Binary => target.push(ColumnMeta::binary(name.clone())),
            SourceKind::Categorical => {
                for level in &levels[&c] {
                    target.push(ColumnMeta {
                        name: format!("{name}={level}"),
                        kind: ColumnKind::Indicator,
                        group: name.clone(),
                    });
                }
            }
        }
    }

    let mut records = Vec::with_capacity(kept.len());
    for (k, row) in kept.iter().enumerate() {
        let rowno = k + 2;
        let mut x = Vec::with_capacity(x_columns.len());
        let mut w = Vec::with_capacity(w_columns.len());
        for &c in &cov_cols {
            let target = if specs[c].role == ColumnRole::X { &mut x } else { &mut w };
            match specs[c].kind {
                SourceKind::Continuous => target.push(parse_num(&row[c], &headers[c], rowno)?),
                SourceKind::Binary => target.push(f64::from(parse_binary(&row[c], &headers[c], rowno)?)),
                SourceKind::Categorical => {
                    let v = row[c].trim();
                    target.extend(levels[&c].iter().map(|l| if l == v { 1.0 } else { 0.0 }));
                }
            }
        }
        let imputed_share = match share_col {
            Some(c) => parse_num(&row[c], &headers[c], rowno)?,
            None => 0.0,
        };
        if !(0.0..=0.5).contains(&imputed_share) {
            return Err(Error::validation(format!(
                "row {rowno}: imputed share {imputed_share} outside [0, 0.5]"
            )));
        }
        records.push(SurveyRecord {
            y_demand_shift: parse_binary(&row[y_col], &headers[y_col], rowno)?,
            d_discount: parse_num(&row[d_col], &headers[d_col], rowno)?,
            s0_would_buy: parse_binary(&row[s0_col], &headers[s0_col], rowno)?,
            upselling: match up_col {
                Some(c) if !is_absent(&row[c]) => Some(parse_binary(&row[c], &headers[c], rowno)?),
                _ => None,
            },
            x_demand: x,
            w_personal: w,
            imputed_flag: match flag_col {
                Some(c) => parse_binary(&row[c], &headers[c], rowno)?,
                None => 0,
            },
            imputed_share,
        });
    }
    if report.rejected() > 0 {
        log::warn!(
            "{}: rejected {} of {} rows ({} missing outcome/treatment/s0, {} zero discount, {} missing covariate)",
            path.display(),
            report.rejected(),
            report.rows_read,
            report.rejected_missing_core,
            report.rejected_zero_discount,
            report.rejected_missing_covariate
        );
    }
    let ds = Dataset::new(records, x_columns, w_columns, Provenance::Ingested, treatment)?;
    Ok((ds, report))
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

/// Writes a dataset in the ingestible CSV layout. One-hot blocks are written
/// back as their indicator columns (kind `binary`).
pub fn write_survey(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut header = vec![
        "y_demand_shift".to_string(),
        "d_discount".into(),
        "s0_would_buy".into(),
        "upselling".into(),
    ];
    header.extend(ds.x_columns.iter().map(|c| c.name.clone()));
    header.extend(ds.w_columns.iter().map(|c| c.name.clone()));
    header.push("imputed_flag".into());
    header.push("imputed_share".into());
    w.write_record(&header)?;
    for r in &ds.records {
        let mut row = vec![
            r.y_demand_shift.to_string(),
            fmt_num(r.d_discount),
            r.s0_would_buy.to_string(),
            r.upselling.map_or_else(|| "NA".to_string(), |u| u.to_string()),
        ];
        row.extend(r.x_demand.iter().map(|v| fmt_num(*v)));
        row.extend(r.w_personal.iter().map(|v| fmt_num(*v)));
        row.push(r.imputed_flag.to_string());
        row.push(fmt_num(r.imputed_share));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Schema text matching [`write_survey`]'s layout.
pub fn write_schema(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let kind = |c: &ColumnMeta| match c.kind {
        ColumnKind::Continuous => "continuous",
        ColumnKind::Binary | ColumnKind::Indicator => "binary",
    };
    let mut text =
        String::from("y_demand_shift = outcome\nd_discount = treatment\ns0_would_buy = s0\nupselling = upselling\n");
    for c in &ds.x_columns {
        text.push_str(&format!("{} = x:{}\n", c.name, kind(c)));
    }
    for c in &ds.w_columns {
        text.push_str(&format!("{} = w:{}\n", c.name, kind(c)));
    }
    text.push_str("imputed_flag = imputed_flag\nimputed_share = imputed_share\n");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        let mut f = fs::File::create(&p).unwrap();
        f.write_all(text.as_bytes()).unwrap();
        p
    }

    const SCHEMA: &str = "y = outcome\nd = treatment\ns0 = s0\nday = x:categorical\nutil = x\nage = w\n";

    #[test]
    fn ingests_complete_rows() {
        let dir = tempfile::tempdir().unwrap();
        let csv = write_tmp(
            &dir,
            "s.csv",
            "y,d,s0,day,util,age\n1,0.3,1,mon,50,30\n0,0.5,0,tue,20,41\n1,0.7,1,wed,80,25\n",
        );
        let schema = Schema::parse(SCHEMA).unwrap();
        let (ds, rep) = load_survey(&csv, &schema, TreatmentSpec::default()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.provenance, Provenance::Ingested);
        assert_eq!(rep.rejected(), 0);
        // three weekday levels become three indicators, then util
        let names: Vec<&str> = ds.x_columns.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["day=mon", "day=tue", "day=wed", "util"]);
        assert_eq!(ds.records[1].x_demand, vec![0.0, 1.0, 0.0, 20.0]);
        assert_eq!(ds.records[1].w_personal, vec![41.0]);
    }

    #[test]
    fn zero_discount_and_missing_core_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let csv = write_tmp(
            &dir,
            "s.csv",
            "y,d,s0,day,util,age\n1,0,1,mon,50,30\n0,0.5,NA,tue,20,41\n1,0.7,1,wed,,25\n1,0.4,1,wed,3,25\n",
        );
        let schema = Schema::parse(SCHEMA).unwrap();
        let (ds, rep) = load_survey(&csv, &schema, TreatmentSpec::default()).unwrap();
        assert_eq!(rep.rejected_zero_discount, 1);
        assert_eq!(rep.rejected_missing_core, 1);
        assert_eq!(rep.rejected_missing_covariate, 1);
        assert_eq!(ds.len(), 1);
    }

    #[test]
    fn schema_and_value_errors() {
        assert!(Schema::parse("d = treatment\ns0 = s0\n").is_err());
        assert!(Schema::parse("y = outcome\nd = treatment\ns0 = s0\nq = bogus\n").is_err());
        let dir = tempfile::tempdir().unwrap();
        let schema = Schema::parse(SCHEMA).unwrap();
        let bad = write_tmp(&dir, "a.csv", "y,d,s0,day,util,age\n1,0.3,1,mon,abc,30\n");
        assert!(load_survey(&bad, &schema, TreatmentSpec::default()).is_err());
        let big = write_tmp(&dir, "b.csv", "y,d,s0,day,util,age\n1,0.9,1,mon,1,30\n");
        assert!(load_survey(&big, &schema, TreatmentSpec::default()).is_err());
        let unassigned = write_tmp(&dir, "c.csv", "y,d,s0,day,util,age,extra\n1,0.3,1,mon,1,30,2\n");
        assert!(load_survey(&unassigned, &schema, TreatmentSpec::default()).is_err());
    }
}
