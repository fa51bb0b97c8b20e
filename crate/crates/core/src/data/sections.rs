//! Section-level trip information: distance-weighted discounts and
//! utilization imputation.

use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::path::Path;

/// One leg between two adjacent stops.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub distance_km: f64,
    pub discount: Option<f64>,
    /// Capacity utilization in percent.
    pub utilization: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectionTable {
    sections: Vec<Section>,
}

impl SectionTable {
    pub fn new(sections: Vec<Section>) -> Result<Self> {
        if sections.is_empty() {
            return Err(Error::validation("section table is empty"));
        }
        for (i, s) in sections.iter().enumerate() {
            if !(s.distance_km > 0.0 && s.distance_km.is_finite()) {
                return Err(Error::validation(format!("section {i}: distance must be > 0")));
            }
            if let Some(u) = s.utilization {
                if !(0.0..=100.0).contains(&u) {
                    return Err(Error::validation(format!(
                        "section {i}: utilization {u} outside [0, 100]"
                    )));
                }
            }
        }
        Ok(SectionTable { sections })
    }

    pub fn sections(&self) -> &[Section] {
        &self.sections
    }
}

/// Distance-weighted mean of the section discounts.
pub fn aggregate_trip_discount(table: &SectionTable) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, s) in table.sections.iter().enumerate() {
        let d = s
            .discount
            .ok_or_else(|| Error::validation(format!("section {i} has no discount")))?;
        num += s.distance_km * d;
        den += s.distance_km;
    }
    Ok(num / den)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilizationImputation {
    /// False when more than half of the sections lack utilization.
    pub kept: bool,
    /// Trip utilization (mean over sections after imputation); `None` if dropped.
    pub utilization: Option<f64>,
    pub imputed_share: f64,
}

/// Drops trips with more than 50% missing sections, otherwise fills gaps with
/// the mean of the observed sections.
pub fn impute_utilization(table: &SectionTable) -> Result<UtilizationImputation> {
    let n = table.sections.len();
    let observed: Vec<f64> = table.sections.iter().filter_map(|s| s.utilization).collect();
    if observed.is_empty() {
        return Err(Error::validation("utilization absent for every section"));
    }
    let missing = n - observed.len();
    let share = missing as f64 / n as f64;
    if 2 * missing > n {
        return Ok(UtilizationImputation {
            kept: false,
            utilization: None,
            imputed_share: share,
        });
    }
    let fill = observed.iter().sum::<f64>() / observed.len() as f64;
    let total: f64 = table.sections.iter().map(|s| s.utilization.unwrap_or(fill)).sum();
    Ok(UtilizationImputation {
        kept: true,
        utilization: Some(total / n as f64),
        imputed_share: share,
    })
}

/// Reads `trip_id, section_index, distance_km, discount, utilization` rows,
/// grouped by trip and ordered by section index.
pub fn load_section_tables(path: impl AsRef<Path>) -> Result<BTreeMap<String, SectionTable>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::validation(format!("{}: missing column {name}", path.display())))
    };
    let (c_trip, c_idx, c_dist, c_disc, c_util) = (
        col("trip_id")?,
        col("section_index")?,
        col("distance_km")?,
        col("discount")?,
        col("utilization")?,
    );
    let opt = |s: &str, what: &str| -> Result<Option<f64>> {
        let t = s.trim();
        if t.is_empty() || t == "NA" {
            Ok(None)
        } else {
            t.parse::<f64>()
                .map(Some)
                .map_err(|_| Error::validation(format!("non-numeric {what} {t:?}")))
        }
    };
    let mut grouped: BTreeMap<String, Vec<(i64, Section)>> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec?;
        let idx: i64 = rec[c_idx]
            .trim()
            .parse()
            .map_err(|_| Error::validation(format!("bad section_index {:?}", &rec[c_idx])))?;
        let distance_km = opt(&rec[c_dist], "distance_km")?.ok_or_else(|| Error::validation("absent distance_km"))?;
        grouped.entry(rec[c_trip].to_string()).or_default().push((
            idx,
            Section {
                distance_km,
                discount: opt(&rec[c_disc], "discount")?,
                utilization: opt(&rec[c_util], "utilization")?,
            },
        ));
    }
    grouped
        .into_iter()
        .map(|(trip, mut secs)| {
            secs.sort_by_key(|(i, _)| *i);
            let table = SectionTable::new(secs.into_iter().map(|(_, s)| s).collect())
                .map_err(|e| Error::validation(format!("trip {trip}: {e}")))?;
            Ok((trip, table))
        })
        .collect()
}

/// Trip-level discount and utilization covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct TripSummary {
    pub discount: f64,
    pub utilization: f64,
    pub imputed_flag: u8,
    pub imputed_share: f64,
}

/// Applies the section rules to every trip; trips over the missingness limit
/// are omitted from the result.
pub fn summarize_trips(tables: &BTreeMap<String, SectionTable>) -> Result<BTreeMap<String, TripSummary>> {
    let mut out = BTreeMap::new();
    for (trip, table) in tables {
        let imp = match impute_utilization(table) {
            Ok(imp) if imp.kept => imp,
            _ => continue,
        };
        out.insert(
            trip.clone(),
            TripSummary {
                discount: aggregate_trip_discount(table)?,
                utilization: imp.utilization.expect("kept trips have utilization"),
                imputed_flag: u8::from(imp.imputed_share > 0.0),
                imputed_share: imp.imputed_share,
            },
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sec(km: f64, disc: Option<f64>, util: Option<f64>) -> Section {
        Section {
            distance_km: km,
            discount: disc,
            utilization: util,
        }
    }

    #[test]
    fn weighted_discount_examples() {
        let t = SectionTable::new(vec![sec(10.0, Some(0.2), None), sec(30.0, Some(0.4), None)]).unwrap();
        assert!((aggregate_trip_discount(&t).unwrap() - 0.35).abs() < 1e-12);
        let single = SectionTable::new(vec![sec(7.3, Some(0.5), None)]).unwrap();
        assert_eq!(aggregate_trip_discount(&single).unwrap(), 0.5);
        let eq = SectionTable::new(vec![sec(5.0, Some(0.2), None), sec(5.0, Some(0.4), None)]).unwrap();
        assert!((aggregate_trip_discount(&eq).unwrap() - 0.3).abs() < 1e-12);
        let gap = SectionTable::new(vec![sec(5.0, None, None)]).unwrap();
        assert!(aggregate_trip_discount(&gap).is_err());
        assert!(SectionTable::new(vec![]).is_err());
        assert!(SectionTable::new(vec![sec(0.0, Some(0.1), None)]).is_err());
    }

    #[test]
    fn imputation_examples() {
        let t = SectionTable::new(vec![
            sec(1.0, None, Some(20.0)),
            sec(1.0, None, None),
            sec(1.0, None, None),
        ])
        .unwrap();
        assert!(!impute_utilization(&t).unwrap().kept);
        let t = SectionTable::new(vec![
            sec(1.0, None, Some(20.0)),
            sec(1.0, None, None),
            sec(1.0, None, Some(40.0)),
            sec(1.0, None, None),
        ])
        .unwrap();
        let r = impute_utilization(&t).unwrap();
        assert!(r.kept);
        assert_eq!(r.utilization, Some(30.0));
        assert_eq!(r.imputed_share, 0.5);
        let full = SectionTable::new(vec![sec(1.0, None, Some(10.0)), sec(2.0, None, Some(30.0))]).unwrap();
        let r = impute_utilization(&full).unwrap();
        assert!(r.kept && r.imputed_share == 0.0 && r.utilization == Some(20.0));
        let none = SectionTable::new(vec![sec(1.0, None, None)]).unwrap();
        assert!(impute_utilization(&none).is_err());
    }

    #[test]
    fn section_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        std::fs::write(
            &p,
            "trip_id,section_index,distance_km,discount,utilization\nA,2,30,0.4,NA\nA,1,10,0.2,50\nB,1,5,0.5,\nB,2,5,0.5,\nB,3,5,0.5,70\n",
        )
        .unwrap();
        let tables = load_section_tables(&p).unwrap();
        assert_eq!(tables.len(), 2);
        assert_eq!(tables["A"].sections()[0].distance_km, 10.0);
        let s = summarize_trips(&tables).unwrap();
        assert!((s["A"].discount - 0.35).abs() < 1e-12);
        assert_eq!(s["A"].utilization, 50.0);
        assert_eq!(s["A"].imputed_flag, 1);
        assert!(!s.contains_key("B"));
    }

    proptest::proptest! {
        #[test]
        fn discount_invariant_to_order_and_scale(
            legs in proptest::collection::vec((0.1f64..500.0, 0.0f64..0.7), 1..12),
            scale in 0.01f64..100.0,
        ) {
            let base: Vec<Section> = legs.iter().map(|&(k, d)| sec(k, Some(d), None)).collect();
            let mut rev = base.clone();
            rev.reverse();
            let scaled: Vec<Section> = legs.iter().map(|&(k, d)| sec(k * scale, Some(d), None)).collect();
            let a = aggregate_trip_discount(&SectionTable::new(base).unwrap()).unwrap();
            let b = aggregate_trip_discount(&SectionTable::new(rev).unwrap()).unwrap();
            let c = aggregate_trip_discount(&SectionTable::new(scaled).unwrap()).unwrap();
            proptest::prop_assert!((a - b).abs() < 1e-12);
            proptest::prop_assert!((a - c).abs() < 1e-12);
        }

        #[test]
        fn imputation_preserves_observed(utils in proptest::collection::vec(proptest::option::of(0.0f64..100.0), 1..12)) {
            proptest::prop_assume!(utils.iter().any(Option::is_some));
            let t = SectionTable::new(utils.iter().map(|&u| sec(1.0, None, u)).collect()).unwrap();
            let r = impute_utilization(&t).unwrap();
            if r.kept {
                proptest::prop_assert!(r.imputed_share <= 0.5);
            } else {
                proptest::prop_assert!(r.imputed_share > 0.5);
            }
            // inputs are untouched
            for (s, u) in t.sections().iter().zip(&utils) {
                proptest::prop_assert_eq!(s.utilization, *u);
            }
        }
    }
}
