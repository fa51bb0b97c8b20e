use discount_cml::dml::{dr_score, trim};
use discount_cml::forest::{fit_forest, ForestParams, Task};
use discount_cml::matrix::Matrix;
use proptest::prelude::*;

fn table(rows: &[(f64, f64, f64)]) -> (Matrix, Vec<f64>) {
    let x = Matrix::from_columns(
        vec!["a".into(), "b".into()],
        vec![rows.iter().map(|r| r.0).collect(), rows.iter().map(|r| r.1).collect()],
    )
    .unwrap();
    (x, rows.iter().map(|r| r.2).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn regression_predictions_stay_within_outcome_range(
        rows in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64, -10.0..10.0f64), 12..60),
        seed in any::<u64>(),
    ) {
        let (x, y) = table(&rows);
        let f = fit_forest(&x, &y, Task::Regression, &ForestParams::with_trees(8, seed)).unwrap();
        let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for p in f.predict(&x).unwrap() {
            prop_assert!(p >= lo - 1e-9 && p <= hi + 1e-9);
        }
    }

    #[test]
    fn classification_forests_return_probabilities(
        rows in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64, 0u8..2), 4..60),
        seed in any::<u64>(),
    ) {
        let rows: Vec<(f64, f64, f64)> = rows.into_iter().map(|(a, b, c)| (a, b, f64::from(c))).collect();
        let (x, y) = table(&rows);
        let f = fit_forest(&x, &y, Task::Classification, &ForestParams::with_trees(8, seed)).unwrap();
        for p in f.predict(&x).unwrap() {
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn refits_with_the_same_seed_are_identical(
        rows in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64, -1.0..1.0f64), 12..40),
        seed in any::<u64>(),
    ) {
        let (x, y) = table(&rows);
        let p = ForestParams::with_trees(6, seed);
        prop_assert_eq!(
            fit_forest(&x, &y, Task::Regression, &p).unwrap(),
            fit_forest(&x, &y, Task::Regression, &p).unwrap()
        );
    }

    #[test]
    fn trimming_keeps_exactly_the_overlap_band(
        p in prop::collection::vec(0.0..1.0f64, 1..80),
        t in 0.0..0.3f64,
    ) {
        if let Ok(kept) = trim(&p, t) {
            for (i, &v) in p.iter().enumerate() {
                prop_assert_eq!(kept.contains(&i), v >= t && 1.0 - v >= t);
            }
        } else {
            prop_assert!(p.iter().all(|&v| v < t || 1.0 - v < t));
        }
    }

    #[test]
    fn dr_score_is_exact_when_outcome_models_are(
        mu0 in -1.0..1.0f64, mu1 in -1.0..1.0f64, p in 0.05..0.95f64, treated in any::<bool>(),
    ) {
        let (d, y) = if treated { (1.0, mu1) } else { (0.0, mu0) };
        prop_assert!((dr_score(y, d, mu0, mu1, p) - (mu1 - mu0)).abs() < 1e-12);
    }
}
