use super::*;
use crate::data::{filter_always_buyers, ColumnMeta, Dataset, Outcome};
use crate::diagnostics::independence_wald;

fn small(n: usize, seed: u64) -> DgpConfig {
    DgpConfig {
        n,
        seed,
        ..DgpConfig::default()
    }
}

#[test]
fn same_seed_same_draws() {
    let a = simulate(&small(2000, 4)).unwrap();
    let b = simulate(&small(2000, 4)).unwrap();
    assert_eq!(a, b);
    let c = simulate(&small(2000, 5)).unwrap();
    assert_ne!(a.observed, c.observed);
}

#[test]
fn only_buyers_are_surveyed() {
    let sim = simulate(&small(3000, 1)).unwrap();
    let t = &sim.latent;
    let bought = t.s_d.iter().filter(|&&s| s == 1).count();
    assert_eq!(sim.observed.len(), bought);
    for i in 0..t.len() {
        match t.survey_row[i] {
            Some(r) => {
                let rec = &sim.observed.records[r];
                assert_eq!(rec.d_discount, t.d[i]);
                assert_eq!(rec.s0_would_buy, t.s0[i]);
                assert_eq!(rec.y_demand_shift, t.y_d[i]);
            }
            None => assert_eq!(t.s_d[i], 0),
        }
    }
}

#[test]
fn selection_is_pathwise_monotone_and_no_discount_means_no_shift() {
    let sim = simulate(&small(5000, 2)).unwrap();
    let t = &sim.latent;
    let grid: Vec<f64> = (0..8).map(|k| k as f64 * 0.1).collect();
    for i in 0..t.len() {
        for w in grid.windows(2) {
            assert!(t.selection_at(i, w[1]) >= t.selection_at(i, w[0]));
        }
        assert_eq!(t.y0[i], 0);
        assert_eq!(t.outcome_at(i, 0.0), 0);
        assert!(t.s_d[i] >= t.s0[i]);
    }
}

#[test]
fn no_selection_effect_makes_everyone_an_always_buyer() {
    let cfg = DgpConfig {
        selection_slope: 0.0,
        selection_shift: 0.0,
        ..small(3000, 3)
    };
    let sim = simulate(&cfg).unwrap();
    assert_eq!(sim.latent.s0, sim.latent.s_d);
    assert!(sim.observed.s0().iter().all(|&s| s == 1.0));
}

#[test]
fn zero_outcome_model_gives_no_shifts() {
    let cfg = DgpConfig {
        outcome_intercept: 0.0,
        outcome_coef: vec![],
        ..small(3000, 3)
    };
    let sim = simulate(&cfg).unwrap();
    assert!(sim.observed.y().iter().all(|&y| y == 0.0));
}

#[test]
fn always_buyer_share_matches_the_oracle() {
    let cfg = small(20_000, 7);
    let sim = simulate(&cfg).unwrap();
    let truth = oracle_truth(&cfg, 400_000).unwrap();
    let s0 = sim.observed.s0();
    let share = s0.iter().sum::<f64>() / s0.len() as f64;
    let mc_se = (share * (1.0 - share) / s0.len() as f64).sqrt();
    let se = (mc_se.powi(2) + truth.always_buyer_share_se.powi(2)).sqrt();
    assert!(
        (share - truth.always_buyer_share).abs() < 3.0 * se,
        "{share} vs {truth:?}"
    );
}

#[test]
fn default_config_magnitudes() {
    let t = oracle_truth(&DgpConfig::default(), 400_000).unwrap();
    assert!((t.theta_ab - 0.15).abs() < 0.01, "{t:?}");
    assert!((t.always_buyer_share - 0.48).abs() < 0.03, "{t:?}");
    assert!((t.delta_ab_binary - 0.04).abs() < 0.01, "{t:?}");
    assert!(t.monotonicity_slope > 0.0);
    assert_eq!(t.n_without_overlap, 0);
}

#[test]
fn tiny_population_is_refused() {
    let e = simulate(&small(120, 1)).unwrap_err();
    assert!(e.is_validation(), "{e}");
}

#[test]
fn observed_dataset_shape() {
    let sim = simulate(&small(1000, 9)).unwrap();
    let ds = &sim.observed;
    assert_eq!(ds.x_columns.len(), 6);
    assert_eq!(ds.w_columns.len(), 4);
    assert_eq!(ds.x_columns[5], ColumnMeta::binary("x6"));
    assert_eq!(ds.w_columns[0], ColumnMeta::continuous("w1"));
    assert!(ds.outcome(Outcome::Upselling).is_none());
    assert!(ds.d().iter().all(|&d| (0.01..=0.7).contains(&d)));
}

#[test]
fn latent_csv_prefixes_hidden_columns() {
    let sim = simulate(&small(400, 9)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("latent.csv");
    sim.latent.write_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("x1,"));
    assert!(header.contains("latent_v,") && header.ends_with("latent_surveyed"));
    assert_eq!(text.lines().count(), 401);
}

#[test]
fn oracle_nuisances_are_ordered_by_arm() {
    let cfg = small(4000, 11);
    let sim = simulate(&cfg).unwrap();
    let ab = filter_always_buyers(&sim.observed);
    let nui = oracle_nuisances(&cfg, &ab).unwrap();
    for i in 0..ab.len() {
        assert!(nui.mu1[i] >= nui.mu0[i]);
        assert!(nui.p1[i] > 0.0 && nui.p1[i] < 1.0);
    }
    let cape = oracle_cape(&cfg, &ab).unwrap();
    assert!(cape.iter().all(|&c| c >= 0.0));
}

#[test]
fn discount_is_independent_of_the_confounder_given_x() {
    let mut rejections = 0;
    let reps = 40;
    for rep in 0..reps {
        let sim = simulate(&small(3000, 100 + rep)).unwrap();
        let t = &sim.latent;
        let mut ab = filter_always_buyers(&sim.observed);
        // replace W by the unobserved confounder
        let mut k = 0;
        for i in 0..t.len() {
            if t.survey_row[i].is_some() && t.s0[i] == 1 {
                ab.records[k].w_personal = vec![t.v[i]];
                k += 1;
            }
        }
        let ab = Dataset {
            w_columns: vec![ColumnMeta::continuous("v")],
            ..ab
        };
        let table = independence_wald(&ab).unwrap();
        if table.rows[0].p_value < 0.05 {
            rejections += 1;
        }
    }
    assert!(rejections <= 6, "{rejections} of {reps}");
}

#[test]
fn study_reports_failures_and_summaries() {
    let cfg = small(3000, 12);
    let params = McParams {
        reps: 4,
        oracle_draws: 50_000,
        ..McParams::default()
    };
    let s = monte_carlo_study(&cfg, McEstimator::DmlOracle, &params).unwrap();
    assert_eq!(s.n_ok, 4);
    assert_eq!(s.reps.len(), 4);
    assert!((0.0..=1.0).contains(&s.coverage));
    assert!((s.mc_se - s.sd_estimate / 2.0).abs() < 1e-15);

    let tiny = small(120, 1);
    let s = monte_carlo_study(&tiny, McEstimator::NaiveOls, &params).unwrap();
    assert_eq!(s.n_failed, 4);
    assert!(s.reps.iter().all(|r| r.error.is_some()));
    assert!(monte_carlo_study(&cfg, McEstimator::NaiveOls, &McParams { reps: 1, ..params }).is_err());
}
