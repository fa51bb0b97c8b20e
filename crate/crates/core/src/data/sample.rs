use super::{Dataset, Outcome};
use crate::error::{Error, Result};
use crate::rng;
use rand::seq::{index, SliceRandom};

/// Keeps the always buyers (`S(0) = 1`).
pub fn filter_always_buyers(ds: &Dataset) -> Dataset {
    let idx: Vec<usize> = (0..ds.len()).filter(|&i| ds.records[i].s0_would_buy == 1).collect();
    if idx.is_empty() {
        log::warn!("no always buyers in a sample of {}", ds.len());
    }
    ds.subset(&idx)
}

/// Random disjoint partition; the training part has `round(n * train_frac)`
/// rows, clamped so both parts are nonempty.
pub fn train_test_split(ds: &Dataset, train_frac: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = ds.len();
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::validation(format!("train_frac {train_frac} not in (0, 1)")));
    }
    if n < 2 {
        return Err(Error::validation("need at least 2 records to split"));
    }
    let n_train = ((n as f64 * train_frac).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, "train_test_split", 0));
    let (train, test) = order.split_at(n_train);
    let mut train = train.to_vec();
    let mut test = test.to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// Keeps every minority-class record plus an equally large uniform sample of
/// the majority class. Rows keep their original relative order.
pub fn balance_binary_outcome(ds: &Dataset, outcome: Outcome, seed: u64) -> Result<Dataset> {
    let y = ds
        .outcome(outcome)
        .ok_or_else(|| Error::validation(format!("outcome {} not recorded", outcome.name())))?;
    let ones: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 1.0).collect();
    let zeros: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 0.0).collect();
    if ones.is_empty() || zeros.is_empty() {
        return Err(Error::validation(format!(
            "outcome {} has a single class",
            outcome.name()
        )));
    }
    let (minority, majority) = if ones.len() <= zeros.len() {
        (ones, zeros)
    } else {
        (zeros, ones)
    };
    let mut rng = rng::stream(seed, "balance", 0);
    let mut keep = minority.clone();
    keep.extend(
        index::sample(&mut rng, majority.len(), minority.len())
            .into_iter()
            .map(|k| majority[k]),
    );
    keep.sort_unstable();
    Ok(ds.subset(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::tests::{record, toy};

    fn ds_with(ones: usize, zeros: usize) -> Dataset {
        let mut recs = Vec::new();
        for i in 0..ones + zeros {
            recs.push(record(u8::from(i < ones), 0.4, (i % 2) as u8, vec![i as f64]));
        }
        toy(recs)
    }

    #[test]
    fn balance_keeps_all_of_the_minority_class() {
        let ds = ds_with(3481, 9576);
        let b = balance_binary_outcome(&ds, Outcome::DemandShift, 1).unwrap();
        assert_eq!(b.len(), 6962);
        assert_eq!(b.y().iter().filter(|&&v| v == 1.0).count(), 3481);
    }

    #[test]
    fn balance_edge_cases() {
        let ds = ds_with(1, 5);
        assert_eq!(balance_binary_outcome(&ds, Outcome::DemandShift, 3).unwrap().len(), 2);
        let even = ds_with(4, 4);
        assert_eq!(balance_binary_outcome(&even, Outcome::DemandShift, 3).unwrap(), even);
        assert!(balance_binary_outcome(&ds_with(0, 5), Outcome::DemandShift, 3).is_err());
    }

    #[test]
    fn split_sizes_and_determinism() {
        let ds = ds_with(50, 50);
        let (a, b) = train_test_split(&ds, 0.75, 9).unwrap();
        assert_eq!((a.len(), b.len()), (75, 25));
        let (a2, _) = train_test_split(&ds, 0.75, 9).unwrap();
        assert_eq!(a, a2);
        let mut all: Vec<f64> = a.records.iter().chain(&b.records).map(|r| r.x_demand[0]).collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..100).map(f64::from).collect::<Vec<_>>());
        let (c, d) = train_test_split(&ds_with(1, 1), 0.5, 0).unwrap();
        assert_eq!((c.len(), d.len()), (1, 1));
        assert!(train_test_split(&ds_with(1, 0), 0.5, 0).is_err());
    }

    #[test]
    fn always_buyer_filter() {
        let ds = ds_with(10, 10);
        let ab = filter_always_buyers(&ds);
        assert_eq!(ab.len(), 10);
        assert!(ab.records.iter().all(|r| r.s0_would_buy == 1));
        assert_eq!(filter_always_buyers(&ab), ab);
        let none = toy(vec![record(1, 0.4, 0, vec![1.0])]);
        assert!(filter_always_buyers(&none).is_empty());
    }

    proptest::proptest! {
        #[test]
        fn balance_is_exactly_half(ones in 1usize..60, zeros in 1usize..60, seed in 0u64..1000) {
            let b = balance_binary_outcome(&ds_with(ones, zeros), Outcome::DemandShift, seed).unwrap();
            let k = b.y().iter().filter(|&&v| v == 1.0).count();
            proptest::prop_assert_eq!(b.len(), 2 * ones.min(zeros));
            proptest::prop_assert_eq!(2 * k, b.len());
        }
    }
}
