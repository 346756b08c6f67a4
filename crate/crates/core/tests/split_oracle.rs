//! The split search agrees with an exhaustive reference search.

mod common;

use common::{dataset, oracle_best_split, random_split_instance, rng, same_split};
use proptest::prelude::*;
use rfqsrr::best_split;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_exhaustive_search(seed in any::<u64>()) {
        let (d, rows, features) = random_split_instance(&mut rng(seed), 60, 8);
        let fast = best_split(&d, &rows, &features);
        let slow = oracle_best_split(&d, &rows, &features);
        prop_assert!(same_split(&fast, &slow, 1e-9), "fast {fast:?} oracle {slow:?}");
    }

    #[test]
    fn threshold_separates_neighbouring_values(seed in any::<u64>()) {
        let (d, rows, features) = random_split_instance(&mut rng(seed), 40, 4);
        if let Some(s) = best_split(&d, &rows, &features) {
            let col = d.column(s.feature);
            let below = rows.iter().map(|&r| col[r]).filter(|&v| v <= s.threshold).fold(f64::MIN, f64::max);
            let above = rows.iter().map(|&r| col[r]).filter(|&v| v > s.threshold).fold(f64::MAX, f64::min);
            prop_assert!(below < above);
            prop_assert!(s.threshold >= below && s.threshold < above);
            prop_assert!(s.score > 0.0);
        }
    }
}

#[test]
fn worked_example() {
    let d = dataset(vec![vec![1.0, 2.0, 3.0, 4.0, 5.0]], vec![0.0, 0.0, 0.0, 1.0, 1.0]);
    let s = best_split(&d, &[0, 1, 2, 3, 4], &[0]).unwrap();
    assert_eq!(s.threshold, 3.5);
    assert!((s.score - 1.2).abs() < 1e-12);
}

#[test]
fn equal_scores_pick_lowest_feature() {
    let x = vec![1.0, 2.0, 3.0, 4.0];
    let d = dataset(vec![x.clone(), x], vec![0.0, 0.0, 5.0, 5.0]);
    assert_eq!(best_split(&d, &[0, 1, 2, 3], &[1, 0]).unwrap().feature, 0);
}

#[test]
fn constant_inputs_have_no_split() {
    let d = dataset(vec![vec![2.0; 6]], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    assert!(best_split(&d, &[0, 1, 2, 3, 4, 5], &[0]).is_none());
    let d = dataset(vec![vec![1.0, 2.0, 3.0]], vec![7.0; 3]);
    assert!(best_split(&d, &[0, 1, 2], &[0]).is_none());
}
