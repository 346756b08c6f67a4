//! Property tests for the structural invariants of sampling, trees, forests,
//! importance, selection and stability bookkeeping.

mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rfqsrr::boruta::{add_shadows, binomial_two_sided};
use rfqsrr::data::{read_csv, split_2to1, train_size, write_csv, BagSample, LoadOptions};
use rfqsrr::protocol::{stability_row, STABILITY_FRACTIONS};
use rfqsrr::rng::derive_seed;
use rfqsrr::select::{required_count, ConsensusRecord};
use rfqsrr::{fit_forest, fit_tree, Dataset, Forest, ForestParams, TreeParams};

fn table(n: usize, p: usize, seed: u64) -> Dataset {
    use rand::Rng;
    let mut rng = common::rng(seed);
    let columns: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let y = (0..n).map(|i| columns[0][i] * 2.0 + rng.random_range(-0.5..0.5)).collect();
    common::dataset(columns, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bag_is_n_draws_and_oob_is_the_complement(n in 1usize..300, seed in any::<u64>()) {
        let bag = BagSample::draw(n, seed);
        prop_assert_eq!(bag.indices.len(), n);
        prop_assert!(bag.indices.iter().all(|&i| i < n));
        let drawn: BTreeSet<usize> = bag.indices.iter().copied().collect();
        let expected: Vec<usize> = (0..n).filter(|i| !drawn.contains(i)).collect();
        prop_assert_eq!(&bag.oob_indices, &expected);
        prop_assert_eq!(bag.counts(n).iter().map(|&c| c as usize).sum::<usize>(), n);
    }

    #[test]
    fn split_is_a_two_to_one_partition(n in 3usize..200, seed in any::<u64>()) {
        let d = table(n, 2, seed);
        let s = split_2to1(&d, seed).unwrap();
        prop_assert_eq!(s.train_rows.len(), train_size(n));
        prop_assert_eq!(s.train_rows.len() + s.test_rows.len(), n);
        let mut all: Vec<usize> = s.train_rows.iter().chain(&s.test_rows).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert!((train_size(n) as f64 - 2.0 * n as f64 / 3.0).abs() <= 0.5);
    }

    #[test]
    fn tree_predictions_stay_within_the_training_range(
        n in 2usize..80,
        seed in any::<u64>(),
        min_node in 2usize..8,
    ) {
        let d = table(n, 3, seed);
        let bag = BagSample::draw(n, seed);
        let params = TreeParams { mtry: 2, min_node_size: min_node, max_depth: None, seed };
        let tree = fit_tree(&d, &bag.indices, &params).unwrap();
        let ys: Vec<f64> = bag.indices.iter().map(|&r| d.response()[r]).collect();
        let lo = ys.iter().copied().fold(f64::MAX, f64::min);
        let hi = ys.iter().copied().fold(f64::MIN, f64::max);
        for i in 0..n {
            let v = tree.predict(&d.row(i)).unwrap();
            prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
        }
    }

    #[test]
    fn depth_limit_is_respected(seed in any::<u64>(), depth in 0usize..4) {
        let d = table(60, 3, seed);
        let rows: Vec<usize> = (0..60).collect();
        let params = TreeParams { mtry: 3, min_node_size: 2, max_depth: Some(depth), seed };
        let tree = fit_tree(&d, &rows, &params).unwrap();
        prop_assert!(tree.depth() <= depth);
        prop_assert!(tree.n_leaves() <= 1 << depth);
    }

    #[test]
    fn forest_json_round_trip_is_exact(seed in any::<u64>()) {
        let d = table(40, 4, seed);
        let forest = fit_forest(&d, &ForestParams::b1k(seed).with_trees(8)).unwrap();
        let back = Forest::from_json(&forest.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.predict_dataset(&d).unwrap(), forest.predict_dataset(&d).unwrap());
    }

    #[test]
    fn unused_features_have_zero_importance(seed in any::<u64>()) {
        let d = table(40, 6, seed);
        let params = ForestParams { max_depth: Some(1), ..ForestParams::b1k(seed).with_trees(5) };
        let forest = fit_forest(&d, &params).unwrap();
        let report = forest.permutation_importance(&d, seed).unwrap();
        for f in &report.features {
            if !f.used_in_forest {
                prop_assert_eq!(f.raw_importance, 0.0);
                prop_assert_eq!(f.z_score, 0.0);
            }
        }
    }

    #[test]
    fn shadows_are_permutations_of_their_sources(seed in any::<u64>(), p in 1usize..8) {
        let d = table(20, p, seed);
        let s = add_shadows(&d, 5, seed).unwrap();
        prop_assert_eq!(s.n_features(), p + p.max(5));
        for k in 0..p.max(5) {
            let mut shadow = s.column(p + k).to_vec();
            let mut source = d.column(k % p).to_vec();
            shadow.sort_by(f64::total_cmp);
            source.sort_by(f64::total_cmp);
            prop_assert_eq!(shadow, source);
        }
    }

    #[test]
    fn binomial_p_value_is_a_probability(trials in 1usize..200, frac in 0.0f64..=1.0) {
        let hits = (frac * trials as f64).round() as usize;
        let pv = binomial_two_sided(hits, trials);
        prop_assert!((0.0..=1.0).contains(&pv));
        prop_assert!((pv - binomial_two_sided(trials - hits, trials)).abs() < 1e-12);
    }

    #[test]
    fn consensus_sets_shrink_as_the_threshold_rises(
        counts in prop::collection::vec(0usize..=20, 1..40),
        mut xs in prop::collection::vec(0.001f64..=1.0, 2..8),
    ) {
        let record = ConsensusRecord {
            names: (0..counts.len()).map(|j| format!("f{j}")).collect(),
            counts,
            n_bags: 20,
            seed: 0,
        };
        xs.sort_by(f64::total_cmp);
        for w in xs.windows(2) {
            prop_assert!(required_count(w[0], 20) <= required_count(w[1], 20));
            let lo: BTreeSet<usize> = record.select(w[0]).unwrap().selected.into_iter().collect();
            let hi: BTreeSet<usize> = record.select(w[1]).unwrap().selected.into_iter().collect();
            prop_assert!(hi.is_subset(&lo));
        }
    }

    #[test]
    fn stability_counts_are_monotone(
        sets in prop::collection::vec(prop::collection::vec(0usize..30, 0..10), 1..40),
    ) {
        let row = stability_row("m", &sets).unwrap();
        prop_assert_eq!(row.counts.len(), STABILITY_FRACTIONS.len());
        for w in row.counts.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        prop_assert!(row.counts[STABILITY_FRACTIONS.len() - 1] <= row.at_least_once);
        prop_assert!(row.noise <= row.at_least_once);
        let union: BTreeSet<usize> = sets.iter().flatten().copied().collect();
        prop_assert_eq!(row.at_least_once, union.len());
        let mean = sets.iter().map(|s| s.iter().collect::<BTreeSet<_>>().len()).sum::<usize>() as f64
            / sets.len() as f64;
        prop_assert!((row.average_size - mean).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip_preserves_the_table(n in 1usize..30, p in 1usize..6, seed in any::<u64>()) {
        let d = table(n, p, seed);
        let mut buf = Vec::new();
        write_csv(&d, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), LoadOptions::default()).unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    fn derived_seeds_separate_paths(seed in any::<u64>(), a in 0u64..1000, b in 0u64..1000) {
        prop_assume!(a != b);
        prop_assert_ne!(derive_seed(seed, &[a]), derive_seed(seed, &[b]));
        prop_assert_ne!(derive_seed(seed, &[a, b]), derive_seed(seed, &[b, a]));
    }
}
