//! Shared fixtures and reference implementations for the integration tests.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfqsrr::tree::SplitCandidate;
use rfqsrr::Dataset;

/// Relative tie tolerance of the tree engine.
pub const TIE: f64 = 1e-10;
/// Zero-gain floor of the tree engine, relative to the parent SS.
pub const FLOOR: f64 = 1e-12;

pub fn dataset(columns: Vec<Vec<f64>>, y: Vec<f64>) -> Dataset {
    let n = y.len();
    let ids = (0..n).map(|i| format!("r{i}")).collect();
    let names = (0..columns.len()).map(|j| format!("x{j}")).collect();
    Dataset::from_columns(ids, names, columns, y).unwrap()
}

/// Sum of squared deviations from the mean, computed in two passes.
fn ss(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - mean) * (v - mean)).sum()
}

/// Exhaustive split search: every candidate feature, every midpoint between
/// consecutive distinct values, children scored from scratch. Candidates
/// are visited by ascending (feature, threshold) and a later one wins only
/// when it beats the incumbent by more than the relative tie tolerance.
pub fn oracle_best_split(d: &Dataset, rows: &[usize], features: &[usize]) -> Option<SplitCandidate> {
    let y: Vec<f64> = rows.iter().map(|&r| d.response()[r]).collect();
    let parent = ss(&y);
    let mut feats = features.to_vec();
    feats.sort_unstable();
    feats.dedup();
    let mut target = FLOOR * parent;
    let mut best = None;
    for f in feats {
        let col = d.column(f);
        let mut values: Vec<f64> = rows.iter().map(|&r| col[r]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let threshold = rfqsrr::tree::midpoint(w[0], w[1]);
            let (mut left, mut right) = (Vec::new(), Vec::new());
            for &r in rows {
                if col[r] <= threshold {
                    left.push(d.response()[r]);
                } else {
                    right.push(d.response()[r]);
                }
            }
            let score = parent - ss(&left) - ss(&right);
            if score > target {
                target = score + TIE * score.abs();
                best = Some(SplitCandidate { feature: f, threshold, score });
            }
        }
    }
    best
}

/// Random split instance with `n <= max_n`, `p <= max_p`; values are drawn
/// from a coarse grid part of the time so that ties and repeated values
/// occur. Rows are a bootstrap-style multiset.
pub fn random_split_instance(rng: &mut ChaCha8Rng, max_n: usize, max_p: usize) -> (Dataset, Vec<usize>, Vec<usize>) {
    let n = rng.random_range(2..=max_n);
    let p = rng.random_range(1..=max_p);
    let coarse = rng.random_bool(0.4);
    let draw = |rng: &mut ChaCha8Rng| -> f64 {
        if coarse {
            rng.random_range(0..5) as f64
        } else {
            rng.random_range(-3.0..3.0)
        }
    };
    let columns: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| draw(rng)).collect()).collect();
    let y: Vec<f64> = (0..n).map(|_| draw(rng)).collect();
    let rows: Vec<usize> = if rng.random_bool(0.5) {
        (0..n).collect()
    } else {
        (0..n).map(|_| rng.random_range(0..n)).collect()
    };
    let k = rng.random_range(1..=p);
    let features = rand::seq::index::sample(rng, p, k).into_vec();
    (dataset(columns, y), rows, features)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Whether `a` and `b` agree in feature and threshold and their scores agree
/// within `tol` (absolute).
pub fn same_split(a: &Option<SplitCandidate>, b: &Option<SplitCandidate>, tol: f64) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => {
            a.feature == b.feature && a.threshold == b.threshold && (a.score - b.score).abs() <= tol
        }
        _ => false,
    }
}
