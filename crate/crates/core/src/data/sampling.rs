use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, tag};

use super::Dataset;

/// A 2:1 train/test partition of a dataset.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    /// Source rows of `train`, ascending.
    pub train_rows: Vec<usize>,
    /// Source rows of `test`, ascending.
    pub test_rows: Vec<usize>,
    pub seed: u64,
}

/// Training-side size of a 2:1 split: `round(2n/3)`, halves rounded up.
pub fn train_size(n: usize) -> usize {
    (4 * n + 3) / 6
}

/// Uniform random 2:1 partition without replacement.
pub fn split_2to1(d: &Dataset, seed: u64) -> Result<SplitPair> {
    let n = d.n_rows();
    if n < 3 {
        return Err(Error::TooFewRows { n, min: 3 });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, &[tag::SPLIT]));
    let n_train = train_size(n);
    let mut train_rows = order[..n_train].to_vec();
    let mut test_rows = order[n_train..].to_vec();
    train_rows.sort_unstable();
    test_rows.sort_unstable();
    Ok(SplitPair {
        train: d.select_rows(&train_rows),
        test: d.select_rows(&test_rows),
        train_rows,
        test_rows,
        seed,
    })
}

/// One bootstrap bag: `n` row draws with replacement plus the rows never drawn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "BagIndices", into = "BagIndices")]
pub struct BagSample {
    pub indices: Vec<usize>,
    pub oob_indices: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(transparent)]
struct BagIndices(Vec<usize>);

impl From<BagIndices> for BagSample {
    fn from(b: BagIndices) -> Self {
        let n = b.0.len();
        BagSample::from_indices(b.0, n)
    }
}

impl From<BagSample> for BagIndices {
    fn from(b: BagSample) -> Self {
        BagIndices(b.indices)
    }
}

impl BagSample {
    /// Draws `n` rows uniformly with replacement from `0..n`.
    pub fn draw(n: usize, seed: u64) -> BagSample {
        let mut rng = stream(seed, &[tag::BAG]);
        let indices = (0..n).map(|_| rng.random_range(0..n)).collect();
        BagSample::from_indices(indices, n)
    }

    pub fn from_indices(indices: Vec<usize>, n: usize) -> BagSample {
        let mut seen = vec![false; n];
        for &i in &indices {
            seen[i] = true;
        }
        let oob_indices = (0..n).filter(|&i| !seen[i]).collect();
        BagSample { indices, oob_indices }
    }

    /// Multiplicity of every source row in the bag.
    pub fn counts(&self, n: usize) -> Vec<u32> {
        let mut counts = vec![0u32; n];
        for &i in &self.indices {
            counts[i] += 1;
        }
        counts
    }

    pub fn oob_fraction(&self) -> f64 {
        self.oob_indices.len() as f64 / self.indices.len().max(1) as f64
    }
}

/// Bootstrap bag over the rows of `d`.
pub fn bootstrap(d: &Dataset, seed: u64) -> Result<BagSample> {
    if d.n_rows() == 0 {
        return Err(Error::TooFewRows { n: 0, min: 1 });
    }
    Ok(BagSample::draw(d.n_rows(), seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> Dataset {
        Dataset::from_columns(
            (0..n).map(|i| format!("c{i}")).collect(),
            vec!["x".into()],
            vec![(0..n).map(|i| i as f64).collect()],
            (0..n).map(|i| 2.0 * i as f64).collect(),
        )
        .unwrap()
    }

    #[test]
    fn split_sizes() {
        for (n, want) in [(225, 150), (257, 171), (3, 2), (10, 7), (4, 3), (5, 3)] {
            let s = split_2to1(&ramp(n), 1).unwrap();
            assert_eq!(s.train.n_rows(), want, "n={n}");
            assert_eq!(s.test.n_rows(), n - want);
        }
    }

    #[test]
    fn split_is_partition_and_deterministic() {
        let d = ramp(225);
        let a = split_2to1(&d, 11).unwrap();
        let b = split_2to1(&d, 11).unwrap();
        let c = split_2to1(&d, 12).unwrap();
        assert_eq!(a.train_rows, b.train_rows);
        assert_ne!(a.train_rows, c.train_rows);
        let mut all: Vec<usize> = a.train_rows.iter().chain(&a.test_rows).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..225).collect::<Vec<_>>());
        // rows carried along with their responses
        for (k, &src) in a.test_rows.iter().enumerate() {
            assert_eq!(a.test.response()[k], 2.0 * src as f64);
        }
    }

    #[test]
    fn split_too_small() {
        assert!(split_2to1(&ramp(2), 0).is_err());
    }

    #[test]
    fn single_row_bag() {
        let b = bootstrap(&ramp(1), 5).unwrap();
        assert_eq!(b.indices, vec![0]);
        assert!(b.oob_indices.is_empty());
    }

    #[test]
    fn oob_is_sorted_complement() {
        for seed in 0..50 {
            let b = BagSample::draw(37, seed);
            assert_eq!(b.indices.len(), 37);
            assert!(b.oob_indices.windows(2).all(|w| w[0] < w[1]));
            for i in 0..37 {
                assert_eq!(b.oob_indices.contains(&i), !b.indices.contains(&i));
            }
        }
    }

    #[test]
    fn bag_serde_keeps_oob() {
        let b = BagSample::draw(20, 3);
        let json = serde_json::to_string(&b).unwrap();
        let back: BagSample = serde_json::from_str(&json).unwrap();
        assert_eq!(b, back);
    }
}
