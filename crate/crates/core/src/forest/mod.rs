//! Random-forest regression: bagged CART trees, out-of-bag evaluation and
//! permutation importance.

mod importance;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{BagSample, Dataset, Fingerprint};
use crate::error::{Error, Result};
use crate::metrics;
use crate::rng::{derive_seed, tag};
use crate::tree::{grow, RankTable, RegressionTree, TreeParams};

pub use importance::{FeatureImportance, ImportanceReport};

/// Candidate-feature count per split, resolved against the width of the
/// dataset a forest is fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mtry {
    /// `max(1, p / 3)`, the regression-forest convention.
    #[default]
    Third,
    /// `max(1, floor(sqrt(p)))`.
    Sqrt,
    /// A fixed count, clamped to `1..=p`.
    Count(usize),
}

impl Mtry {
    pub fn resolve(self, p: usize) -> usize {
        let m = match self {
            Mtry::Third => p / 3,
            Mtry::Sqrt => (p as f64).sqrt().floor() as usize,
            Mtry::Count(k) => k,
        };
        m.clamp(1, p.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub mtry: Mtry,
    pub min_node_size: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams::b1k(0)
    }
}

impl ForestParams {
    /// 1000 trees.
    pub fn b1k(seed: u64) -> Self {
        ForestParams {
            n_trees: 1000,
            mtry: Mtry::Third,
            min_node_size: 5,
            max_depth: None,
            seed,
        }
    }

    /// 10 000 trees, otherwise identical to [`ForestParams::b1k`].
    pub fn b10k(seed: u64) -> Self {
        ForestParams {
            n_trees: 10_000,
            ..Self::b1k(seed)
        }
    }

    pub fn with_trees(self, n_trees: usize) -> Self {
        ForestParams { n_trees, ..self }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        ForestParams { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::invalid("n_trees must be at least 1"));
        }
        if self.min_node_size < 2 {
            return Err(Error::invalid("min_node_size must be at least 2"));
        }
        if self.mtry == Mtry::Count(0) {
            return Err(Error::invalid("mtry must be at least 1"));
        }
        Ok(())
    }

    /// Seed of tree `i`; it drives both the bag and the node streams.
    pub fn tree_seed(&self, i: usize) -> u64 {
        derive_seed(self.seed, &[tag::TREE, i as u64])
    }

    pub fn tree_params(&self, p: usize, i: usize) -> TreeParams {
        TreeParams {
            mtry: self.mtry.resolve(p),
            min_node_size: self.min_node_size,
            max_depth: self.max_depth,
            seed: self.tree_seed(i),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    trees: Vec<RegressionTree>,
    bags: Vec<BagSample>,
    params: ForestParams,
    fingerprint: Fingerprint,
}

/// Per-row out-of-bag predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct OobPredictions {
    /// `None` for rows that fell in every bag.
    pub predictions: Vec<Option<f64>>,
    /// Number of trees that left each row out.
    pub contributing: Vec<usize>,
}

impl OobPredictions {
    /// Rows without any out-of-bag tree.
    pub fn missing(&self) -> usize {
        self.predictions.iter().filter(|p| p.is_none()).count()
    }

    /// R^2 over the rows that have a prediction.
    pub fn r_squared(&self, y: &[f64]) -> Result<f64> {
        let (ys, ps): (Vec<f64>, Vec<f64>) = y
            .iter()
            .zip(&self.predictions)
            .filter_map(|(&y, p)| p.map(|p| (y, p)))
            .unzip();
        if ys.is_empty() {
            return Err(Error::Degenerate("no row has an out-of-bag prediction".into()));
        }
        metrics::r_squared(&ys, &ps)
    }
}

pub fn fit_forest(d: &Dataset, params: &ForestParams) -> Result<Forest> {
    params.validate()?;
    let n = d.n_rows();
    if n < 2 {
        return Err(Error::TooFewRows { n, min: 2 });
    }
    if d.n_features() == 0 {
        return Err(Error::Shape("dataset has no descriptors".into()));
    }
    let ranks = RankTable::new(d);
    let grown: Vec<(RegressionTree, BagSample)> = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let bag = BagSample::draw(n, params.tree_seed(i));
            let tree = grow(d, &ranks, &bag.indices, &params.tree_params(d.n_features(), i))?;
            Ok((tree, bag))
        })
        .collect::<Result<_>>()?;
    let (trees, bags) = grown.into_iter().unzip();
    Ok(Forest {
        trees,
        bags,
        params: *params,
        fingerprint: d.fingerprint(),
    })
}

pub const FOREST_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ForestFile {
    format: String,
    version: u32,
    params: ForestParams,
    fingerprint: Fingerprint,
    trees: Vec<RegressionTree>,
    bags: Vec<BagSample>,
}

impl Forest {
    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn bags(&self) -> &[BagSample] {
        &self.bags
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn fingerprint(&self) -> &Fingerprint {
        &self.fingerprint
    }

    pub fn n_features(&self) -> usize {
        self.fingerprint.n_features
    }

    /// Mean of the per-tree predictions.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::Shape(format!(
                "input has {} values, forest expects {}",
                x.len(),
                self.n_features()
            )));
        }
        Ok(self.trees.iter().map(|t| t.predict_with(|f| x[f])).sum::<f64>() / self.trees.len() as f64)
    }

    fn check_layout(&self, d: &Dataset) -> Result<()> {
        let fp = d.fingerprint();
        if !self.fingerprint.same_features(&fp) {
            return Err(Error::FingerprintMismatch {
                expected: self.fingerprint.to_string(),
                found: fp.to_string(),
            });
        }
        Ok(())
    }

    fn check_training(&self, d: &Dataset) -> Result<()> {
        let fp = d.fingerprint();
        if self.fingerprint != fp {
            return Err(Error::FingerprintMismatch {
                expected: self.fingerprint.to_string(),
                found: fp.to_string(),
            });
        }
        Ok(())
    }

    /// Predictions for every row of a dataset with the training descriptor layout.
    pub fn predict_dataset(&self, d: &Dataset) -> Result<Vec<f64>> {
        self.check_layout(d)?;
        let scale = 1.0 / self.trees.len() as f64;
        Ok((0..d.n_rows())
            .into_par_iter()
            .map(|i| self.trees.iter().map(|t| t.predict_row(d, i)).sum::<f64>() * scale)
            .collect())
    }

    /// Out-of-bag prediction of each training row.
    pub fn oob_predict(&self, d: &Dataset) -> Result<OobPredictions> {
        self.check_training(d)?;
        let per_tree: Vec<Vec<f64>> = self
            .trees
            .par_iter()
            .zip(&self.bags)
            .map(|(t, bag)| bag.oob_indices.iter().map(|&i| t.predict_row(d, i)).collect())
            .collect();
        let n = d.n_rows();
        let mut sum = vec![0.0; n];
        let mut count = vec![0usize; n];
        for (bag, preds) in self.bags.iter().zip(&per_tree) {
            for (&i, &p) in bag.oob_indices.iter().zip(preds) {
                sum[i] += p;
                count[i] += 1;
            }
        }
        Ok(OobPredictions {
            predictions: sum
                .iter()
                .zip(&count)
                .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
                .collect(),
            contributing: count,
        })
    }

    /// Out-of-bag fraction of variance explained on the training data.
    pub fn oob_r2(&self, d: &Dataset) -> Result<f64> {
        self.oob_predict(d)?.r_squared(d.response())
    }

    /// Fraction of variance explained on held-out rows.
    pub fn test_r2(&self, test: &Dataset) -> Result<f64> {
        let pred = self.predict_dataset(test)?;
        metrics::r_squared(test.response(), &pred)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ForestFile {
            format: "rfqsrr-forest".into(),
            version: FOREST_FORMAT_VERSION,
            params: self.params,
            fingerprint: self.fingerprint.clone(),
            trees: self.trees.clone(),
            bags: self.bags.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Forest> {
        let f: ForestFile = serde_json::from_str(s)?;
        if f.version != FOREST_FORMAT_VERSION {
            return Err(Error::invalid(format!("unsupported forest version {}", f.version)));
        }
        if f.trees.is_empty() || f.trees.len() != f.bags.len() {
            return Err(Error::invalid("forest must hold one bag per tree"));
        }
        if f.bags.iter().any(|b| b.indices.len() != f.fingerprint.n_rows) {
            return Err(Error::invalid("bag size differs from training row count"));
        }
        if f.trees.iter().flat_map(|t| t.used_features()).any(|j| j >= f.fingerprint.n_features) {
            return Err(Error::invalid("tree splits on a feature outside the training layout"));
        }
        Ok(Forest {
            trees: f.trees,
            bags: f.bags,
            params: f.params,
            fingerprint: f.fingerprint,
        })
    }
}
