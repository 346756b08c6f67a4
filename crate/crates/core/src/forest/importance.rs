use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{stream, tag};

use super::Forest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub name: String,
    /// Mean over trees of the out-of-bag MSE increase after permutation.
    pub raw_importance: f64,
    /// `raw_importance / (sd / sqrt(n_trees))`, 0 when undefined.
    pub z_score: f64,
    pub used_in_forest: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub features: Vec<FeatureImportance>,
}

impl ImportanceReport {
    pub fn z_scores(&self) -> Vec<f64> {
        self.features.iter().map(|f| f.z_score).collect()
    }

    /// Feature indices by decreasing z-score; ties broken by raw importance,
    /// then by index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.features.len()).collect();
        idx.sort_by(|&a, &b| {
            let (fa, fb) = (&self.features[a], &self.features[b]);
            fb.z_score
                .total_cmp(&fa.z_score)
                .then(fb.raw_importance.total_cmp(&fa.raw_importance))
                .then(a.cmp(&b))
        });
        idx
    }

    /// CSV `feature,raw_importance,z_score,used`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["feature", "raw_importance", "z_score", "used"])?;
        for f in &self.features {
            w.write_record([
                f.name.clone(),
                f.raw_importance.to_string(),
                f.z_score.to_string(),
                f.used_in_forest.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<importance csv>", e))?;
        Ok(())
    }
}

impl Forest {
    /// Permutation importance from per-tree out-of-bag rows.
    ///
    /// For tree `t` and a feature `j` it splits on, `j` is shuffled among
    /// the tree's OOB rows and the increase in the tree's OOB MSE is
    /// recorded. Trees that never split on `j` contribute exactly 0.
    pub fn permutation_importance(&self, d: &Dataset, seed: u64) -> Result<ImportanceReport> {
        self.check_training(d)?;
        let y = d.response();
        let per_tree: Vec<Vec<(usize, f64)>> = self
            .trees
            .par_iter()
            .zip(&self.bags)
            .enumerate()
            .map(|(t, (tree, bag))| {
                let oob = &bag.oob_indices;
                if oob.is_empty() {
                    return Vec::new();
                }
                let sq_err = |pred: f64, row: usize| (y[row] - pred) * (y[row] - pred);
                let base: f64 = oob.iter().map(|&r| sq_err(tree.predict_row(d, r), r)).sum();
                let mut shuffled = Vec::with_capacity(oob.len());
                tree.used_features()
                    .into_iter()
                    .map(|j| {
                        shuffled.clear();
                        shuffled.extend(oob.iter().map(|&r| d.value(r, j)));
                        shuffled.shuffle(&mut stream(seed, &[tag::PERMUTE, t as u64, j as u64]));
                        let permuted: f64 = oob
                            .iter()
                            .zip(&shuffled)
                            .map(|(&r, &v)| {
                                let pred = tree.predict_with(|f| if f == j { v } else { d.value(r, f) });
                                sq_err(pred, r)
                            })
                            .sum();
                        (j, (permuted - base) / oob.len() as f64)
                    })
                    .collect()
            })
            .collect();

        let p = d.n_features();
        let n_trees = self.trees.len();
        let mut sum = vec![0.0; p];
        let mut used = vec![false; p];
        for deltas in &per_tree {
            for &(j, v) in deltas {
                sum[j] += v;
                used[j] = true;
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n_trees as f64).collect();
        let mut sq_dev = vec![0.0; p];
        let mut contributions = vec![0usize; p];
        for deltas in &per_tree {
            for &(j, v) in deltas {
                sq_dev[j] += (v - mean[j]) * (v - mean[j]);
                contributions[j] += 1;
            }
        }
        let features = (0..p)
            .map(|j| {
                if !used[j] {
                    return FeatureImportance {
                        name: d.descriptor_names()[j].clone(),
                        raw_importance: 0.0,
                        z_score: 0.0,
                        used_in_forest: false,
                    };
                }
                // trees without a split on j contribute zeros
                let zeros = (n_trees - contributions[j]) as f64;
                let ss = sq_dev[j] + zeros * mean[j] * mean[j];
                let z_score = if n_trees < 2 || ss <= 0.0 {
                    0.0
                } else {
                    let sd = (ss / (n_trees - 1) as f64).sqrt();
                    mean[j] / (sd / (n_trees as f64).sqrt())
                };
                FeatureImportance {
                    name: d.descriptor_names()[j].clone(),
                    raw_importance: mean[j],
                    z_score,
                    used_in_forest: true,
                }
            })
            .collect();
        Ok(ImportanceReport { features })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{fit_forest, ForestParams};

    fn planted(n: usize, seed: u64) -> Dataset {
        let spec = crate::data::SyntheticSpec {
            n,
            p: 8,
            k_linear: 1,
            k_nonlinear: 0,
            noise_sd: 0.1,
            correlation_rho: 0.0,
            seed,
        };
        crate::data::generate_synthetic(&spec).unwrap().dataset
    }

    #[test]
    fn unused_feature_scores_exact_zero() {
        let mut d = planted(80, 1);
        let constant = vec![3.0; d.n_rows()];
        d = d.append_columns(vec!["CONST".into()], vec![constant]).unwrap();
        let f = fit_forest(&d, &ForestParams::b1k(2).with_trees(50)).unwrap();
        let rep = f.permutation_importance(&d, 3).unwrap();
        let c = rep.features.last().unwrap();
        assert!(!c.used_in_forest);
        assert_eq!(c.raw_importance, 0.0);
        assert_eq!(c.z_score, 0.0);
    }

    #[test]
    fn signal_ranks_first() {
        let d = planted(150, 2);
        let signal = d.descriptor_names().iter().position(|n| n.starts_with("REL_")).unwrap();
        let f = fit_forest(&d, &ForestParams::b1k(3).with_trees(100)).unwrap();
        let rep = f.permutation_importance(&d, 4).unwrap();
        assert_eq!(rep.ranking()[0], signal);
        assert!(rep.features[signal].z_score > 5.0);
    }

    #[test]
    fn deterministic_in_seed() {
        let d = planted(60, 5);
        let f = fit_forest(&d, &ForestParams::b1k(3).with_trees(30)).unwrap();
        assert_eq!(
            f.permutation_importance(&d, 9).unwrap(),
            f.permutation_importance(&d, 9).unwrap()
        );
    }

    #[test]
    fn csv_layout() {
        let d = planted(40, 6);
        let f = fit_forest(&d, &ForestParams::b1k(3).with_trees(5)).unwrap();
        let mut out = Vec::new();
        f.permutation_importance(&d, 1).unwrap().write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("feature,raw_importance,z_score,used\n"));
        assert_eq!(text.lines().count(), 9);
    }
}
