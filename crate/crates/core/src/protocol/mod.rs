//! Repeated split / select / model experiment.
//!
//! Each repetition splits the data 2:1, runs every configured selection
//! method on the larger part, fits a forest on the selected descriptors and
//! records out-of-bag R^2 on the training part and R^2 on the held-out part.
//! An ordinary least-squares model on the same descriptors is recorded as a
//! baseline. Selection work shared between methods (one importance ranking
//! for all TopN sizes, one Boruta run per profile, one set of consensus
//! counts) is computed once per repetition.

mod report;

use std::collections::HashMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boruta::{boruta_run, BorutaParams, BorutaResult};
use crate::data::{split_2to1, Dataset, SplitPair};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, ForestParams};
use crate::metrics::{mean, r_squared};
use crate::rng::{derive_seed, label_key, tag};
use crate::select::{consensus_counts, consensus_label, rank_features, ConsensusParams, ConsensusRecord, Ranking};

pub use report::{
    render_svg, stability_row, stability_table, summarize, write_baseline_csv, write_records_csv,
    write_stability_csv, MethodSummary, PlotOptions, StabilityRow, StabilityTable, STABILITY_FRACTIONS,
};

/// Smallest dataset the protocol accepts.
pub const MIN_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    B1k,
    B10k,
}

impl Profile {
    pub fn label(self) -> &'static str {
        match self {
            Profile::B1k => "B1K",
            Profile::B10k => "B10K",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MethodSpec {
    TopN { keep: usize },
    Boruta { profile: Profile },
    Consensus { threshold: f64 },
}

impl MethodSpec {
    pub fn label(&self) -> String {
        match *self {
            MethodSpec::TopN { keep } => format!("TOP{keep}"),
            MethodSpec::Boruta { profile } => profile.label().to_string(),
            MethodSpec::Consensus { threshold } => consensus_label(threshold),
        }
    }

    /// TOP100..TOP10, B1K and C_0.1..C_1.
    pub fn standard_set() -> Vec<MethodSpec> {
        let mut m: Vec<MethodSpec> = (1..=10).rev().map(|k| MethodSpec::TopN { keep: 10 * k }).collect();
        m.push(MethodSpec::Boruta { profile: Profile::B1k });
        m.extend((1..=10).map(|k| MethodSpec::Consensus {
            threshold: k as f64 / 10.0,
        }));
        m
    }
}

/// Seeds inside the nested parameter blocks are ignored; every stream is
/// derived from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub repetitions: usize,
    pub methods: Vec<MethodSpec>,
    /// Final model fitted on the selected descriptors.
    pub forest: ForestParams,
    /// Forest used to rank descriptors for TopN.
    pub ranking_forest: ForestParams,
    /// Boruta settings; the tree count comes from the profile.
    pub boruta: BorutaParams,
    pub b1k_trees: usize,
    pub b10k_trees: usize,
    pub consensus_bags: usize,
    pub consensus_profile: Profile,
    pub include_tentative: bool,
    pub seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            repetitions: 30,
            methods: MethodSpec::standard_set(),
            forest: ForestParams::b1k(0),
            ranking_forest: ForestParams::b1k(0),
            boruta: BorutaParams::default(),
            b1k_trees: 1000,
            b10k_trees: 10_000,
            consensus_bags: 50,
            consensus_profile: Profile::B1k,
            include_tentative: false,
            seed: 0,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("methods must not be empty"));
        }
        if self.consensus_bags == 0 {
            return Err(Error::invalid("consensus_bags must be at least 1"));
        }
        let mut labels: Vec<String> = self.methods.iter().map(MethodSpec::label).collect();
        labels.sort();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("method {} listed twice", w[0])));
        }
        for m in &self.methods {
            match *m {
                MethodSpec::TopN { keep: 0 } => return Err(Error::invalid("TopN keep must be at least 1")),
                MethodSpec::Consensus { threshold } if !(threshold > 0.0 && threshold <= 1.0) => {
                    return Err(Error::invalid(format!("consensus threshold {threshold} outside (0, 1]")))
                }
                _ => {}
            }
        }
        self.forest.validate()?;
        self.ranking_forest.validate()?;
        self.boruta_params(Profile::B1k, 0).validate()?;
        self.boruta_params(Profile::B10k, 0).validate()
    }

    pub fn profile_trees(&self, profile: Profile) -> usize {
        match profile {
            Profile::B1k => self.b1k_trees,
            Profile::B10k => self.b10k_trees,
        }
    }

    pub fn boruta_params(&self, profile: Profile, seed: u64) -> BorutaParams {
        BorutaParams {
            forest: self.boruta.forest.with_trees(self.profile_trees(profile)),
            seed,
            ..self.boruta
        }
    }
}

/// Seed of repetition `r` (0-based).
pub fn repetition_seed(master: u64, r: usize) -> u64 {
    derive_seed(master, &[tag::REPETITION, r as u64])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionRecord {
    /// 1-based.
    pub repetition: usize,
    pub method: String,
    pub selected: Vec<usize>,
    pub n_selected: usize,
    pub oob_r2: Option<f64>,
    pub test_r2: Option<f64>,
    /// Least-squares model on the same descriptors, held-out R^2.
    pub baseline_r2: Option<f64>,
    pub seconds: f64,
    pub error: Option<String>,
}

/// Runs every repetition. Configuration errors abort; failures inside one
/// repetition/method cell are recorded in that record's `error` field.
pub fn run_protocol(d: &Dataset, cfg: &ProtocolConfig) -> Result<Vec<RepetitionRecord>> {
    run_protocol_with(d, cfg, |_| {})
}

/// As [`run_protocol`], calling `on_repetition` with each repetition's
/// records as soon as it completes (in completion order).
pub fn run_protocol_with<F>(d: &Dataset, cfg: &ProtocolConfig, on_repetition: F) -> Result<Vec<RepetitionRecord>>
where
    F: Fn(&[RepetitionRecord]) + Sync,
{
    cfg.validate()?;
    if d.n_rows() < MIN_ROWS {
        return Err(Error::TooFewRows {
            n: d.n_rows(),
            min: MIN_ROWS,
        });
    }
    let per_rep: Vec<Vec<RepetitionRecord>> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|r| {
            let records = run_repetition(d, cfg, r);
            on_repetition(&records);
            records
        })
        .collect();
    Ok(per_rep.into_iter().flatten().collect())
}

#[derive(Default)]
struct SelectionCache {
    ranking: Option<std::result::Result<Ranking, String>>,
    boruta: HashMap<Profile, std::result::Result<BorutaResult, String>>,
    consensus: Option<std::result::Result<ConsensusRecord, String>>,
}

fn run_repetition(d: &Dataset, cfg: &ProtocolConfig, r: usize) -> Vec<RepetitionRecord> {
    let seed = repetition_seed(cfg.seed, r);
    let split = split_2to1(d, seed);
    let mut cache = SelectionCache::default();
    cfg.methods
        .iter()
        .map(|method| {
            let label = method.label();
            let start = Instant::now();
            let mut record = RepetitionRecord {
                repetition: r + 1,
                method: label.clone(),
                selected: Vec::new(),
                n_selected: 0,
                oob_r2: None,
                test_r2: None,
                baseline_r2: None,
                seconds: 0.0,
                error: None,
            };
            let outcome = split.as_ref().map_err(|e| e.to_string()).and_then(|split| {
                let selected = select(&mut cache, split, method, cfg, seed)?;
                record.n_selected = selected.len();
                record.selected = selected;
                record.baseline_r2 = linear_baseline(&split.train, &split.test, &record.selected).ok();
                let model = cfg.forest.with_seed(derive_seed(seed, &[tag::MODEL, label_key(&label)]));
                evaluate(split, &record.selected, &model).map_err(|e| e.to_string())
            });
            match outcome {
                Ok((oob, test)) => {
                    record.oob_r2 = Some(oob);
                    record.test_r2 = Some(test);
                }
                Err(e) => record.error = Some(e),
            }
            record.seconds = start.elapsed().as_secs_f64();
            record
        })
        .collect()
}

fn select(
    cache: &mut SelectionCache,
    split: &SplitPair,
    method: &MethodSpec,
    cfg: &ProtocolConfig,
    seed: u64,
) -> std::result::Result<Vec<usize>, String> {
    let train = &split.train;
    match *method {
        MethodSpec::TopN { keep } => {
            let ranking = cache.ranking.get_or_insert_with(|| {
                let params = cfg.ranking_forest.with_seed(derive_seed(seed, &[tag::RANKING]));
                rank_features(train, &params).map_err(|e| e.to_string())
            });
            let ranking = ranking.as_ref().map_err(Clone::clone)?;
            ranking.top(keep.min(ranking.n_features())).map(|o| o.selected).map_err(|e| e.to_string())
        }
        MethodSpec::Boruta { profile } => {
            let result = cache.boruta.entry(profile).or_insert_with(|| {
                let params = cfg.boruta_params(
                    profile,
                    derive_seed(seed, &[tag::SELECTION, label_key(profile.label())]),
                );
                boruta_run(train, &params).map_err(|e| e.to_string())
            });
            Ok(result.as_ref().map_err(Clone::clone)?.important_set(cfg.include_tentative))
        }
        MethodSpec::Consensus { threshold } => {
            let record = cache.consensus.get_or_insert_with(|| {
                let params = ConsensusParams {
                    n_bags: cfg.consensus_bags,
                    threshold,
                    boruta: cfg.boruta_params(cfg.consensus_profile, 0),
                    seed: derive_seed(seed, &[tag::SELECTION, label_key("consensus")]),
                };
                consensus_counts(train, &params).map_err(|e| e.to_string())
            });
            let record = record.as_ref().map_err(Clone::clone)?;
            record.select(threshold).map(|o| o.selected).map_err(|e| e.to_string())
        }
    }
}

/// Out-of-bag and held-out R^2 of a forest on `selected`; an empty selection
/// predicts the training mean.
fn evaluate(split: &SplitPair, selected: &[usize], params: &ForestParams) -> Result<(f64, f64)> {
    let (train, test) = (&split.train, &split.test);
    if selected.is_empty() {
        let m = mean(train.response());
        let oob = r_squared(train.response(), &vec![m; train.n_rows()])?;
        let held_out = r_squared(test.response(), &vec![m; test.n_rows()])?;
        return Ok((oob, held_out));
    }
    let train = train.select_features(selected);
    let forest = fit_forest(&train, params)?;
    Ok((forest.oob_r2(&train)?, forest.test_r2(&test.select_features(selected))?))
}

/// Least squares with intercept on `train` restricted to `features`,
/// evaluated as R^2 on `test`. Rank-deficient designs get the minimum-norm
/// solution; no features means the training-mean predictor.
pub fn linear_baseline(train: &Dataset, test: &Dataset, features: &[usize]) -> Result<f64> {
    if train.n_features() != test.n_features() {
        return Err(Error::Shape(format!(
            "train has {} features, test has {}",
            train.n_features(),
            test.n_features()
        )));
    }
    if let Some(&j) = features.iter().find(|&&j| j >= train.n_features()) {
        return Err(Error::Shape(format!("feature {j} out of range")));
    }
    let n = train.n_rows();
    let y_mean = mean(train.response());
    let x_means: Vec<f64> = features.iter().map(|&j| mean(train.column(j))).collect();
    let coef = if features.is_empty() {
        Vec::new()
    } else {
        let x = DMatrix::from_fn(n, features.len(), |i, k| train.value(i, features[k]) - x_means[k]);
        let y = DVector::from_iterator(n, train.response().iter().map(|v| v - y_mean));
        let svd = x.svd(true, true);
        let largest = svd.singular_values.max();
        let eps = largest * (n.max(features.len()) as f64) * f64::EPSILON;
        let beta = svd.solve(&y, eps).map_err(|e| Error::Degenerate(e.to_string()))?;
        beta.iter().copied().collect()
    };
    let pred: Vec<f64> = (0..test.n_rows())
        .map(|i| {
            y_mean
                + features
                    .iter()
                    .zip(&coef)
                    .zip(&x_means)
                    .map(|((&j, b), m)| b * (test.value(i, j) - m))
                    .sum::<f64>()
        })
        .collect();
    r_squared(test.response(), &pred)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticSpec};

    fn linear(n: usize, seed: u64, noise: f64) -> Dataset {
        generate_synthetic(&SyntheticSpec {
            n,
            p: 6,
            k_linear: 3,
            k_nonlinear: 0,
            noise_sd: noise,
            correlation_rho: 0.0,
            seed,
        })
        .unwrap()
        .dataset
    }

    fn small_config() -> ProtocolConfig {
        ProtocolConfig {
            repetitions: 2,
            methods: vec![
                MethodSpec::TopN { keep: 3 },
                MethodSpec::Boruta { profile: Profile::B1k },
                MethodSpec::Consensus { threshold: 0.5 },
            ],
            forest: ForestParams::b1k(0).with_trees(40),
            ranking_forest: ForestParams::b1k(0).with_trees(40),
            boruta: BorutaParams {
                max_iterations: 10,
                ..Default::default()
            },
            b1k_trees: 30,
            b10k_trees: 60,
            consensus_bags: 2,
            ..Default::default()
        }
    }

    #[test]
    fn exact_linear_fit() {
        let d = linear(60, 1, 0.0);
        let s = split_2to1(&d, 3).unwrap();
        let relevant: Vec<usize> = (0..6).filter(|&j| d.descriptor_names()[j].starts_with("REL")).collect();
        let r2 = linear_baseline(&s.train, &s.test, &relevant).unwrap();
        assert!((r2 - 1.0).abs() < 1e-10, "{r2}");
        let all: Vec<usize> = (0..6).collect();
        assert!((linear_baseline(&s.train, &s.test, &all).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn intercept_only_baseline() {
        let d = linear(30, 2, 0.5);
        let s = split_2to1(&d, 3).unwrap();
        let r2 = linear_baseline(&s.train, &s.test, &[]).unwrap();
        let m = mean(s.train.response());
        let want = r_squared(s.test.response(), &vec![m; s.test.n_rows()]).unwrap();
        assert_eq!(r2, want);
        assert!(r2 <= 0.0);
    }

    #[test]
    fn rank_deficient_design_gets_min_norm() {
        let d = linear(30, 4, 0.1);
        let copy = d.column(0).to_vec();
        let d = d.append_columns(vec!["dup".into()], vec![copy]).unwrap();
        let s = split_2to1(&d, 5).unwrap();
        let with_dup = linear_baseline(&s.train, &s.test, &[0, 6]).unwrap();
        let without = linear_baseline(&s.train, &s.test, &[0]).unwrap();
        assert!((with_dup - without).abs() < 1e-8);
    }

    #[test]
    fn default_config_round_trips() {
        let cfg = ProtocolConfig::default();
        assert_eq!(cfg.methods.len(), 21);
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<ProtocolConfig>(&json).unwrap(), cfg);
        let partial: ProtocolConfig =
            serde_json::from_str(r#"{"repetitions": 3, "methods": [{"kind": "top_n", "keep": 5}]}"#).unwrap();
        assert_eq!(partial.repetitions, 3);
        assert_eq!(partial.b1k_trees, 1000);
    }

    #[test]
    fn config_validation() {
        let mut cfg = small_config();
        cfg.methods.push(MethodSpec::TopN { keep: 3 });
        assert!(cfg.validate().is_err());
        let cfg = ProtocolConfig {
            methods: vec![MethodSpec::Consensus { threshold: 0.0 }],
            ..small_config()
        };
        assert!(cfg.validate().is_err());
        let cfg = ProtocolConfig {
            repetitions: 0,
            ..small_config()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn records_per_method_and_repetition() {
        let d = linear(40, 6, 0.2);
        let records = run_protocol(&d, &small_config()).unwrap();
        assert_eq!(records.len(), 6);
        for (k, r) in records.iter().enumerate() {
            assert_eq!(r.repetition, k / 3 + 1);
            assert_eq!(r.n_selected, r.selected.len());
            assert!(r.error.is_none(), "{:?}", r.error);
            assert!(r.test_r2.unwrap() <= 1.0 && r.oob_r2.unwrap() <= 1.0);
        }
        assert_eq!(records[0].method, "TOP3");
        assert_eq!(records[0].n_selected, 3);
    }

    #[test]
    fn too_few_rows() {
        let d = linear(9, 1, 0.1);
        assert!(matches!(
            run_protocol(&d, &small_config()),
            Err(Error::TooFewRows { n: 9, min: 10 })
        ));
    }

    #[test]
    fn repetition_seeds_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|r| repetition_seed(7, r)).collect();
        assert_eq!(seeds.len(), 1000);
    }
}
