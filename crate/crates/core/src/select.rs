//! Feature selection schemes built on forest importance and Boruta.
//!
//! * TopN ranks descriptors once by permutation z-score and keeps a prefix.
//! * Consensus runs Boruta on bootstrap bags of the data and keeps features
//!   confirmed in at least `ceil(x * N)` of `N` bags.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boruta::{boruta_run, BorutaParams, BorutaResult};
use crate::data::{BagSample, Dataset};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, ForestParams, ImportanceReport};
use crate::rng::{derive_seed, tag};

/// Slack for threshold products such as `0.3 * 50`, which is not exactly 15.
const THRESHOLD_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub sub_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub method: String,
    /// Selected feature indices, ascending.
    pub selected: Vec<usize>,
    /// Per-feature score the selection was based on.
    pub scores: Vec<f64>,
    pub provenance: Provenance,
}

impl SelectionOutcome {
    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    /// Confirmed (and optionally Tentative) features of one Boruta run,
    /// scored by hit count.
    pub fn from_boruta(
        method: impl Into<String>,
        result: &BorutaResult,
        include_tentative: bool,
        seed: u64,
    ) -> SelectionOutcome {
        SelectionOutcome {
            method: method.into(),
            selected: result.important_set(include_tentative),
            scores: result.features.iter().map(|f| f.hits as f64).collect(),
            provenance: Provenance {
                seed,
                sub_runs: result.history.len(),
            },
        }
    }
}

/// Writes `method,feature,score,selected` with one row per feature and outcome.
pub fn write_selection_csv<W: Write>(
    outcomes: &[SelectionOutcome],
    names: &[String],
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["method", "feature", "score", "selected"])?;
    for o in outcomes {
        if o.scores.len() != names.len() {
            return Err(Error::Shape(format!(
                "outcome {} has {} scores for {} features",
                o.method,
                o.scores.len(),
                names.len()
            )));
        }
        let mut chosen = vec![false; names.len()];
        for &j in &o.selected {
            chosen[j] = true;
        }
        for (j, name) in names.iter().enumerate() {
            w.write_record([
                o.method.as_str(),
                name,
                &o.scores[j].to_string(),
                if chosen[j] { "1" } else { "0" },
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<selection csv>", e))?;
    Ok(())
}

/// One importance ranking of all features, reusable for any TopN size.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub report: ImportanceReport,
    /// Feature indices, best first.
    pub order: Vec<usize>,
    pub seed: u64,
}

impl Ranking {
    pub fn n_features(&self) -> usize {
        self.order.len()
    }

    pub fn top(&self, n_keep: usize) -> Result<SelectionOutcome> {
        let p = self.order.len();
        if n_keep == 0 || n_keep > p {
            return Err(Error::invalid(format!("n_keep = {n_keep} outside 1..={p}")));
        }
        let mut selected = self.order[..n_keep].to_vec();
        selected.sort_unstable();
        Ok(SelectionOutcome {
            method: format!("TOP{n_keep}"),
            selected,
            scores: self.report.z_scores(),
            provenance: Provenance {
                seed: self.seed,
                sub_runs: 1,
            },
        })
    }
}

/// Fits a forest on all features and ranks them by permutation z-score.
pub fn rank_features(d: &Dataset, params: &ForestParams) -> Result<Ranking> {
    let forest = fit_forest(d, params)?;
    let report = forest.permutation_importance(d, params.seed)?;
    let order = report.ranking();
    Ok(Ranking {
        report,
        order,
        seed: params.seed,
    })
}

pub fn top_n(d: &Dataset, n_keep: usize, params: &ForestParams) -> Result<SelectionOutcome> {
    let p = d.n_features();
    if n_keep == 0 || n_keep > p {
        return Err(Error::invalid(format!("n_keep = {n_keep} outside 1..={p}")));
    }
    rank_features(d, params)?.top(n_keep)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConsensusParams {
    pub n_bags: usize,
    pub threshold: f64,
    pub boruta: BorutaParams,
    pub seed: u64,
}

impl Default for ConsensusParams {
    fn default() -> Self {
        ConsensusParams {
            n_bags: 50,
            threshold: 0.5,
            boruta: BorutaParams::default(),
            seed: 0,
        }
    }
}

impl ConsensusParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_bags == 0 {
            return Err(Error::invalid("n_bags must be at least 1"));
        }
        validate_threshold(self.threshold)?;
        self.boruta.validate()
    }
}

fn validate_threshold(x: f64) -> Result<()> {
    if x > 0.0 && x <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("threshold {x} outside (0, 1]")))
    }
}

/// Minimum confirmation count for threshold `x` over `n_bags` bags.
pub fn required_count(x: f64, n_bags: usize) -> usize {
    ((x * n_bags as f64 - THRESHOLD_SLACK).ceil() as usize).max(1)
}

pub fn consensus_label(x: f64) -> String {
    format!("C_{x}")
}

/// Per-feature confirmation counts over `n_bags` Boruta runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusRecord {
    pub names: Vec<String>,
    pub counts: Vec<usize>,
    pub n_bags: usize,
    pub seed: u64,
}

impl ConsensusRecord {
    pub fn select(&self, threshold: f64) -> Result<SelectionOutcome> {
        validate_threshold(threshold)?;
        let need = required_count(threshold, self.n_bags);
        Ok(SelectionOutcome {
            method: consensus_label(threshold),
            selected: (0..self.counts.len()).filter(|&j| self.counts[j] >= need).collect(),
            scores: self.counts.iter().map(|&c| c as f64).collect(),
            provenance: Provenance {
                seed: self.seed,
                sub_runs: self.n_bags,
            },
        })
    }

    /// Audit CSV `feature,confirm_count`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["feature", "confirm_count"])?;
        for (name, c) in self.names.iter().zip(&self.counts) {
            w.write_record([name.as_str(), &c.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<consensus csv>", e))?;
        Ok(())
    }
}

/// Runs Boruta on `n_bags` bootstrap bags and counts confirmations. A bag
/// whose response happens to be constant confirms nothing.
pub fn consensus_counts(d: &Dataset, params: &ConsensusParams) -> Result<ConsensusRecord> {
    params.validate()?;
    let n = d.n_rows();
    let confirmed: Vec<Vec<usize>> = (0..params.n_bags)
        .into_par_iter()
        .map(|b| {
            let bag = BagSample::draw(n, derive_seed(params.seed, &[tag::BAG_BORUTA, b as u64]));
            let sample = d.select_rows(&bag.indices);
            let boruta = params
                .boruta
                .with_seed(derive_seed(params.seed, &[tag::BAG_BORUTA, b as u64, 1]));
            match boruta_run(&sample, &boruta) {
                Ok(r) => Ok(r.confirmed()),
                Err(Error::Degenerate(_)) => Ok(Vec::new()),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let mut counts = vec![0; d.n_features()];
    for set in &confirmed {
        for &j in set {
            counts[j] += 1;
        }
    }
    Ok(ConsensusRecord {
        names: d.descriptor_names().to_vec(),
        counts,
        n_bags: params.n_bags,
        seed: params.seed,
    })
}

pub fn consensus(d: &Dataset, params: &ConsensusParams) -> Result<SelectionOutcome> {
    consensus_counts(d, params)?.select(params.threshold)
}

/// One Boruta-per-bag pass evaluated at every threshold, ascending. The
/// `threshold` field of `params` is ignored.
pub fn consensus_curve(
    d: &Dataset,
    params: &ConsensusParams,
    thresholds: &[f64],
) -> Result<Vec<SelectionOutcome>> {
    for &x in thresholds {
        validate_threshold(x)?;
    }
    let mut sorted = thresholds.to_vec();
    sorted.sort_by(f64::total_cmp);
    let record = consensus_counts(d, params)?;
    sorted.iter().map(|&x| record.select(x)).collect()
}
