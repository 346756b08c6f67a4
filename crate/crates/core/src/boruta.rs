//! All-relevant feature selection with shadow (contrast) variables.
//!
//! Each iteration appends a shuffled copy of every undecided descriptor,
//! fits a forest on the extended data and compares each undecided
//! descriptor's importance z-score with the best shadow z-score. Hits are
//! then tested against `Binomial(trials, 0.5)`, two-sided, at `alpha`
//! Bonferroni-corrected by the number of undecided descriptors.

use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::forest::{fit_forest, ForestParams};
use crate::rng::{derive_seed, stream, tag};

pub const SHADOW_PREFIX: &str = "SHADOW_";

/// Which descriptors get a shadow copy in each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShadowPool {
    /// Only the still-undecided descriptors; the pool shrinks as decisions
    /// are made.
    #[default]
    Undecided,
    /// Every input descriptor, rejected or not. Keeps the best-shadow
    /// yardstick calibrated to the full descriptor count at the price of a
    /// wider forest in late iterations.
    AllFeatures,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BorutaParams {
    /// Forest grown at every iteration; its own seed is ignored in favour
    /// of per-iteration seeds derived from `seed`.
    pub forest: ForestParams,
    pub max_iterations: usize,
    pub alpha: f64,
    pub min_shadows: usize,
    pub shadow_pool: ShadowPool,
    pub seed: u64,
}

impl Default for BorutaParams {
    fn default() -> Self {
        BorutaParams {
            forest: ForestParams::b1k(0),
            max_iterations: 100,
            alpha: 0.01,
            min_shadows: 5,
            shadow_pool: ShadowPool::Undecided,
            seed: 0,
        }
    }
}

impl BorutaParams {
    pub fn with_seed(self, seed: u64) -> Self {
        BorutaParams { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha = {} outside (0, 1)", self.alpha)));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        self.forest.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Confirmed,
    Rejected,
    Tentative,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Confirmed => "Confirmed",
            Decision::Rejected => "Rejected",
            Decision::Tentative => "Tentative",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDecision {
    pub name: String,
    pub status: Decision,
    pub hits: usize,
    pub trials: usize,
    /// 1-based iteration at which the feature was confirmed or rejected.
    pub decision_iteration: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Maximum shadow z-score.
    pub shadow_max: f64,
    /// z-score of every real descriptor active in this iteration.
    pub z_scores: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BorutaResult {
    pub features: Vec<FeatureDecision>,
    pub history: Vec<IterationRecord>,
}

impl BorutaResult {
    pub fn with_status(&self, status: Decision) -> Vec<usize> {
        (0..self.features.len()).filter(|&j| self.features[j].status == status).collect()
    }

    pub fn confirmed(&self) -> Vec<usize> {
        self.with_status(Decision::Confirmed)
    }

    /// Confirmed descriptors, plus Tentative ones when asked, ascending.
    pub fn important_set(&self, include_tentative: bool) -> Vec<usize> {
        (0..self.features.len())
            .filter(|&j| match self.features[j].status {
                Decision::Confirmed => true,
                Decision::Tentative => include_tentative,
                Decision::Rejected => false,
            })
            .collect()
    }

    /// CSV `feature,status,hits,trials,decision_iteration`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["feature", "status", "hits", "trials", "decision_iteration"])?;
        for f in &self.features {
            w.write_record([
                f.name.clone(),
                f.status.as_str().to_string(),
                f.hits.to_string(),
                f.trials.to_string(),
                f.decision_iteration.map(|i| i.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<boruta csv>", e))?;
        Ok(())
    }
}

/// Appends one independently shuffled copy of every column of `d`. With
/// fewer than `min_shadows` columns, copies cycle through the columns until
/// `min_shadows` shadows exist.
pub fn add_shadows(d: &Dataset, min_shadows: usize, seed: u64) -> Result<Dataset> {
    let all: Vec<usize> = (0..d.n_features()).collect();
    let (names, columns) = shadow_columns(d, &all, min_shadows, seed);
    d.append_columns(names, columns)
}

fn shadow_columns(
    d: &Dataset,
    sources: &[usize],
    min_shadows: usize,
    seed: u64,
) -> (Vec<String>, Vec<Vec<f64>>) {
    let p = sources.len();
    if p == 0 {
        return (Vec::new(), Vec::new());
    }
    let count = p.max(min_shadows);
    let mut names = Vec::with_capacity(count);
    let mut columns = Vec::with_capacity(count);
    for k in 0..count {
        let src = sources[k % p];
        let mut col = d.column(src).to_vec();
        col.shuffle(&mut stream(seed, &[tag::SHADOW, k as u64]));
        let base = &d.descriptor_names()[src];
        names.push(if k < p {
            format!("{SHADOW_PREFIX}{base}")
        } else {
            format!("{SHADOW_PREFIX}{base}#{}", k / p)
        });
        columns.push(col);
    }
    (names, columns)
}

/// Two-sided exact binomial p-value of `hits` successes in `trials` at 0.5.
pub fn binomial_two_sided(hits: usize, trials: usize) -> f64 {
    if trials == 0 {
        return 1.0;
    }
    let b = Binomial::new(0.5, trials as u64).expect("valid binomial");
    let k = hits as u64;
    let lower = b.cdf(k);
    let upper = if k == 0 { 1.0 } else { b.sf(k - 1) };
    (2.0 * lower.min(upper)).min(1.0)
}

pub fn boruta_run(d: &Dataset, params: &BorutaParams) -> Result<BorutaResult> {
    params.validate()?;
    if d.response_variance() <= 0.0 {
        return Err(Error::Degenerate("response has zero variance".into()));
    }
    let p = d.n_features();
    let mut features: Vec<FeatureDecision> = d
        .descriptor_names()
        .iter()
        .map(|name| FeatureDecision {
            name: name.clone(),
            status: Decision::Tentative,
            hits: 0,
            trials: 0,
            decision_iteration: None,
        })
        .collect();
    let mut decided = vec![false; p];
    let mut history = Vec::new();

    for it in 0..params.max_iterations {
        if decided.iter().all(|&dec| dec) {
            break;
        }
        let active: Vec<usize> = (0..p).filter(|&j| features[j].status != Decision::Rejected).collect();
        let undecided: Vec<usize> = (0..p).filter(|&j| !decided[j]).collect();
        let all: Vec<usize>;
        let sources = match params.shadow_pool {
            ShadowPool::Undecided => &undecided,
            ShadowPool::AllFeatures => {
                all = (0..p).collect();
                &all
            }
        };
        let (names, columns) = shadow_columns(
            d,
            sources,
            params.min_shadows,
            derive_seed(params.seed, &[tag::BORUTA_ITER, it as u64]),
        );
        let extended = d.select_features(&active).append_columns(names, columns)?;
        let forest_params = params
            .forest
            .with_seed(derive_seed(params.seed, &[tag::BORUTA_FOREST, it as u64]));
        let forest = fit_forest(&extended, &forest_params)?;
        let report = forest.permutation_importance(
            &extended,
            derive_seed(params.seed, &[tag::BORUTA_IMPORTANCE, it as u64]),
        )?;
        let z = report.z_scores();
        let shadow_max = z[active.len()..].iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let mut z_scores = vec![None; p];
        for (k, &j) in active.iter().enumerate() {
            z_scores[j] = Some(z[k]);
            if !decided[j] {
                features[j].trials += 1;
                if z[k] > shadow_max {
                    features[j].hits += 1;
                }
            }
        }
        history.push(IterationRecord {
            iteration: it + 1,
            shadow_max,
            z_scores,
        });

        let threshold = params.alpha / undecided.len() as f64;
        for j in undecided {
            let f = &mut features[j];
            if binomial_two_sided(f.hits, f.trials) < threshold {
                f.status = if 2 * f.hits > f.trials {
                    Decision::Confirmed
                } else {
                    Decision::Rejected
                };
                f.decision_iteration = Some(it + 1);
                decided[j] = true;
            }
        }
    }
    Ok(BorutaResult { features, history })
}
