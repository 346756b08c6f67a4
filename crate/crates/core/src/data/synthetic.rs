//! Synthetic stand-in for descriptor/retention data.
//!
//! Response model:
//!
//! ```text
//! y = sum_linear x_i
//!   + sum_sine   A * sin(w * x_i)        (A = 2, w = 1.5)
//!   + sum_pairs  s * x_a * x_b           (s alternates +1, -1)
//!   + N(0, noise_sd^2)
//! ```
//!
//! Nonlinear features are consumed in order: the 1st, 3rd, 5th, ... each get
//! a sine term, and every 2nd, 4th, ... feature forms a product with its
//! predecessor. All descriptors are standard normal. When
//! `correlation_rho > 0` the first irrelevant columns (one per relevant
//! feature, while they last) are replaced by `rho * x_rel + sqrt(1 - rho^2) * z`.
//!
//! Ground truth is carried in the names (`REL_` / `IRR_`) and in
//! [`SyntheticTruth`], which serializes to the JSON sidecar.

use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream, tag};

use super::Dataset;

pub const SINE_AMPLITUDE: f64 = 2.0;
pub const SINE_FREQUENCY: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub p: usize,
    pub k_linear: usize,
    pub k_nonlinear: usize,
    pub noise_sd: f64,
    #[serde(default)]
    pub correlation_rho: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::invalid("n and p must be positive"));
        }
        if self.k_linear + self.k_nonlinear > self.p {
            return Err(Error::invalid(format!(
                "k_linear + k_nonlinear = {} exceeds p = {}",
                self.k_linear + self.k_nonlinear,
                self.p
            )));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::invalid("noise_sd must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&self.correlation_rho) {
            return Err(Error::invalid("correlation_rho must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureRole {
    Linear,
    Nonlinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedFeature {
    pub index: usize,
    pub name: String,
    pub role: FeatureRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Term {
    Linear { feature: usize },
    Sine { feature: usize, amplitude: f64, frequency: f64 },
    Product { a: usize, b: usize, sign: f64 },
}

impl Term {
    fn eval(&self, d: &Dataset, row: usize) -> f64 {
        match *self {
            Term::Linear { feature } => d.value(row, feature),
            Term::Sine { feature, amplitude, frequency } => {
                amplitude * (frequency * d.value(row, feature)).sin()
            }
            Term::Product { a, b, sign } => sign * d.value(row, a) * d.value(row, b),
        }
    }

    /// Variance of the term when its inputs are independent standard normals.
    fn variance(&self) -> f64 {
        match *self {
            Term::Linear { .. } => 1.0,
            // E[sin^2(wx)] = (1 - exp(-2w^2)) / 2 and E[sin(wx)] = 0
            Term::Sine { amplitude, frequency, .. } => {
                amplitude * amplitude * (1.0 - (-2.0 * frequency * frequency).exp()) / 2.0
            }
            Term::Product { .. } => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedCopy {
    pub index: usize,
    pub source: usize,
}

/// Ground truth of a generated dataset; the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub spec: SyntheticSpec,
    pub relevant: Vec<PlantedFeature>,
    pub terms: Vec<Term>,
    pub correlated_copies: Vec<CorrelatedCopy>,
    /// Var(y) implied by the generator.
    pub analytic_variance: f64,
}

impl SyntheticTruth {
    pub fn relevant_indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.relevant.iter().map(|f| f.index).collect();
        v.sort_unstable();
        v
    }

    /// Fraction of planted features contained in `selected`.
    pub fn recall(&self, selected: &[usize]) -> f64 {
        if self.relevant.is_empty() {
            return 1.0;
        }
        let hits = self.relevant.iter().filter(|f| selected.contains(&f.index)).count();
        hits as f64 / self.relevant.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub truth: SyntheticTruth,
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let SyntheticSpec { n, p, k_linear, k_nonlinear, .. } = *spec;
    let k_rel = k_linear + k_nonlinear;

    let positions = index::sample(&mut stream(spec.seed, &[tag::SYNTH, 0]), p, k_rel).into_vec();
    let mut relevant = Vec::with_capacity(k_rel);
    let mut names = vec![String::new(); p];
    let width = p.to_string().len();
    for (k, &pos) in positions.iter().enumerate() {
        let (role, name) = if k < k_linear {
            (FeatureRole::Linear, format!("REL_LIN_{:0width$}", k))
        } else {
            (FeatureRole::Nonlinear, format!("REL_NL_{:0width$}", k - k_linear))
        };
        names[pos] = name.clone();
        relevant.push(PlantedFeature { index: pos, name, role });
    }
    let mut irrelevant = Vec::with_capacity(p - k_rel);
    for (j, name) in names.iter_mut().enumerate() {
        if name.is_empty() {
            *name = format!("IRR_{:0width$}", j);
            irrelevant.push(j);
        }
    }

    let normal_column = |j: usize, salt: u64| -> Vec<f64> {
        let mut rng = stream(derive_seed(spec.seed, &[salt]), &[tag::SYNTH, j as u64]);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    };
    let mut columns: Vec<Vec<f64>> = (0..p).map(|j| normal_column(j, 1)).collect();

    let mut correlated_copies = Vec::new();
    if spec.correlation_rho > 0.0 {
        let rho = spec.correlation_rho;
        let tail = (1.0 - rho * rho).sqrt();
        for (c, &j) in irrelevant.iter().take(k_rel).enumerate() {
            let source = relevant[c].index;
            let mixed: Vec<f64> = columns[source]
                .iter()
                .zip(&columns[j])
                .map(|(&s, &z)| rho * s + tail * z)
                .collect();
            columns[j] = mixed;
            correlated_copies.push(CorrelatedCopy { index: j, source });
        }
    }

    let mut terms = Vec::new();
    for f in &relevant[..k_linear] {
        terms.push(Term::Linear { feature: f.index });
    }
    let nonlinear: Vec<usize> = relevant[k_linear..].iter().map(|f| f.index).collect();
    for (t, &feature) in nonlinear.iter().enumerate() {
        if t % 2 == 0 {
            terms.push(Term::Sine {
                feature,
                amplitude: SINE_AMPLITUDE,
                frequency: SINE_FREQUENCY,
            });
        } else {
            let sign = if (t / 2) % 2 == 0 { 1.0 } else { -1.0 };
            terms.push(Term::Product { a: nonlinear[t - 1], b: feature, sign });
        }
    }

    let ids = (0..n).map(|i| format!("C{:05}", i + 1)).collect();
    let placeholder = Dataset::from_columns(ids, names, columns, vec![0.0; n])?;
    let mut noise_rng = stream(spec.seed, &[tag::SYNTH, u64::MAX]);
    let response: Vec<f64> = (0..n)
        .map(|i| {
            let signal: f64 = terms.iter().map(|t| t.eval(&placeholder, i)).sum();
            let z: f64 = StandardNormal.sample(&mut noise_rng);
            signal + spec.noise_sd * z
        })
        .collect();
    let dataset = placeholder.with_response(response)?;

    let analytic_variance =
        terms.iter().map(Term::variance).sum::<f64>() + spec.noise_sd * spec.noise_sd;
    Ok(SyntheticData {
        dataset,
        truth: SyntheticTruth {
            spec: spec.clone(),
            relevant,
            terms,
            correlated_copies,
            analytic_variance,
        },
    })
}
