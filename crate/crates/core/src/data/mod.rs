//! Descriptor datasets: validation, CSV I/O, 2:1 splitting, bootstrap bags,
//! and a synthetic QSRR-like generator with planted relevant features.

mod io;
mod sampling;
pub mod synthetic;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use io::{load_csv, load_csv_with, read_csv, write_csv, LoadOptions};
pub use sampling::{bootstrap, split_2to1, train_size, BagSample, SplitPair};
pub use synthetic::{generate_synthetic, SyntheticData, SyntheticSpec, SyntheticTruth};

/// A numeric descriptor matrix with a retention-constant response.
///
/// Values are stored column-major so that split search over one descriptor
/// touches contiguous memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    compound_ids: Vec<String>,
    descriptor_names: Vec<String>,
    values: Vec<f64>,
    response: Vec<f64>,
}

/// Identity of the data a model was trained on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub n_rows: usize,
    pub n_features: usize,
    /// Hex SHA-256 prefix over the descriptor names, in order.
    pub names_hash: String,
}

impl std::fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "n={} p={} names={}", self.n_rows, self.n_features, self.names_hash)
    }
}

impl Fingerprint {
    /// Same descriptor layout, ignoring the row count.
    pub fn same_features(&self, other: &Fingerprint) -> bool {
        self.n_features == other.n_features && self.names_hash == other.names_hash
    }
}

impl Dataset {
    /// Builds a dataset from descriptor columns. Each inner vector is one
    /// descriptor over all compounds.
    pub fn from_columns(
        compound_ids: Vec<String>,
        descriptor_names: Vec<String>,
        columns: Vec<Vec<f64>>,
        response: Vec<f64>,
    ) -> Result<Self> {
        let n = response.len();
        if columns.len() != descriptor_names.len() {
            return Err(Error::Shape(format!(
                "{} columns but {} descriptor names",
                columns.len(),
                descriptor_names.len()
            )));
        }
        let mut values = Vec::with_capacity(n * columns.len());
        for (j, col) in columns.into_iter().enumerate() {
            if col.len() != n {
                return Err(Error::Shape(format!(
                    "column `{}` has {} values, response has {n}",
                    descriptor_names[j],
                    col.len()
                )));
            }
            values.extend(col);
        }
        Self::from_column_major(compound_ids, descriptor_names, values, response)
    }

    /// Builds a dataset from row vectors.
    pub fn from_rows(
        compound_ids: Vec<String>,
        descriptor_names: Vec<String>,
        rows: &[Vec<f64>],
        response: Vec<f64>,
    ) -> Result<Self> {
        let p = descriptor_names.len();
        let n = rows.len();
        let mut values = vec![0.0; n * p];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::Shape(format!(
                    "row {i} has {} values, expected {p}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                values[j * n + i] = v;
            }
        }
        Self::from_column_major(compound_ids, descriptor_names, values, response)
    }

    pub(crate) fn from_column_major(
        compound_ids: Vec<String>,
        descriptor_names: Vec<String>,
        values: Vec<f64>,
        response: Vec<f64>,
    ) -> Result<Self> {
        let n = response.len();
        let p = descriptor_names.len();
        if compound_ids.len() != n {
            return Err(Error::Shape(format!(
                "{} compound ids but {n} responses",
                compound_ids.len()
            )));
        }
        if values.len() != n * p {
            return Err(Error::Shape(format!(
                "{} values for a {n}x{p} matrix",
                values.len()
            )));
        }
        let mut seen = HashSet::with_capacity(p);
        for name in &descriptor_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateName(name.clone()));
            }
        }
        if let Some(i) = response.iter().position(|v| !v.is_finite()) {
            return Err(Error::Shape(format!("response of row {i} is not finite")));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Shape(format!(
                "descriptor `{}` of row {} is not finite",
                descriptor_names[k / n.max(1)],
                k % n.max(1)
            )));
        }
        Ok(Dataset {
            compound_ids,
            descriptor_names,
            values,
            response,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.response.len()
    }

    pub fn n_features(&self) -> usize {
        self.descriptor_names.len()
    }

    pub fn compound_ids(&self) -> &[String] {
        &self.compound_ids
    }

    pub fn descriptor_names(&self) -> &[String] {
        &self.descriptor_names
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    /// All values of descriptor `j`, one per row.
    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.n_rows();
        &self.values[j * n..(j + 1) * n]
    }

    #[inline]
    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.values[feature * self.n_rows() + row]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.n_features()).map(|j| self.value(i, j)).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.descriptor_names.iter().position(|n| n == name)
    }

    /// Rows `rows` in the given order; repeated indices produce repeated rows.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let n = self.n_rows();
        let mut values = Vec::with_capacity(rows.len() * self.n_features());
        for j in 0..self.n_features() {
            let col = &self.values[j * n..(j + 1) * n];
            values.extend(rows.iter().map(|&i| col[i]));
        }
        Dataset {
            compound_ids: rows.iter().map(|&i| self.compound_ids[i].clone()).collect(),
            descriptor_names: self.descriptor_names.clone(),
            values,
            response: rows.iter().map(|&i| self.response[i]).collect(),
        }
    }

    /// Descriptors `features` in the given order. Indices must be distinct.
    pub fn select_features(&self, features: &[usize]) -> Dataset {
        let mut values = Vec::with_capacity(features.len() * self.n_rows());
        for &j in features {
            values.extend_from_slice(self.column(j));
        }
        Dataset {
            compound_ids: self.compound_ids.clone(),
            descriptor_names: features.iter().map(|&j| self.descriptor_names[j].clone()).collect(),
            values,
            response: self.response.clone(),
        }
    }

    /// Same descriptors with a replacement response vector.
    pub fn with_response(&self, response: Vec<f64>) -> Result<Dataset> {
        if response.len() != self.n_rows() {
            return Err(Error::Shape(format!(
                "{} responses for {} rows",
                response.len(),
                self.n_rows()
            )));
        }
        if response.iter().any(|v| !v.is_finite()) {
            return Err(Error::Shape("non-finite response".into()));
        }
        Ok(Dataset {
            response,
            ..self.clone()
        })
    }

    /// Appends descriptor columns. Names must not collide with existing ones.
    pub fn append_columns(&self, names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Dataset> {
        let mut all_names = self.descriptor_names.clone();
        all_names.extend(names);
        let mut values = self.values.clone();
        for col in columns {
            if col.len() != self.n_rows() {
                return Err(Error::Shape("appended column length differs from row count".into()));
            }
            values.extend(col);
        }
        Dataset::from_column_major(self.compound_ids.clone(), all_names, values, self.response.clone())
    }

    /// Population variance of the response.
    pub fn response_variance(&self) -> f64 {
        crate::metrics::population_variance(&self.response)
    }

    pub fn fingerprint(&self) -> Fingerprint {
        let mut hasher = Sha256::new();
        for name in &self.descriptor_names {
            hasher.update(name.as_bytes());
            hasher.update([0u8]);
        }
        let digest = hasher.finalize();
        let names_hash = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
        Fingerprint {
            n_rows: self.n_rows(),
            n_features: self.n_features(),
            names_hash,
        }
    }
}
