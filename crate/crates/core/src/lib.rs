//! Random-forest regression for retention modelling from molecular
//! descriptors.
//!
//! The crate provides CART regression trees and bagged forests with
//! out-of-bag evaluation and permutation importance, three feature
//! selection schemes (top-N importance, Boruta all-relevant selection with
//! shadow variables, and consensus over bagged Boruta runs), and a repeated
//! 2:1 split/select/model protocol that reports selection stability and the
//! fraction of variance explained next to a least-squares baseline.
//!
//! Every randomized routine is a pure function of its inputs and a `u64`
//! seed; results do not depend on the rayon thread count.

pub mod boruta;
pub mod cli;
pub mod data;
pub mod error;
pub mod forest;
pub mod metrics;
pub mod protocol;
pub mod rng;
pub mod select;
pub mod tree;

pub use data::{Dataset, SyntheticSpec};
pub use error::{Error, Result};
pub use forest::{fit_forest, Forest, ForestParams, Mtry};
pub use tree::{best_split, fit_tree, RegressionTree, TreeParams};
