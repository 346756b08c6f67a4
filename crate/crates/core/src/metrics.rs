//! Fraction of variance explained and friends.

use crate::error::{Error, Result};

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Variance with denominator `n`.
pub fn population_variance(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

pub fn mse(y: &[f64], pred: &[f64]) -> f64 {
    y.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// `1 - MSE / Var(y)` over the given rows. Negative values are returned as is.
pub fn r_squared(y: &[f64], pred: &[f64]) -> Result<f64> {
    if y.len() != pred.len() {
        return Err(Error::Shape(format!("{} targets, {} predictions", y.len(), pred.len())));
    }
    if y.len() < 2 {
        return Err(Error::Degenerate(format!("R^2 needs at least 2 rows, got {}", y.len())));
    }
    let var = population_variance(y);
    if var <= 0.0 {
        return Err(Error::Degenerate("response has zero variance".into()));
    }
    Ok(1.0 - mse(y, pred) / var)
}
