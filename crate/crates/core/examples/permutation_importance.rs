//! Ranks descriptors by permutation importance z-score.

use std::error::Error;

use rfqsrr::data::generate_synthetic;
use rfqsrr::{fit_forest, ForestParams, SyntheticSpec};

fn run() -> Result<(), Box<dyn Error>> {
    let spec = SyntheticSpec {
        n: 120,
        p: 30,
        k_linear: 2,
        k_nonlinear: 1,
        noise_sd: 0.2,
        correlation_rho: 0.0,
        seed: 5,
    };
    let d = generate_synthetic(&spec)?.dataset;
    let forest = fit_forest(&d, &ForestParams::b1k(9).with_trees(200))?;
    let report = forest.permutation_importance(&d, 9)?;

    println!("{:<14} {:>10} {:>8}", "feature", "raw", "z");
    for &j in report.ranking().iter().take(6) {
        let f = &report.features[j];
        println!("{:<14} {:>10.4} {:>8.2}", f.name, f.raw_importance, f.z_score);
    }
    let unused = report.features.iter().filter(|f| !f.used_in_forest).count();
    println!("{unused} descriptors never used by any tree (importance 0)");
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
