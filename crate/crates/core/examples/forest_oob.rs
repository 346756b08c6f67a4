//! Fits a random forest on a 2:1 split and compares its out-of-bag R^2 with
//! the held-out R^2, then saves and reloads the model.

use std::error::Error;

use rfqsrr::data::{generate_synthetic, split_2to1};
use rfqsrr::{fit_forest, Forest, ForestParams, SyntheticSpec};

fn run() -> Result<(), Box<dyn Error>> {
    let spec = SyntheticSpec {
        n: 150,
        p: 20,
        k_linear: 4,
        k_nonlinear: 2,
        noise_sd: 0.3,
        correlation_rho: 0.0,
        seed: 11,
    };
    let d = generate_synthetic(&spec)?.dataset;
    let split = split_2to1(&d, 11)?;

    let forest = fit_forest(&split.train, &ForestParams::b1k(3).with_trees(200))?;
    let oob = forest.oob_r2(&split.train)?;
    let test = forest.test_r2(&split.test)?;
    println!("{} trees: OOB R^2 {oob:.3}, test R^2 {test:.3}", forest.trees().len());

    let reloaded = Forest::from_json(&forest.to_json()?)?;
    assert_eq!(reloaded.predict_dataset(&split.test)?, forest.predict_dataset(&split.test)?);
    println!("model JSON round trip reproduces predictions");
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

#[cfg(test)]
mod tests {
    #[test]
    fn example_runs() {
        super::run().unwrap();
    }
}
