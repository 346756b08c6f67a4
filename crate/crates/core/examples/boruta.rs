//! All-relevant selection with Boruta: every descriptor is tested against
//! shuffled shadow copies until it is confirmed or rejected.

use std::error::Error;

use rfqsrr::boruta::{boruta_run, BorutaParams};
use rfqsrr::data::generate_synthetic;
use rfqsrr::{ForestParams, SyntheticSpec};

fn run() -> Result<(), Box<dyn Error>> {
    let spec = SyntheticSpec {
        n: 150,
        p: 25,
        k_linear: 3,
        k_nonlinear: 0,
        noise_sd: 0.3,
        correlation_rho: 0.0,
        seed: 21,
    };
    let synth = generate_synthetic(&spec)?;
    let params = BorutaParams {
        forest: ForestParams::b1k(0).with_trees(100),
        max_iterations: 40,
        ..BorutaParams::default()
    }
    .with_seed(21);
    let result = boruta_run(&synth.dataset, &params)?;

    for f in result.features.iter().filter(|f| f.name.starts_with("REL_")) {
        println!(
            "{:<12} {:<9} hits {}/{} decided at {:?}",
            f.name,
            f.status.as_str(),
            f.hits,
            f.trials,
            f.decision_iteration
        );
    }
    let confirmed = result.confirmed();
    println!(
        "{} iterations, {} confirmed, recall {:.2}",
        result.history.len(),
        confirmed.len(),
        synth.truth.recall(&confirmed)
    );
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
