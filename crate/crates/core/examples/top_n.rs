//! Keeps the N descriptors with the highest importance z-score; one ranking
//! serves every N.

use std::error::Error;

use rfqsrr::data::generate_synthetic;
use rfqsrr::select::rank_features;
use rfqsrr::{ForestParams, SyntheticSpec};

fn run() -> Result<(), Box<dyn Error>> {
    let spec = SyntheticSpec {
        n: 120,
        p: 40,
        k_linear: 4,
        k_nonlinear: 0,
        noise_sd: 0.3,
        correlation_rho: 0.0,
        seed: 3,
    };
    let synth = generate_synthetic(&spec)?;
    let ranking = rank_features(&synth.dataset, &ForestParams::b1k(3).with_trees(200))?;
    for n in [2, 4, 8] {
        let sel = ranking.top(n)?;
        let names: Vec<&str> = sel
            .selected
            .iter()
            .map(|&j| synth.dataset.descriptor_names()[j].as_str())
            .collect();
        println!("{:<5} recall {:.2}  {names:?}", sel.method, synth.truth.recall(&sel.selected));
    }
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
