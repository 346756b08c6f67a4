//! Consensus selection: Boruta on bootstrap bags, a descriptor is kept when
//! it is confirmed in at least a fraction x of the bags.

use std::error::Error;

use rfqsrr::boruta::BorutaParams;
use rfqsrr::data::generate_synthetic;
use rfqsrr::select::{consensus_counts, ConsensusParams};
use rfqsrr::{ForestParams, SyntheticSpec};

fn run() -> Result<(), Box<dyn Error>> {
    let spec = SyntheticSpec {
        n: 90,
        p: 15,
        k_linear: 3,
        k_nonlinear: 0,
        noise_sd: 0.5,
        correlation_rho: 0.0,
        seed: 8,
    };
    let d = generate_synthetic(&spec)?.dataset;
    let params = ConsensusParams {
        n_bags: 8,
        boruta: BorutaParams {
            forest: ForestParams::b1k(0).with_trees(50),
            max_iterations: 30,
            ..BorutaParams::default()
        },
        seed: 8,
        ..ConsensusParams::default()
    };
    let record = consensus_counts(&d, &params)?;
    for (name, count) in record.names.iter().zip(&record.counts).filter(|(_, &c)| c > 0) {
        println!("{name:<12} confirmed in {count}/{} bags", record.n_bags);
    }
    let mut previous = usize::MAX;
    for x in [0.1, 0.5, 1.0] {
        let sel = record.select(x)?;
        println!("{:<6} {} descriptors", sel.method, sel.len());
        assert!(sel.len() <= previous);
        previous = sel.len();
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
