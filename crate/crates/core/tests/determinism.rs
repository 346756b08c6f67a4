//! Seeded results are independent of the worker-thread count.

use rfqsrr::boruta::{boruta_run, BorutaParams};
use rfqsrr::data::generate_synthetic;
use rfqsrr::protocol::{run_protocol, write_records_csv, MethodSpec, Profile, ProtocolConfig};
use rfqsrr::select::{consensus_counts, ConsensusParams};
use rfqsrr::{fit_forest, Dataset, ForestParams, SyntheticSpec};

fn data(seed: u64) -> Dataset {
    let spec = SyntheticSpec {
        n: 60,
        p: 15,
        k_linear: 2,
        k_nonlinear: 2,
        noise_sd: 0.3,
        correlation_rho: 0.0,
        seed,
    };
    generate_synthetic(&spec).unwrap().dataset
}

fn on_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn forest_and_importance() {
    let d = data(1);
    let params = ForestParams::b1k(9).with_trees(60);
    let run = || {
        let forest = fit_forest(&d, &params).unwrap();
        let importance = forest.permutation_importance(&d, 9).unwrap();
        (forest.to_json().unwrap(), importance)
    };
    assert_eq!(on_threads(1, run), on_threads(4, run));
}

#[test]
fn boruta_and_consensus() {
    let d = data(2);
    let boruta = BorutaParams {
        forest: ForestParams::b1k(0).with_trees(30),
        max_iterations: 15,
        ..BorutaParams::default()
    }
    .with_seed(5);
    let consensus = ConsensusParams {
        n_bags: 3,
        boruta,
        seed: 5,
        ..ConsensusParams::default()
    };
    let run = || {
        (
            boruta_run(&d, &boruta).unwrap(),
            consensus_counts(&d, &consensus).unwrap(),
        )
    };
    assert_eq!(on_threads(1, run), on_threads(3, run));
}

#[test]
fn protocol_records() {
    let d = data(3);
    let mut cfg = ProtocolConfig {
        repetitions: 3,
        methods: vec![
            MethodSpec::TopN { keep: 4 },
            MethodSpec::Boruta { profile: Profile::B1k },
            MethodSpec::Consensus { threshold: 0.5 },
        ],
        b1k_trees: 30,
        consensus_bags: 2,
        seed: 3,
        ..ProtocolConfig::default()
    };
    cfg.forest.n_trees = 40;
    cfg.ranking_forest.n_trees = 40;
    cfg.boruta.max_iterations = 15;
    let run = || {
        let mut out = Vec::new();
        write_records_csv(&run_protocol(&d, &cfg).unwrap(), &mut out, false).unwrap();
        out
    };
    let one = on_threads(1, run);
    assert_eq!(one, on_threads(4, run));
    assert_eq!(one.iter().filter(|&&b| b == b'\n').count(), 1 + 3 * 3);
}

#[test]
fn seeds_change_results() {
    let d = data(4);
    let a = fit_forest(&d, &ForestParams::b1k(1).with_trees(10)).unwrap();
    let b = fit_forest(&d, &ForestParams::b1k(2).with_trees(10)).unwrap();
    assert_ne!(a.to_json().unwrap(), b.to_json().unwrap());
    let again = fit_forest(&d, &ForestParams::b1k(1).with_trees(10)).unwrap();
    assert_eq!(a.to_json().unwrap(), again.to_json().unwrap());
}
