//! The repeated split/select/model protocol on a small synthetic table:
//! per-repetition records, the stability table and the R^2 box plot.

use std::error::Error;

use rfqsrr::data::generate_synthetic;
use rfqsrr::protocol::{
    render_svg, run_protocol, stability_table, summarize, MethodSpec, PlotOptions, Profile,
    ProtocolConfig,
};
use rfqsrr::SyntheticSpec;

fn run() -> Result<(), Box<dyn Error>> {
    let spec = SyntheticSpec {
        n: 90,
        p: 20,
        k_linear: 3,
        k_nonlinear: 2,
        noise_sd: 0.4,
        correlation_rho: 0.0,
        seed: 4,
    };
    let d = generate_synthetic(&spec)?.dataset;
    let mut cfg = ProtocolConfig {
        repetitions: 4,
        methods: vec![
            MethodSpec::TopN { keep: 5 },
            MethodSpec::Boruta { profile: Profile::B1k },
            MethodSpec::Consensus { threshold: 0.5 },
        ],
        b1k_trees: 50,
        consensus_bags: 4,
        seed: 4,
        ..ProtocolConfig::default()
    };
    cfg.forest.n_trees = 100;
    cfg.ranking_forest.n_trees = 100;
    cfg.boruta.max_iterations = 30;

    let records = run_protocol(&d, &cfg)?;
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
    println!("{:<6} {:>6} {:>8} {:>8} {:>8}", "method", "size", "oob", "test", "ols");
    for s in summarize(&records) {
        println!(
            "{:<6} {:>6.2} {:>8} {:>8} {:>8}",
            s.method,
            s.mean_n_selected,
            fmt(s.mean_oob_r2),
            fmt(s.mean_test_r2),
            fmt(s.mean_baseline_r2)
        );
    }
    for row in &stability_table(&records)?.rows {
        println!(
            "{:<6} counts {:?} ever {} average size {:.2}",
            row.method, row.counts, row.at_least_once, row.average_size
        );
    }
    let svg = render_svg(&records, &PlotOptions { title: "example".into(), timestamp: None });
    println!("plot: {} bytes of SVG", svg.len());
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
