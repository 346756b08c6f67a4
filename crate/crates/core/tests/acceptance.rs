//! Acceptance suite. Each test checks one criterion at its stated tolerance
//! and runtime budget and prints a single `[PASS]` or `[FAIL]` line.
//!
//! The lines go straight to stderr and show up without `--nocapture`.

mod common;

use std::collections::BTreeSet;
use std::io::Write;
use std::time::{Duration, Instant};

use rand::Rng;
use rfqsrr::boruta::{boruta_run, BorutaParams};
use rfqsrr::data::{generate_synthetic, BagSample, SyntheticData};
use rfqsrr::protocol::{
    run_protocol, stability_row, stability_table, write_records_csv, MethodSpec, Profile, ProtocolConfig,
    RepetitionRecord,
};
use rfqsrr::rng::derive_seed;
use rfqsrr::select::{consensus_curve, ConsensusParams};
use rfqsrr::{best_split, fit_forest, ForestParams, SyntheticSpec};

fn verdict(name: &str, pass: bool, elapsed: Duration, budget: Option<Duration>, detail: String) {
    let within = budget.is_none_or(|b| elapsed <= b);
    let tag = if pass && within { "PASS" } else { "FAIL" };
    let budget = budget.map_or(String::new(), |b| format!(" (budget {:.0} s)", b.as_secs_f64()));
    // Written to the raw handle so the line survives the harness's output capture.
    let line = format!("[{tag}] {name}: {detail}; {:.1} s{budget}\n", elapsed.as_secs_f64());
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    assert!(pass, "{name}: {detail}");
    assert!(within, "{name}: over the runtime budget");
}

fn synthetic(n: usize, p: usize, k_linear: usize, k_nonlinear: usize, noise_sd: f64, rho: f64, seed: u64) -> SyntheticData {
    let spec = SyntheticSpec {
        n,
        p,
        k_linear,
        k_nonlinear,
        noise_sd,
        correlation_rho: rho,
        seed,
    };
    generate_synthetic(&spec).unwrap()
}

fn mean(v: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn on_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn split_search_matches_exhaustive_oracle() {
    let start = Instant::now();
    let mut mismatches = 0;
    for i in 0..200 {
        let (d, rows, features) = common::random_split_instance(&mut common::rng(1000 + i), 200, 20);
        let fast = best_split(&d, &rows, &features);
        let slow = common::oracle_best_split(&d, &rows, &features);
        if !common::same_split(&fast, &slow, 1e-9) {
            mismatches += 1;
        }
    }
    verdict(
        "split oracle",
        mismatches == 0,
        start.elapsed(),
        Some(Duration::from_secs(30)),
        format!("{mismatches} of 200 instances differ in (feature, threshold) or score > 1e-9"),
    );
}

#[test]
fn oob_fraction_matches_theory() {
    let start = Instant::now();
    let expected = 0.99f64.powi(100);
    let got = mean((0..10_000).map(|b| BagSample::draw(100, derive_seed(7, &[b])).oob_fraction()));
    verdict(
        "OOB fraction",
        (got - expected).abs() <= 0.02,
        start.elapsed(),
        Some(Duration::from_secs(10)),
        format!("mean {got:.4} over 10000 bags vs {expected:.4} (tolerance 0.02)"),
    );
}

#[test]
fn protocol_is_thread_count_independent() {
    let start = Instant::now();
    let d = synthetic(120, 100, 5, 5, 0.5, 0.0, 31).dataset;
    let mut cfg = ProtocolConfig {
        repetitions: 5,
        methods: vec![
            MethodSpec::TopN { keep: 10 },
            MethodSpec::Boruta { profile: Profile::B1k },
            MethodSpec::Consensus { threshold: 0.5 },
        ],
        b1k_trees: 100,
        consensus_bags: 5,
        seed: 31,
        ..ProtocolConfig::default()
    };
    cfg.forest.n_trees = 200;
    cfg.ranking_forest.n_trees = 200;
    let csv = || {
        let mut out = Vec::new();
        write_records_csv(&run_protocol(&d, &cfg).unwrap(), &mut out, false).unwrap();
        out
    };
    let many = std::thread::available_parallelism().map_or(4, |n| n.get()).max(4);
    let single = on_threads(1, csv);
    let multi = on_threads(many, csv);
    verdict(
        "determinism",
        single == multi,
        start.elapsed(),
        Some(Duration::from_secs(300)),
        format!(
            "records CSV at 1 and {many} threads {} ({} bytes)",
            if single == multi { "identical" } else { "differ" },
            single.len()
        ),
    );
}

#[test]
fn importance_finds_single_planted_signal() {
    let start = Instant::now();
    let mut top = 0;
    let mut unused = 0;
    let mut nonzero_unused = 0;
    for run in 0..100u64 {
        let s = synthetic(200, 50, 1, 0, 0.1, 0.0, 500 + run);
        let d = s.dataset.append_columns(vec!["IRR_CONST".into()], vec![vec![1.0; 200]]).unwrap();
        let signal = s.truth.relevant[0].index;
        let forest = fit_forest(&d, &ForestParams::b1k(run).with_trees(500)).unwrap();
        let report = forest.permutation_importance(&d, run).unwrap();
        if report.ranking()[0] == signal {
            top += 1;
        }
        for f in report.features.iter().filter(|f| !f.used_in_forest) {
            unused += 1;
            if f.raw_importance != 0.0 || f.z_score != 0.0 {
                nonzero_unused += 1;
            }
        }
    }
    verdict(
        "importance ground truth",
        top >= 99 && nonzero_unused == 0 && unused >= 100,
        start.elapsed(),
        Some(Duration::from_secs(300)),
        format!("signal ranked first in {top}/100 runs; {nonzero_unused} of {unused} unused features nonzero"),
    );
}

#[test]
fn boruta_recall_and_null_specificity() {
    let start = Instant::now();
    // B1K profile scaled from 1000 to 300 trees.
    let params = |seed| {
        BorutaParams {
            forest: ForestParams::b1k(0).with_trees(300),
            alpha: 0.01,
            ..BorutaParams::default()
        }
        .with_seed(seed)
    };
    let mut recalls = Vec::new();
    let mut null_clean = 0;
    let mut null_confirmed = Vec::new();
    for run in 0..20u64 {
        let s = synthetic(200, 500, 10, 0, 0.5, 0.0, 700 + run);
        let r = boruta_run(&s.dataset, &params(run)).unwrap();
        recalls.push(s.truth.recall(&r.confirmed()));

        let null = synthetic(200, 500, 0, 0, 1.0, 0.0, 900 + run);
        let confirmed = boruta_run(&null.dataset, &params(100 + run)).unwrap().confirmed().len();
        null_clean += usize::from(confirmed == 0);
        null_confirmed.push(confirmed);
    }
    let recall = mean(recalls.iter().copied());
    verdict(
        "Boruta recall/specificity",
        recall >= 0.9 && null_clean >= 19,
        start.elapsed(),
        Some(Duration::from_secs(15 * 60)),
        format!(
            "mean recall {recall:.3} (need 0.9), per run {recalls:?}; null runs with 0 Confirmed {null_clean}/20 \
             (need 19), counts {null_confirmed:?}"
        ),
    );
}

#[test]
fn consensus_and_stability_are_monotone() {
    let start = Instant::now();
    let mut violations = 0;
    for run in 0..20u64 {
        let mut rng = common::rng(run);
        let d = synthetic(40, 8, 2, 0, rng.random_range(0.2..2.0), 0.0, 1100 + run).dataset;
        let params = ConsensusParams {
            n_bags: 4,
            boruta: BorutaParams {
                forest: ForestParams::b1k(0).with_trees(20),
                max_iterations: 20,
                ..BorutaParams::default()
            },
            seed: run,
            ..ConsensusParams::default()
        };
        let thresholds: Vec<f64> = (0..6).map(|_| rng.random_range(0.01..=1.0)).collect();
        let curve = consensus_curve(&d, &params, &thresholds).unwrap();
        let mut sorted = thresholds.clone();
        sorted.sort_by(f64::total_cmp);
        for (a, x) in curve.iter().zip(&sorted) {
            for (b, y) in curve.iter().zip(&sorted) {
                let (sa, sb): (BTreeSet<_>, BTreeSet<_>) = (a.selected.iter().collect(), b.selected.iter().collect());
                if x <= y && !sb.is_subset(&sa) {
                    violations += 1;
                }
            }
        }
    }
    let mut stability_violations = 0;
    for fixture in 0..1000u64 {
        let mut rng = common::rng(5000 + fixture);
        let r = rng.random_range(1..=40);
        let p = rng.random_range(1..=60);
        let sets: Vec<Vec<usize>> = (0..r)
            .map(|_| (0..rng.random_range(0..=p)).map(|_| rng.random_range(0..p)).collect())
            .collect();
        let row = stability_row("fixture", &sets).unwrap();
        let monotone = row.counts.windows(2).all(|w| w[0] <= w[1]);
        if !monotone || row.counts.last().is_some_and(|&c| c > row.at_least_once) {
            stability_violations += 1;
        }
    }
    verdict(
        "consensus monotonicity",
        violations == 0 && stability_violations == 0,
        start.elapsed(),
        Some(Duration::from_secs(60)),
        format!(
            "{violations} nesting violations over 20 curves; {stability_violations} non-monotone stability rows \
             over 1000 fixtures"
        ),
    );
}

fn method_means(records: &[RepetitionRecord], method: &str) -> (f64, f64, usize) {
    let rows: Vec<&RepetitionRecord> = records.iter().filter(|r| r.method == method).collect();
    let ok: Vec<&&RepetitionRecord> = rows.iter().filter(|r| r.test_r2.is_some() && r.baseline_r2.is_some()).collect();
    (
        mean(ok.iter().map(|r| r.test_r2.unwrap())),
        mean(ok.iter().map(|r| r.baseline_r2.unwrap())),
        rows.len() - ok.len(),
    )
}

#[test]
fn forest_beats_linear_baseline_on_nonlinear_data() {
    let start = Instant::now();
    let d = synthetic(250, 1667, 0, 5, 0.5, 0.0, 1300).dataset;
    // B1K scaled from 1000 to 100 trees, consensus from 50 to 3 bags.
    let mut cfg = ProtocolConfig {
        repetitions: 10,
        methods: vec![
            MethodSpec::Boruta { profile: Profile::B1k },
            MethodSpec::Consensus { threshold: 0.2 },
        ],
        b1k_trees: 100,
        consensus_bags: 3,
        seed: 1300,
        ..ProtocolConfig::default()
    };
    cfg.forest.n_trees = 500;
    let records = run_protocol(&d, &cfg).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for method in ["B1K", "C_0.2"] {
        let (forest, ols, failed) = method_means(&records, method);
        pass &= failed == 0 && forest - ols >= 0.10;
        detail.push(format!("{method} forest {forest:.3} vs OLS {ols:.3} (gap {:.3}, {failed} failed)", forest - ols));
    }
    verdict(
        "forest vs linear baseline",
        pass,
        start.elapsed(),
        Some(Duration::from_secs(30 * 60)),
        format!("{} (need gap >= 0.10)", detail.join("; ")),
    );
}

#[test]
fn top_n_selection_is_unstable_on_heterogeneous_data() {
    let start = Instant::now();
    // Ten planted signals of similar strength, each with a correlated decoy.
    let d = synthetic(250, 500, 8, 2, 1.0, 0.7, 1500).dataset;
    // Ranking and model forests scaled from 1000 to 300 trees.
    let mut cfg = ProtocolConfig {
        repetitions: 30,
        methods: vec![MethodSpec::TopN { keep: 10 }, MethodSpec::TopN { keep: 50 }],
        seed: 1500,
        ..ProtocolConfig::default()
    };
    cfg.forest.n_trees = 300;
    cfg.ranking_forest.n_trees = 300;
    let records = run_protocol(&d, &cfg).unwrap();
    let table = stability_table(&records).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for row in &table.rows {
        let ratio = row.counts[0] as f64 / row.at_least_once as f64;
        pass &= ratio < 0.25;
        detail.push(format!("{} all {} / ever {} = {ratio:.3}", row.method, row.counts[0], row.at_least_once));
    }
    verdict(
        "TopN instability",
        pass && table.rows.len() == 2,
        start.elapsed(),
        Some(Duration::from_secs(30 * 60)),
        format!("{} (need < 0.25)", detail.join("; ")),
    );
}

#[test]
fn oob_agrees_with_held_out_r2() {
    let start = Instant::now();
    let d = synthetic(250, 20, 5, 0, 0.3, 0.0, 1700).dataset;
    let mut cfg = ProtocolConfig {
        repetitions: 10,
        methods: vec![MethodSpec::TopN { keep: 20 }],
        seed: 1700,
        ..ProtocolConfig::default()
    };
    cfg.forest.n_trees = 500;
    cfg.ranking_forest.n_trees = 100;
    let records = run_protocol(&d, &cfg).unwrap();
    let gaps: Vec<f64> = records.iter().map(|r| (r.oob_r2.unwrap() - r.test_r2.unwrap()).abs()).collect();
    let gap = mean(gaps.iter().copied());
    let (oob, test) = (
        mean(records.iter().map(|r| r.oob_r2.unwrap())),
        mean(records.iter().map(|r| r.test_r2.unwrap())),
    );
    verdict(
        "OOB vs test",
        gap <= 0.1 && records.len() == 10,
        start.elapsed(),
        None,
        format!("mean |oob - test| {gap:.3} (need <= 0.1); mean OOB {oob:.3}, mean test {test:.3}"),
    );
}
