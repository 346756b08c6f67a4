//! Finds the best variance-reduction split of a small table and grows a
//! single regression tree on it.

use std::error::Error;

use rfqsrr::{best_split, fit_tree, Dataset, TreeParams};

fn run() -> Result<(), Box<dyn Error>> {
    // y jumps at x0 = 2.5; x1 is noise.
    let x0 = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 1.5, 3.5];
    let x1 = vec![0.3, -1.2, 0.8, 0.1, -0.4, 1.9, 0.0, -0.7];
    let y: Vec<f64> = x0.iter().map(|&v| if v < 2.5 { 1.0 } else { 4.0 }).collect();
    let ids = (1..=8).map(|i| format!("c{i}")).collect();
    let d = Dataset::from_columns(ids, vec!["x0".into(), "x1".into()], vec![x0, x1], y)?;

    let rows: Vec<usize> = (0..d.n_rows()).collect();
    let split = best_split(&d, &rows, &[0, 1]).ok_or("no split")?;
    println!(
        "best split: {} <= {} (sum of squares reduced by {:.3})",
        d.descriptor_names()[split.feature],
        split.threshold,
        split.score
    );

    let params = TreeParams {
        mtry: 2,
        min_node_size: 2,
        max_depth: None,
        seed: 1,
    };
    let tree = fit_tree(&d, &rows, &params)?;
    println!("tree: {} leaves, depth {}", tree.n_leaves(), tree.depth());
    for (x, expect) in [([2.0, 0.0], 1.0), ([5.0, 0.0], 4.0)] {
        let got = tree.predict(&x)?;
        println!("predict({x:?}) = {got}");
        assert_eq!(got, expect);
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
