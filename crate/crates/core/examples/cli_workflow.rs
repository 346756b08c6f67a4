//! Drives the command-line interface in-process: generate a table, train a
//! forest, predict, and read the run manifest.

use std::error::Error;
use std::process::ExitCode;

use rfqsrr::cli;

fn run() -> Result<(), Box<dyn Error>> {
    let dir = tempfile::tempdir()?;
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let (data, model, preds) = (path("data.csv"), path("model.json"), path("predictions.csv"));

    let steps: [Vec<&str>; 3] = [
        vec!["generate", "--n", "60", "--p", "12", "--k-linear", "2", "--k-nonlinear", "1", "--out", &data],
        vec!["train", "--data", &data, "--trees", "50", "--out", &model],
        vec!["predict", "--model", &model, "--data", &data, "--out", &preds],
    ];
    for step in &steps {
        let args = ["rfqsrr", "--seed", "17"].iter().chain(step);
        if cli::run(args) != ExitCode::SUCCESS {
            return Err(format!("{} failed", step[0]).into());
        }
        println!("{} ok", step[0]);
    }
    let lines = std::fs::read_to_string(&preds)?.lines().count();
    println!("{} predictions written", lines - 1);
    let manifest = std::fs::read_to_string(format!("{model}.manifest.json"))?;
    println!("train manifest: {manifest}");
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
