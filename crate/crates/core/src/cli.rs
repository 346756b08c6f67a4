//! Command-line interface.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O or malformed input, 4 degenerate
//! data, 5 model/dataset mismatch.

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::boruta::{boruta_run, BorutaParams};
use crate::data::{generate_synthetic, load_csv, load_csv_with, write_csv, LoadOptions, SyntheticSpec};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, Forest, ForestParams, Mtry};
use crate::protocol::{
    render_svg, run_protocol_with, stability_table, summarize, write_baseline_csv, write_records_csv,
    write_stability_csv, PlotOptions, Profile, ProtocolConfig, RepetitionRecord,
};
use crate::select::{consensus_counts, top_n, write_selection_csv, ConsensusParams, SelectionOutcome};

#[derive(Debug, Parser)]
#[command(name = "rfqsrr", version, about = "Random-forest retention modelling and feature selection")]
pub struct Cli {
    /// Master seed; overrides the seed in a protocol config when given.
    #[arg(long, global = true, env = "RFQSRR_SEED")]
    pub seed: Option<u64>,

    /// Worker threads (0 = all available cores). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Manifest path; each command has a default next to its outputs.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset and its ground-truth sidecar.
    Generate(GenerateArgs),
    /// Run one feature-selection method on a dataset.
    Select(SelectArgs),
    /// Run the repeated split/select/model protocol.
    Protocol(ProtocolArgs),
    /// Fit a forest and save it as JSON.
    Train(TrainArgs),
    /// Predict a dataset with a saved forest.
    Predict(PredictArgs),
}

#[derive(Debug, clap::Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    #[arg(long, default_value_t = 10)]
    pub k_linear: usize,
    #[arg(long, default_value_t = 5)]
    pub k_nonlinear: usize,
    #[arg(long, default_value_t = 0.5)]
    pub noise_sd: f64,
    /// Correlation of decoy copies with relevant descriptors (0 = none).
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    #[arg(long, default_value = "data.csv")]
    pub out: PathBuf,
    /// Ground-truth JSON; defaults to `<out>.truth.json`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodKind {
    Topn,
    Boruta,
    Consensus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    B1k,
    B10k,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::B1k => Profile::B1k,
            ProfileArg::B10k => Profile::B10k,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub method: MethodKind,
    /// TopN: number of descriptors to keep.
    #[arg(long)]
    pub keep: Option<usize>,
    /// Boruta/consensus forest profile.
    #[arg(long, value_enum, default_value = "b1k")]
    pub profile: ProfileArg,
    /// Consensus: number of bootstrap bags.
    #[arg(long, default_value_t = 50)]
    pub bags: usize,
    /// Consensus: fraction of bags that must confirm a descriptor.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Override the tree count of the profile (or of the TopN ranking forest).
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    /// Keep Tentative descriptors in the Boruta selection.
    #[arg(long)]
    pub include_tentative: bool,
    #[arg(long, default_value = "selection")]
    pub out_dir: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct ProtocolArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// JSON protocol configuration; omitted fields take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "protocol")]
    pub out_dir: PathBuf,
    /// Zero the timing column and leave the timestamp out of the figure.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "model.json")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub trees: usize,
    /// Descriptors tried per split; default p/3.
    #[arg(long)]
    pub mtry: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub min_node_size: usize,
    #[arg(long)]
    pub max_depth: Option<usize>,
}

#[derive(Debug, clap::Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "predictions.csv")]
    pub out: PathBuf,
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter(_) => 2,
        Error::Io { .. } | Error::Parse { .. } | Error::Csv(_) | Error::Json(_) | Error::DuplicateName(_) => 3,
        Error::Degenerate(_) | Error::TooFewRows { .. } => 4,
        Error::FingerprintMismatch { .. } | Error::Shape(_) | Error::MalformedTree(_) => 5,
    }
}

#[derive(Debug, Serialize)]
struct RunManifest {
    tool: &'static str,
    version: &'static str,
    command: String,
    config: Value,
    seed: u64,
    threads: usize,
    started_unix: u64,
    finished_unix: u64,
    outputs: Vec<PathBuf>,
    status: &'static str,
    error: Option<String>,
}

struct Outcome {
    config: Value,
    outputs: Vec<PathBuf>,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Writes `bytes` to a sibling temp file, then renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn write_with(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    write_atomic(path, &buf)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s: OsString = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn main() -> ExitCode {
    run(std::env::args_os())
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(2);
        }
    };
    let manifest_path = cli.manifest.clone().unwrap_or_else(|| default_manifest(&cli.command));
    let started = unix_now();
    let result = pool.install(|| dispatch(&cli));
    let (status, error, outcome) = match result {
        Ok(o) => ("ok", None, o),
        Err(e) => (
            "error",
            Some(e),
            Outcome {
                config: Value::Null,
                outputs: Vec::new(),
            },
        ),
    };
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: command_name(&cli.command).into(),
        config: outcome.config,
        seed: cli.seed.unwrap_or(0),
        threads: pool.current_num_threads(),
        started_unix: started,
        finished_unix: unix_now(),
        outputs: outcome.outputs,
        status,
        error: error.as_ref().map(|e| e.to_string()),
    };
    if let Err(e) = serde_json::to_vec_pretty(&manifest)
        .map_err(Error::from)
        .and_then(|bytes| write_atomic(&manifest_path, &bytes))
    {
        eprintln!("warning: manifest not written: {e}");
    }
    match error {
        None => ExitCode::SUCCESS,
        Some(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Generate(_) => "generate",
        Command::Select(_) => "select",
        Command::Protocol(_) => "protocol",
        Command::Train(_) => "train",
        Command::Predict(_) => "predict",
    }
}

fn default_manifest(c: &Command) -> PathBuf {
    match c {
        Command::Generate(a) => sibling(&a.out, ".manifest.json"),
        Command::Select(a) => a.out_dir.join("manifest.json"),
        Command::Protocol(a) => a.out_dir.join("manifest.json"),
        Command::Train(a) => sibling(&a.out, ".manifest.json"),
        Command::Predict(a) => sibling(&a.out, ".manifest.json"),
    }
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Generate(a) => cmd_generate(a, seed),
        Command::Select(a) => cmd_select(a, seed),
        Command::Protocol(a) => cmd_protocol(a, cli.seed),
        Command::Train(a) => cmd_train(a, seed),
        Command::Predict(a) => cmd_predict(a),
    }
}

fn cmd_generate(a: &GenerateArgs, seed: u64) -> Result<Outcome> {
    let spec = SyntheticSpec {
        n: a.n,
        p: a.p,
        k_linear: a.k_linear,
        k_nonlinear: a.k_nonlinear,
        noise_sd: a.noise_sd,
        correlation_rho: a.rho,
        seed,
    };
    let synth = generate_synthetic(&spec)?;
    let truth_path = a.truth.clone().unwrap_or_else(|| sibling(&a.out, ".truth.json"));
    write_with(&a.out, |w| write_csv(&synth.dataset, w))?;
    write_atomic(&truth_path, &serde_json::to_vec_pretty(&synth.truth)?)?;
    Ok(Outcome {
        config: serde_json::to_value(spec)?,
        outputs: vec![a.out.clone(), truth_path],
    })
}

fn cmd_select(a: &SelectArgs, seed: u64) -> Result<Outcome> {
    let d = load_csv(&a.data)?;
    if d.response_variance() <= 0.0 {
        return Err(Error::Degenerate("response has zero variance".into()));
    }
    let profile = Profile::from(a.profile);
    let boruta_trees = a.trees.unwrap_or(match profile {
        Profile::B1k => 1000,
        Profile::B10k => 10_000,
    });
    let boruta = BorutaParams {
        forest: ForestParams::b1k(0).with_trees(boruta_trees),
        max_iterations: a.max_iterations,
        alpha: a.alpha,
        ..Default::default()
    };
    let selection_path = a.out_dir.join("selection.csv");
    let mut outputs = vec![selection_path.clone()];
    let (outcome, config): (SelectionOutcome, Value) = match a.method {
        MethodKind::Topn => {
            let keep = a.keep.ok_or_else(|| Error::invalid("--method topn needs --keep"))?;
            let params = ForestParams::b1k(seed).with_trees(a.trees.unwrap_or(1000));
            let config = json!({ "method": "topn", "keep": keep, "forest": params });
            (top_n(&d, keep, &params)?, config)
        }
        MethodKind::Boruta => {
            let params = boruta.with_seed(seed);
            let result = boruta_run(&d, &params)?;
            let csv_path = a.out_dir.join("boruta.csv");
            let history_path = a.out_dir.join("boruta_history.json");
            write_with(&csv_path, |w| result.write_csv(w))?;
            write_atomic(&history_path, &serde_json::to_vec(&result.history)?)?;
            outputs.extend([csv_path, history_path]);
            let config = json!({
                "method": "boruta",
                "profile": profile.label(),
                "include_tentative": a.include_tentative,
                "boruta": params,
            });
            (
                SelectionOutcome::from_boruta(profile.label(), &result, a.include_tentative, seed),
                config,
            )
        }
        MethodKind::Consensus => {
            let threshold = a
                .threshold
                .ok_or_else(|| Error::invalid("--method consensus needs --threshold"))?;
            let params = ConsensusParams {
                n_bags: a.bags,
                threshold,
                boruta,
                seed,
            };
            params.validate()?;
            let record = consensus_counts(&d, &params)?;
            let audit_path = a.out_dir.join("consensus.csv");
            write_with(&audit_path, |w| record.write_csv(w))?;
            outputs.push(audit_path);
            let config = json!({ "method": "consensus", "profile": profile.label(), "consensus": params });
            (record.select(threshold)?, config)
        }
    };
    write_with(&selection_path, |w| {
        write_selection_csv(std::slice::from_ref(&outcome), d.descriptor_names(), w)
    })?;
    eprintln!("{}: {} of {} descriptors selected", outcome.method, outcome.len(), d.n_features());
    Ok(Outcome { config, outputs })
}

fn cmd_protocol(a: &ProtocolArgs, seed: Option<u64>) -> Result<Outcome> {
    let mut cfg: ProtocolConfig = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text)?
        }
        None => ProtocolConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let d = load_csv_with(&a.data, LoadOptions::PROTOCOL)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;

    // Completed repetitions are appended here as they finish so that an
    // interrupted run keeps its finished work.
    let partial_path = a.out_dir.join("records.partial.csv");
    let partial = fs::File::create(&partial_path).map_err(|e| Error::io(&partial_path, e))?;
    let partial = Mutex::new(BufWriter::new(partial));
    let done = AtomicUsize::new(0);
    let include_timing = !a.deterministic;
    let records = run_protocol_with(&d, &cfg, |recs: &[RepetitionRecord]| {
        let k = done.fetch_add(1, Ordering::SeqCst) + 1;
        let failed = recs.iter().filter(|r| r.error.is_some()).count();
        eprintln!(
            "repetition {} finished ({k}/{} done, {} methods, {failed} failed)",
            recs.first().map_or(0, |r| r.repetition),
            cfg.repetitions,
            recs.len()
        );
        if let Ok(mut w) = partial.lock() {
            let mut buf = Vec::new();
            if write_records_csv(recs, &mut buf, include_timing).is_ok() {
                // Header only once: skip it after the first repetition.
                let body = if k == 1 {
                    &buf[..]
                } else {
                    let cut = buf.iter().position(|&b| b == b'\n').map_or(buf.len(), |i| i + 1);
                    &buf[cut..]
                };
                let _ = w.write_all(body).and_then(|_| w.flush());
            }
        }
    })?;
    drop(partial);

    let records_path = a.out_dir.join("records.csv");
    let records_json = a.out_dir.join("records.json");
    let baseline_path = a.out_dir.join("baseline.csv");
    let stability_path = a.out_dir.join("stability.csv");
    let summary_path = a.out_dir.join("summary.json");
    let figure_path = a.out_dir.join("r2.svg");
    write_with(&records_path, |w| write_records_csv(&records, w, include_timing))?;
    write_atomic(&records_json, &serde_json::to_vec(&records)?)?;
    write_with(&baseline_path, |w| write_baseline_csv(&records, w))?;
    write_with(&stability_path, |w| write_stability_csv(&stability_table(&records)?, w))?;
    let summary = summarize(&records);
    write_atomic(&summary_path, &serde_json::to_vec_pretty(&summary)?)?;
    let plot = PlotOptions {
        title: format!("R² over {} repetitions (n = {}, p = {})", cfg.repetitions, d.n_rows(), d.n_features()),
        timestamp: (!a.deterministic).then(|| format!("unix time {}", unix_now())),
    };
    write_atomic(&figure_path, render_svg(&records, &plot).as_bytes())?;
    let _ = fs::remove_file(&partial_path);
    for s in &summary {
        eprintln!(
            "{:>8}  size {:>7.2}  test R2 {}  OOB R2 {}  OLS {}",
            s.method,
            s.mean_n_selected,
            fmt_opt(s.mean_test_r2),
            fmt_opt(s.mean_oob_r2),
            fmt_opt(s.mean_baseline_r2)
        );
    }
    Ok(Outcome {
        config: serde_json::to_value(&cfg)?,
        outputs: vec![records_path, records_json, baseline_path, stability_path, summary_path, figure_path],
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "   -  ".into(), |x| format!("{x:6.3}"))
}

fn cmd_train(a: &TrainArgs, seed: u64) -> Result<Outcome> {
    let d = load_csv(&a.data)?;
    let params = ForestParams {
        n_trees: a.trees,
        mtry: a.mtry.map_or(Mtry::Third, Mtry::Count),
        min_node_size: a.min_node_size,
        max_depth: a.max_depth,
        seed,
    };
    let forest = fit_forest(&d, &params)?;
    write_atomic(&a.out, forest.to_json()?.as_bytes())?;
    match forest.oob_r2(&d) {
        Ok(r2) => eprintln!("{} trees, OOB R2 {r2:.4}", params.n_trees),
        Err(e) => eprintln!("{} trees, OOB R2 unavailable: {e}", params.n_trees),
    }
    Ok(Outcome {
        config: serde_json::to_value(params)?,
        outputs: vec![a.out.clone()],
    })
}

fn cmd_predict(a: &PredictArgs) -> Result<Outcome> {
    let text = fs::read_to_string(&a.model).map_err(|e| Error::io(&a.model, e))?;
    let forest = Forest::from_json(&text)?;
    let d = load_csv(&a.data)?;
    let pred = forest.predict_dataset(&d)?;
    write_with(&a.out, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["id", "prediction"])?;
        for (id, p) in d.compound_ids().iter().zip(&pred) {
            w.write_record([id.as_str(), &p.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(&a.out, e))?;
        Ok(())
    })?;
    Ok(Outcome {
        config: json!({ "model": a.model, "data": a.data }),
        outputs: vec![a.out.clone()],
    })
}
