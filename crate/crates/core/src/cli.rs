//! Command-line wiring of all pipeline stages.
//!
//! Subcommands: `synth`, `extract`, `train-arrest`, `train-classifier`,
//! `score`, `evaluate`, `sigtest`. Global flags: `--config` (JSON
//! settings tree), `--seed` (master seed overriding every stage seed),
//! `--json` (machine-readable errors), `--debug` (per-recording signal
//! dumps), `--threads` (batch parallelism; outputs are independent of
//! the worker count), `--dump-config`.
//!
//! Exit codes: 0 success, 1 partial failure (a batch where every input
//! failed), 2 usage/config/contract errors, 3 internal invariant
//! violations.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::arrest::{self, InputMode, SeriesSample};
use crate::boost;
use crate::config::{reseed, PipelineConfig};
use crate::features::{read_feature_csv, write_feature_csv, FeatureRow, FeatureVector};
use crate::landmark::{self, InputFormat, MovementKind, Recording, Side};
use crate::pipeline;
use crate::rng::derive_seed;
use crate::stats;
use crate::synth;

#[derive(Parser)]
#[command(
    name = "bradyscore",
    version,
    about = "Bradykinesia severity scoring from hand-landmark time series"
)]
struct Cli {
    /// JSON config file; defaults apply to anything omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides every stage seed deterministically.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Emit machine-readable JSON errors on stderr.
    #[arg(long, global = true)]
    json: bool,
    /// Write per-recording signal dumps where applicable.
    #[arg(long, global = true)]
    debug: bool,
    /// Worker threads for batch stages (never changes outputs).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Print the effective config as JSON and exit.
    #[arg(long, global = true)]
    dump_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic landmark dataset (JSONL files).
    Synth {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Per-score counts, e.g. "0=10,1=20,2=20,3=10".
        #[arg(long, default_value = "0=10,1=10,2=10,3=10")]
        counts: String,
        #[arg(long, default_value_t = 30.0)]
        fps: f64,
        /// Movement cycles rendered per recording.
        #[arg(long, default_value_t = 12)]
        cycles: usize,
    },
    /// Extract feature rows from landmark recordings into a CSV.
    Extract {
        /// Output feature CSV.
        #[arg(long)]
        out: PathBuf,
        /// Arrest-network model; when given, the arrest column comes from
        /// its predictions instead of input labels.
        #[arg(long)]
        arrest_model: Option<PathBuf>,
        /// Directory for --debug signal dumps (default: <out>_debug/).
        #[arg(long)]
        debug_dir: Option<PathBuf>,
        /// Input files (.jsonl, or .csv with a .meta.json sidecar) or
        /// directories of them.
        inputs: Vec<PathBuf>,
    },
    /// Train the arrest network on labeled recordings.
    TrainArrest {
        /// Input files or directories (JSONL with arrest labels).
        #[arg(long, required = true)]
        data: Vec<PathBuf>,
        /// Output model file.
        #[arg(long)]
        out: PathBuf,
        /// Loss-history JSON.
        #[arg(long)]
        loss_out: Option<PathBuf>,
    },
    /// Train the boosted score classifier with cross-validated reports.
    TrainClassifier {
        #[arg(long)]
        features: PathBuf,
        /// Output model JSON.
        #[arg(long)]
        out: PathBuf,
        /// Cross-validation report JSON.
        #[arg(long)]
        report_out: Option<PathBuf>,
        /// Human-readable tree dump.
        #[arg(long)]
        trees_out: Option<PathBuf>,
        /// Drop the fatigue and arrest features (ablation study).
        #[arg(long)]
        ablate: bool,
        #[arg(long, default_value_t = 5)]
        folds: usize,
    },
    /// Score feature rows with a trained classifier.
    Score {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Output score-sheet JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a score sheet against expert labels.
    Evaluate {
        /// Feature CSV carrying the expert `score` column.
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        scoresheet: PathBuf,
        /// Output evaluation JSON (per movement plus overall).
        #[arg(long)]
        out: PathBuf,
    },
    /// Feature-significance report (additive ordinal model + bootstrap).
    Sigtest {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Bootstrap replicates (default from config).
        #[arg(long)]
        bootstrap: Option<usize>,
    },
}

/// Error carrying its exit code.
#[derive(Debug)]
struct CliError {
    kind: &'static str,
    message: String,
    code: i32,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            kind: "usage",
            message: message.into(),
            code: 2,
        }
    }

    fn config(message: impl Into<String>) -> Self {
        CliError {
            kind: "config",
            message: message.into(),
            code: 2,
        }
    }

    fn contract(kind: &'static str, message: impl Into<String>) -> Self {
        CliError {
            kind,
            message: message.into(),
            code: 2,
        }
    }

    fn batch_failed(message: impl Into<String>) -> Self {
        CliError {
            kind: "batch_failed",
            message: message.into(),
            code: 1,
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        CliError {
            kind: "internal",
            message: message.into(),
            code: 3,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::usage(format!("{}: {e}", path.display()))
}

/// Entry point used by the binary. Returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let json_errors = cli.json;
    match run_cli(cli) {
        Ok(()) => 0,
        Err(e) => {
            if json_errors {
                let obj = serde_json::json!({
                    "error": { "kind": e.kind, "message": e.message }
                });
                eprintln!("{obj}");
            } else {
                eprintln!("error ({}): {}", e.kind, e.message);
            }
            e.code
        }
    }
}

fn load_config(cli: &Cli) -> CliResult<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(master) = cli.seed {
        reseed(&mut cfg, master);
    }
    cfg.validate().map_err(CliError::config)?;
    Ok(cfg)
}

fn run_cli(cli: Cli) -> CliResult<()> {
    let cfg = load_config(&cli)?;
    let master_seed = cli.seed.unwrap_or(42);
    if cli.dump_config {
        let text = serde_json::to_string_pretty(&cfg)
            .map_err(|e| CliError::internal(e.to_string()))?;
        println!("{text}");
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(CliError::usage(
            "a subcommand is required (try --help or --dump-config)",
        ));
    };
    let threads = cli.threads.max(1);
    match command {
        Command::Synth {
            out,
            counts,
            fps,
            cycles,
        } => cmd_synth(&cfg, master_seed, &out, &counts, fps, cycles),
        Command::Extract {
            out,
            arrest_model,
            debug_dir,
            inputs,
        } => cmd_extract(
            &cfg,
            &out,
            arrest_model.as_deref(),
            cli.debug,
            debug_dir.as_deref(),
            &inputs,
            threads,
        ),
        Command::TrainArrest {
            data,
            out,
            loss_out,
        } => cmd_train_arrest(&cfg, &data, &out, loss_out.as_deref()),
        Command::TrainClassifier {
            features,
            out,
            report_out,
            trees_out,
            ablate,
            folds,
        } => cmd_train_classifier(
            &cfg,
            master_seed,
            &features,
            &out,
            report_out.as_deref(),
            trees_out.as_deref(),
            ablate,
            folds,
        ),
        Command::Score {
            features,
            model,
            out,
        } => cmd_score(&features, &model, &out),
        Command::Evaluate {
            features,
            scoresheet,
            out,
        } => cmd_evaluate(&features, &scoresheet, &out),
        Command::Sigtest {
            features,
            out,
            bootstrap,
        } => cmd_sigtest(&cfg, master_seed, &features, &out, bootstrap),
    }
}

/// Deterministic ordered parallel map: results land by index, so worker
/// count never changes the output.
fn parallel_map_ordered<T, U, F>(items: Vec<T>, threads: usize, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync,
{
    if threads <= 1 || items.len() <= 1 {
        return items.into_iter().map(f).collect();
    }
    let n = items.len();
    let mut slots: Vec<Option<U>> = (0..n).map(|_| None).collect();
    let indexed: Vec<(usize, T)> = items.into_iter().enumerate().collect();
    let chunk = n.div_ceil(threads);
    let mut chunks: Vec<Vec<(usize, T)>> = Vec::new();
    let mut it = indexed.into_iter().peekable();
    while it.peek().is_some() {
        chunks.push(it.by_ref().take(chunk).collect());
    }
    let results: std::sync::Mutex<&mut Vec<Option<U>>> = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for batch in chunks {
            scope.spawn(|| {
                let batch = batch;
                for (i, item) in batch {
                    let out = f(item);
                    results.lock().unwrap()[i] = Some(out);
                }
            });
        }
    });
    slots.into_iter().map(|s| s.unwrap()).collect()
}

fn cmd_synth(
    cfg: &PipelineConfig,
    master_seed: u64,
    out: &Path,
    counts_text: &str,
    fps: f64,
    cycles: usize,
) -> CliResult<()> {
    let counts = parse_counts(counts_text)?;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let seed = derive_seed(master_seed, 4);
    let records = synth::generate_dataset(&counts, fps, cycles, seed)
        .map_err(|e| CliError::config(e.to_string()))?;
    let _ = cfg;
    #[derive(Serialize)]
    struct ManifestRow {
        file: String,
        subject_id: String,
        movement: MovementKind,
        side: Side,
        score: u8,
        arrest: u8,
    }
    let mut manifest = Vec::with_capacity(records.len());
    for r in &records {
        let file = format!(
            "{}_{}_{}.jsonl",
            r.recording.subject_id, r.recording.movement, r.recording.side
        );
        let path = out.join(&file);
        let mut buf = Vec::new();
        landmark::write_jsonl(&r.recording, &mut buf).map_err(|e| io_err(&path, e))?;
        fs::write(&path, buf).map_err(|e| io_err(&path, e))?;
        manifest.push(ManifestRow {
            file,
            subject_id: r.recording.subject_id.clone(),
            movement: r.recording.movement,
            side: r.recording.side,
            score: r.score,
            arrest: r.arrest_category,
        });
    }
    write_json(&out.join("manifest.json"), &manifest)?;
    println!("wrote {} recordings to {}", records.len(), out.display());
    Ok(())
}

fn parse_counts(text: &str) -> CliResult<[usize; 4]> {
    let mut counts = [0usize; 4];
    for part in text.split(',').filter(|p| !p.trim().is_empty()) {
        let (score, count) = part
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("bad counts entry: {part}")))?;
        let score: usize = score
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("bad score in counts: {part}")))?;
        if score > 3 {
            return Err(CliError::usage(format!("score must be 0-3: {part}")));
        }
        counts[score] = count
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("bad count in counts: {part}")))?;
    }
    if counts.iter().sum::<usize>() == 0 {
        return Err(CliError::usage("counts add up to zero"));
    }
    Ok(counts)
}

/// Expand file/directory arguments into a sorted list of input files.
fn collect_inputs(inputs: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut dir_files: Vec<PathBuf> = fs::read_dir(input)
                .map_err(|e| io_err(input, e))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| {
                    p.extension()
                        .and_then(|e| e.to_str())
                        .is_some_and(|e| e == "jsonl" || e == "csv")
                })
                .collect();
            dir_files.sort();
            files.extend(dir_files);
        } else {
            files.push(input.clone());
        }
    }
    if files.is_empty() {
        return Err(CliError::usage("no input files"));
    }
    Ok(files)
}

fn load_recording(path: &Path) -> Result<Recording, String> {
    let file = fs::File::open(path).map_err(|e| e.to_string())?;
    let reader = BufReader::new(file);
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let format = if ext == "csv" {
        let sidecar = path.with_extension("meta.json");
        let text = fs::read_to_string(&sidecar)
            .map_err(|e| format!("sidecar {}: {e}", sidecar.display()))?;
        let meta = serde_json::from_str::<serde_json::Value>(&text)
            .map_err(|e| format!("sidecar: {e}"))
            .and_then(|v| {
                serde_json::from_value(v.get("meta").cloned().unwrap_or(v))
                    .map_err(|e| format!("sidecar meta: {e}"))
            })?;
        InputFormat::Csv(meta)
    } else {
        InputFormat::Jsonl
    };
    landmark::parse_recording(reader, format).map_err(|e| e.to_string())
}

/// Cycle sample in the representation the configured network expects.
fn sample_for_net(
    extraction: &pipeline::CycleExtraction,
    mode: InputMode,
    label: Option<u8>,
) -> Result<SeriesSample, String> {
    match mode {
        InputMode::CycleFeatures => {
            SeriesSample::from_cycles(&extraction.cycles, label).map_err(|e| e.to_string())
        }
        InputMode::ResampledSignal => {
            SeriesSample::from_signal(&extraction.smoothed.values, label).map_err(|e| e.to_string())
        }
    }
}

fn cmd_extract(
    cfg: &PipelineConfig,
    out: &Path,
    arrest_model: Option<&Path>,
    debug: bool,
    debug_dir: Option<&Path>,
    inputs: &[PathBuf],
    threads: usize,
) -> CliResult<()> {
    let files = collect_inputs(inputs)?;
    let net = match arrest_model {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
            Some(arrest::load_model(BufReader::new(file)).map_err(|e| {
                CliError::contract("missing_artifact", format!("{}: {e}", path.display()))
            })?)
        }
        None => None,
    };
    let debug_dir = if debug {
        let dir = debug_dir
            .map(Path::to_path_buf)
            .unwrap_or_else(|| out.with_extension("").with_file_name(fmt_debug_dir(out)));
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        Some(dir)
    } else {
        None
    };

    let net_ref = &net;
    let cfg_ref = cfg;
    let results = parallel_map_ordered(files.clone(), threads, move |path| {
        let work = |path: &Path| -> Result<(FeatureRow, pipeline::CycleExtraction), String> {
            let rec = load_recording(path)?;
            let extraction = pipeline::extract_cycles(&rec, cfg_ref).map_err(|e| e.to_string())?;
            let arrest_pred = match net_ref {
                Some(params) => {
                    let sample = sample_for_net(&extraction, params.config.input_mode, None)?;
                    Some(arrest::predict_arrest(params, &sample).map_err(|e| e.to_string())?)
                }
                None => None,
            };
            let (row, extraction, _flag) =
                pipeline::feature_row(&rec, cfg_ref, arrest_pred).map_err(|e| e.to_string())?;
            Ok((row, extraction))
        };
        let result = work(&path);
        (path, result)
    });

    let mut rows = Vec::new();
    let mut failures = 0usize;
    for (path, result) in results {
        match result {
            Ok((row, extraction)) => {
                if let Some(dir) = &debug_dir {
                    let name = format!(
                        "{}_{}_{}.csv",
                        row.subject_id, row.movement, row.side
                    );
                    let path = dir.join(sanitize(&name));
                    fs::write(&path, pipeline::debug_csv(&extraction))
                        .map_err(|e| io_err(&path, e))?;
                }
                rows.push(row);
            }
            Err(e) => {
                failures += 1;
                eprintln!("skipping {}: {e}", path.display());
            }
        }
    }
    if rows.is_empty() {
        return Err(CliError::batch_failed(format!(
            "all {failures} inputs failed"
        )));
    }
    let mut buf = Vec::new();
    write_feature_csv(&rows, &mut buf).map_err(|e| CliError::internal(e.to_string()))?;
    fs::write(out, buf).map_err(|e| io_err(out, e))?;
    println!(
        "wrote {} feature rows to {} ({failures} inputs skipped)",
        rows.len(),
        out.display()
    );
    Ok(())
}

fn fmt_debug_dir(out: &Path) -> String {
    let stem = out
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("features");
    format!("{stem}_debug")
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_alphanumeric() || c == '.' || c == '_' || c == '-' { c } else { '_' })
        .collect()
}

fn cmd_train_arrest(
    cfg: &PipelineConfig,
    data: &[PathBuf],
    out: &Path,
    loss_out: Option<&Path>,
) -> CliResult<()> {
    let files = collect_inputs(data)?;
    let mut samples = Vec::new();
    let mut failures = 0usize;
    for path in &files {
        let work = || -> Result<SeriesSample, String> {
            let rec = load_recording(path)?;
            let label = rec
                .arrest
                .ok_or_else(|| "no arrest label in metadata".to_string())?;
            let extraction = pipeline::extract_cycles(&rec, cfg).map_err(|e| e.to_string())?;
            sample_for_net(&extraction, cfg.net.input_mode, Some(label))
        };
        match work() {
            Ok(s) => samples.push(s),
            Err(e) => {
                failures += 1;
                eprintln!("skipping {}: {e}", path.display());
            }
        }
    }
    if samples.is_empty() {
        return Err(CliError::batch_failed(format!(
            "all {failures} inputs failed"
        )));
    }
    let (params, report) = arrest::train(&samples, &cfg.net, &cfg.train)
        .map_err(|e| CliError::config(e.to_string()))?;
    let mut buf = Vec::new();
    arrest::save_model(&params, &mut buf).map_err(|e| CliError::internal(e.to_string()))?;
    fs::write(out, buf).map_err(|e| io_err(out, e))?;
    if let Some(path) = loss_out {
        write_json(path, &report)?;
    }
    println!(
        "trained arrest network on {} samples (train accuracy {:.3}); model at {}",
        samples.len(),
        report.train_accuracy,
        out.display()
    );
    Ok(())
}

fn rows_with_labels(rows: &[FeatureRow]) -> CliResult<Vec<(FeatureVector, u8)>> {
    rows.iter()
        .map(|r| {
            let fv = r.feature_vector().ok_or_else(|| {
                CliError::contract(
                    "missing_artifact",
                    format!("row {} has no arrest category", r.subject_id),
                )
            })?;
            let score = r.score.ok_or_else(|| {
                CliError::contract(
                    "missing_artifact",
                    format!("row {} has no expert score", r.subject_id),
                )
            })?;
            Ok((fv, score))
        })
        .collect()
}

fn read_rows(path: &Path) -> CliResult<Vec<FeatureRow>> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    read_feature_csv(BufReader::new(file))
        .map_err(|e| CliError::contract("malformed_input", format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct CvReport {
    folds: usize,
    overall: stats::EvalReport,
    per_movement: BTreeMap<String, stats::EvalReport>,
}

#[allow(clippy::too_many_arguments)]
fn cmd_train_classifier(
    cfg: &PipelineConfig,
    master_seed: u64,
    features: &Path,
    out: &Path,
    report_out: Option<&Path>,
    trees_out: Option<&Path>,
    ablate: bool,
    folds: usize,
) -> CliResult<()> {
    let rows = read_rows(features)?;
    let data = rows_with_labels(&rows)?;
    let boost_cfg = if ablate {
        cfg.boost.clone().ablated()
    } else {
        cfg.boost.clone()
    };

    // cross-validated held-out predictions
    let fold_plan = boost::stratified_kfold(&data, folds, derive_seed(master_seed, 6))
        .map_err(|e| CliError::config(e.to_string()))?;
    let mut pred = vec![0u8; data.len()];
    let mut severe = vec![0.0f64; data.len()];
    for held in &fold_plan {
        let held_set: std::collections::HashSet<usize> = held.iter().cloned().collect();
        let train: Vec<(FeatureVector, u8)> = data
            .iter()
            .enumerate()
            .filter(|(i, _)| !held_set.contains(i))
            .map(|(_, r)| *r)
            .collect();
        let model = boost::fit(&train, &boost_cfg).map_err(|e| CliError::config(e.to_string()))?;
        for &i in held {
            let (score, probs) = boost::predict(&model, &data[i].0);
            pred[i] = score;
            severe[i] = boost::severe_probability(&probs);
        }
    }
    let truth: Vec<u8> = data.iter().map(|(_, y)| *y).collect();
    let overall = stats::eval_report(&truth, &pred, &severe)
        .map_err(|e| CliError::contract("evaluation", e.to_string()))?;
    let mut per_movement = BTreeMap::new();
    for movement in MovementKind::ALL {
        let idx: Vec<usize> = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.movement == movement)
            .map(|(i, _)| i)
            .collect();
        if idx.is_empty() {
            continue;
        }
        let t: Vec<u8> = idx.iter().map(|&i| truth[i]).collect();
        let p: Vec<u8> = idx.iter().map(|&i| pred[i]).collect();
        let s: Vec<f64> = idx.iter().map(|&i| severe[i]).collect();
        if let Ok(report) = stats::eval_report(&t, &p, &s) {
            per_movement.insert(movement.as_str().to_string(), report);
        }
    }

    // final model on all rows
    let model = boost::fit(&data, &boost_cfg).map_err(|e| CliError::config(e.to_string()))?;
    let mut buf = Vec::new();
    boost::save_model(&model, &mut buf).map_err(|e| CliError::internal(e.to_string()))?;
    fs::write(out, buf).map_err(|e| io_err(out, e))?;
    if let Some(path) = report_out {
        write_json(
            path,
            &CvReport {
                folds,
                overall,
                per_movement,
            },
        )?;
    }
    if let Some(path) = trees_out {
        fs::write(path, boost::export_text(&model)).map_err(|e| io_err(path, e))?;
    }
    println!(
        "trained classifier on {} rows ({} folds); model at {}",
        data.len(),
        folds,
        out.display()
    );
    Ok(())
}

/// One score-sheet row: features, arrest category, final score with
/// class probabilities, and data-quality flags.
#[derive(Debug, Serialize, serde::Deserialize)]
pub struct ScoreSheetRow {
    pub subject_id: String,
    pub movement: MovementKind,
    pub side: Side,
    pub mean_amp: f64,
    pub rsd_amp: f64,
    pub mean_int: f64,
    pub rsd_int: f64,
    pub fatigue: f64,
    pub arrest: u8,
    pub score: u8,
    pub probs: [f64; 4],
    pub flags: Vec<String>,
}

#[derive(Debug, Serialize, serde::Deserialize)]
pub struct ScoreSheet {
    pub rows: Vec<ScoreSheetRow>,
}

fn cmd_score(features: &Path, model_path: &Path, out: &Path) -> CliResult<()> {
    let rows = read_rows(features)?;
    let file = fs::File::open(model_path).map_err(|e| io_err(model_path, e))?;
    let model = boost::load_model(BufReader::new(file)).map_err(|e| {
        CliError::contract("missing_artifact", format!("{}: {e}", model_path.display()))
    })?;
    let mut sheet = ScoreSheet { rows: Vec::new() };
    for row in &rows {
        let fv = row.feature_vector().ok_or_else(|| {
            CliError::contract(
                "missing_artifact",
                format!("row {} has no arrest category", row.subject_id),
            )
        })?;
        let (score, probs) = boost::predict(&model, &fv);
        if score > 3 {
            return Err(CliError::internal("score out of range"));
        }
        let mut flags = Vec::new();
        if fv.fatigue == 0.0 {
            // cannot distinguish "no decrement" from "too few cycles"
            // downstream of the CSV; re-derive nothing, just note zeros
            flags.push("fatigue_zero".to_string());
        }
        sheet.rows.push(ScoreSheetRow {
            subject_id: row.subject_id.clone(),
            movement: row.movement,
            side: row.side,
            mean_amp: fv.mean_amp,
            rsd_amp: fv.rsd_amp,
            mean_int: fv.mean_int,
            rsd_int: fv.rsd_int,
            fatigue: fv.fatigue,
            arrest: fv.arrest,
            score,
            probs,
            flags,
        });
    }
    write_json(out, &sheet)?;
    println!("scored {} rows to {}", sheet.rows.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct EvaluationFile {
    overall: stats::EvalReport,
    per_movement: BTreeMap<String, stats::EvalReport>,
}

fn cmd_evaluate(features: &Path, scoresheet: &Path, out: &Path) -> CliResult<()> {
    let rows = read_rows(features)?;
    let sheet: ScoreSheet = {
        let file = fs::File::open(scoresheet).map_err(|e| io_err(scoresheet, e))?;
        serde_json::from_reader(BufReader::new(file)).map_err(|e| {
            CliError::contract("malformed_input", format!("{}: {e}", scoresheet.display()))
        })?
    };
    if rows.len() != sheet.rows.len() {
        return Err(CliError::contract(
            "length_mismatch",
            format!(
                "feature rows ({}) and score-sheet rows ({}) differ",
                rows.len(),
                sheet.rows.len()
            ),
        ));
    }
    let mut truth = Vec::with_capacity(rows.len());
    let mut pred = Vec::with_capacity(rows.len());
    let mut severe = Vec::with_capacity(rows.len());
    for (row, scored) in rows.iter().zip(&sheet.rows) {
        if row.subject_id != scored.subject_id
            || row.movement != scored.movement
            || row.side != scored.side
        {
            return Err(CliError::contract(
                "length_mismatch",
                format!("row mismatch at subject {}", row.subject_id),
            ));
        }
        truth.push(row.score.ok_or_else(|| {
            CliError::contract(
                "missing_artifact",
                format!("row {} has no expert score", row.subject_id),
            )
        })?);
        pred.push(scored.score);
        severe.push(scored.probs[2] + scored.probs[3]);
    }
    let overall = stats::eval_report(&truth, &pred, &severe)
        .map_err(|e| CliError::contract("evaluation", e.to_string()))?;
    let mut per_movement = BTreeMap::new();
    for movement in MovementKind::ALL {
        let idx: Vec<usize> = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.movement == movement)
            .map(|(i, _)| i)
            .collect();
        if idx.is_empty() {
            continue;
        }
        let t: Vec<u8> = idx.iter().map(|&i| truth[i]).collect();
        let p: Vec<u8> = idx.iter().map(|&i| pred[i]).collect();
        let s: Vec<f64> = idx.iter().map(|&i| severe[i]).collect();
        if let Ok(report) = stats::eval_report(&t, &p, &s) {
            per_movement.insert(movement.as_str().to_string(), report);
        }
    }
    write_json(
        out,
        &EvaluationFile {
            overall,
            per_movement,
        },
    )?;
    println!("evaluation written to {}", out.display());
    Ok(())
}

fn cmd_sigtest(
    cfg: &PipelineConfig,
    master_seed: u64,
    features: &Path,
    out: &Path,
    bootstrap: Option<usize>,
) -> CliResult<()> {
    let rows = read_rows(features)?;
    let mut plam_cfg = cfg.plam.clone();
    if let Some(b) = bootstrap {
        plam_cfg.bootstrap_b = b;
    }
    let report = stats::significance_table(&rows, &plam_cfg, derive_seed(master_seed, 5));
    if report.cells.is_empty() {
        return Err(CliError::contract(
            "missing_artifact",
            "no (movement, side) cell had usable rows",
        ));
    }
    write_json(out, &report)?;
    println!(
        "significance report with {} cells written to {}",
        report.cells.len(),
        out.display()
    );
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut buf = Vec::new();
    serde_json::to_writer_pretty(&mut buf, value)
        .map_err(|e| CliError::internal(e.to_string()))?;
    buf.push(b'\n');
    let mut file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    file.write_all(&buf).map_err(|e| io_err(path, e))?;
    Ok(())
}
