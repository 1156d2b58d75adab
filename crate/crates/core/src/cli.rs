//! The `hgnn` command line: argument definitions and one function per
//! subcommand. The binary only parses arguments and maps the outcome to an
//! exit status.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autodiff::OpKind;
use crate::config::{ExperimentConfig, RunSelection};
use crate::error::{Error, Result};
use crate::fsio::{create_dir, read_to_string, write_atomic, write_atomic_with};
use crate::gradsuite::{run_suite, SuiteReport};
use crate::market::{
    curb_samples, generate_synthetic, index_minutes, load_daily_csv, load_industry_csv,
    load_minute_csv, write_daily, write_industry, write_minute, Split,
};
use crate::model::{Checkpoint, ModelKind, Preset};
use crate::train::{
    aggregate, evaluate, format_table, multi_seed_experiment, write_aggregate_csv, write_loss_curve,
    write_results_csv, AggregateRow, EpochStats, Evaluation, PreparedData, RunRecord,
    AGGREGATE_HEADER, LOSS_CURVE_HEADER,
};

pub const DAILY_FILE: &str = "daily.csv";
pub const MINUTE_FILE: &str = "minute.csv";
pub const INDUSTRY_FILE: &str = "industry.csv";
pub const EDGES_FILE: &str = "industry_edges.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SEED_ENV: &str = "HGNN_SEED";

#[derive(Debug, Parser)]
#[command(name = "hgnn", version, about = "Hierarchical graph neural network for curb-stock type prediction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic market (daily, minute and industry CSVs plus a manifest).
    Generate(GenerateArgs),
    /// Train one model and save its best-validation checkpoint.
    Train(TrainArgs),
    /// Score a saved checkpoint on one split.
    Evaluate(EvaluateArgs),
    /// Train every configured model/preset under every seed and aggregate.
    Ablate(AblateArgs),
    /// Finite-difference gradient checks of every operation and model.
    Gradcheck(GradcheckArgs),
    /// Print the results table of a run directory and write plot data.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Experiment config (JSON); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Generator seed; overrides HGNN_SEED and the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory holding daily.csv, minute.csv and industry.csv.
    #[arg(long)]
    pub data: PathBuf,
    /// Run directory for the checkpoint and reports.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelKind::Hgnn)]
    pub model: ModelKind,
    /// View subset for hgnn: node_only, node_relation, node_market or full.
    #[arg(long, value_parser = parse_preset)]
    pub preset: Option<Preset>,
    /// Training seed; overrides HGNN_SEED and the first configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = Split::Test)]
    pub split: Split,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; each run is trained by one worker.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Run a single seed instead of the configured list; overrides HGNN_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Seed for the random test instances; overrides HGNN_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Corrupt the adjoint of one operation (negative control), e.g. softmax.
    #[arg(long, value_parser = parse_op)]
    pub inject_bug: Option<OpKind>,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directory produced by `ablate` or `train`.
    pub run_dir: PathBuf,
}

fn parse_preset(s: &str) -> std::result::Result<Preset, String> {
    Preset::parse(s).ok_or_else(|| {
        let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
        format!("unknown preset `{s}`; expected one of {}", names.join(", "))
    })
}

fn parse_op(s: &str) -> std::result::Result<OpKind, String> {
    OpKind::parse(s).ok_or_else(|| {
        let names: Vec<_> = OpKind::DIFFERENTIABLE.iter().map(|k| k.name()).collect();
        format!("unknown operation `{s}`; expected one of {}", names.join(", "))
    })
}

/// Seed precedence: flag, then `HGNN_SEED`, then the config value.
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>, config: u64) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match env {
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        None => Ok(config),
    }
}

fn env_seed() -> Option<String> {
    std::env::var(SEED_ENV).ok()
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub config_hash: String,
    pub daily_rows: usize,
    pub minute_rows: usize,
    pub stocks: usize,
    pub industries: usize,
    pub curb_events: usize,
    pub sealed_events: usize,
    /// Fraction of curb events that closed at the curb (label 1).
    pub label_balance: f64,
    /// SHA-256 of each written data file.
    pub files: BTreeMap<String, String>,
}

pub fn cmd_generate(config: &ExperimentConfig, out: &Path, seed_flag: Option<u64>) -> Result<Manifest> {
    let mut cfg = config.clone();
    cfg.synth.seed = resolve_seed(seed_flag, env_seed().as_deref(), cfg.synth.seed)?;
    cfg.validate()?;
    let market = generate_synthetic(&cfg.synth)?;
    let events = curb_samples(
        &market.daily,
        &index_minutes(&market.minute),
        cfg.synth.rule(),
        cfg.data.ma_window,
    )?;
    let sealed = events.iter().filter(|(e, _)| e.label == 1).count();

    let mut files: Vec<(&str, Vec<u8>)> = Vec::new();
    let mut buf = Vec::new();
    write_daily(&mut buf, &market.daily)?;
    files.push((DAILY_FILE, std::mem::take(&mut buf)));
    write_minute(&mut buf, &market.minute)?;
    files.push((MINUTE_FILE, std::mem::take(&mut buf)));
    write_industry(&mut buf, &market.industries)?;
    files.push((INDUSTRY_FILE, std::mem::take(&mut buf)));
    crate::graph::IndustryGraph::build(&market.industries)?
        .write_edge_list(&mut buf)
        .map_err(|e| Error::io(EDGES_FILE, e))?;
    files.push((EDGES_FILE, buf));

    let manifest = Manifest {
        seed: cfg.synth.seed,
        config_hash: cfg.fingerprint(),
        daily_rows: market.daily.len(),
        minute_rows: market.minute.len(),
        stocks: market.industries.len(),
        industries: cfg.synth.n_industries,
        curb_events: events.len(),
        sealed_events: sealed,
        label_balance: sealed as f64 / events.len() as f64,
        files: files
            .iter()
            .map(|(n, b)| (n.to_string(), hex::encode(Sha256::digest(b))))
            .collect(),
    };
    create_dir(out)?;
    for (name, bytes) in &files {
        write_atomic(&out.join(name), bytes)?;
    }
    let json = serde_json::to_string_pretty(&manifest)?;
    write_atomic(&out.join(MANIFEST_FILE), json.as_bytes())?;
    Ok(manifest)
}

/// Loads and validates the three CSVs. The industry file is read first so
/// a missing or malformed graph fails before anything else.
pub fn load_data(dir: &Path, config: &ExperimentConfig) -> Result<PreparedData> {
    let industries = load_industry_csv(dir.join(INDUSTRY_FILE))?;
    let daily = load_daily_csv(dir.join(DAILY_FILE))?;
    let minute = load_minute_csv(dir.join(MINUTE_FILE))?;
    PreparedData::from_bars(&daily, &minute, &industries, &config.data, config.model.lookback)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub model: String,
    pub preset: String,
    pub seed: u64,
    pub parameter_count: usize,
    pub best_epoch: usize,
    pub epochs_ran: usize,
    pub val: Evaluation,
    pub test: Evaluation,
    pub wall_seconds: f64,
    pub loss_curve: Vec<EpochStats>,
}

impl From<&RunRecord> for RunSummary {
    fn from(r: &RunRecord) -> Self {
        RunSummary {
            model: r.model_name().to_string(),
            preset: r.preset().to_string(),
            seed: r.seed,
            parameter_count: r.parameter_count,
            best_epoch: r.best_epoch,
            epochs_ran: r.epochs_ran,
            val: r.val,
            test: r.test,
            wall_seconds: r.wall_seconds,
            loss_curve: r.history.clone(),
        }
    }
}

/// Everything a finished `train` or `ablate` leaves behind in `report.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub config_fingerprint: String,
    pub wall_seconds: f64,
    pub runs: Vec<RunSummary>,
    pub aggregate: Vec<AggregateRow>,
    pub warnings: Vec<String>,
}

fn checkpoint_of(r: &RunRecord, config: &ExperimentConfig) -> Checkpoint {
    Checkpoint {
        fingerprint: config.fingerprint(),
        seed: r.seed,
        model: r.model.clone(),
        data: config.data.clone(),
        best_epoch: r.best_epoch,
        val_f1: r.val.f1,
        params: r.params.clone(),
    }
}

/// Writes results, aggregate, loss curves, checkpoints, the text table and
/// `report.json` into `out`.
pub fn write_run_dir(
    out: &Path,
    config: &ExperimentConfig,
    records: &[RunRecord],
    wall_seconds: f64,
) -> Result<RunReport> {
    let (rows, warnings) = aggregate(records);
    create_dir(&out.join("curves"))?;
    create_dir(&out.join("checkpoints"))?;
    for r in records {
        let slug = r.slug();
        let p = out.join("curves").join(format!("{slug}.csv"));
        write_atomic_with(&p, |w| write_loss_curve(w, &r.history))?;
        checkpoint_of(r, config).save(&out.join("checkpoints").join(format!("{slug}.json")))?;
    }
    write_atomic_with(&out.join("results.csv"), |w| write_results_csv(w, records))?;
    write_atomic_with(&out.join("aggregate.csv"), |w| write_aggregate_csv(w, &rows))?;
    write_atomic(&out.join("table.txt"), format_table(&rows).as_bytes())?;
    write_atomic(&out.join("config.json"), config.to_json().as_bytes())?;
    let report = RunReport {
        config_fingerprint: config.fingerprint(),
        wall_seconds,
        runs: records.iter().map(RunSummary::from).collect(),
        aggregate: rows,
        warnings,
    };
    write_atomic(&out.join("report.json"), serde_json::to_string_pretty(&report)?.as_bytes())?;
    Ok(report)
}

pub struct TrainRequest<'a> {
    pub config: &'a ExperimentConfig,
    pub data_dir: &'a Path,
    pub out: &'a Path,
    pub model: ModelKind,
    pub preset: Option<Preset>,
    pub seed: Option<u64>,
}

/// Trains one model under one seed; the best checkpoint lands in `out/best.json`.
pub fn cmd_train(req: TrainRequest<'_>) -> Result<RunReport> {
    let start = Instant::now();
    let first = req.config.train.seeds.first().copied().unwrap_or(1);
    let seed = resolve_seed(req.seed, env_seed().as_deref(), first)?;
    let preset = match req.model {
        ModelKind::Hgnn => Some(req.preset.unwrap_or(Preset::Full)),
        _ if req.preset.is_some() => {
            return Err(Error::Config("--preset only applies to --model hgnn".into()))
        }
        _ => None,
    };
    let selection = RunSelection {
        model: req.model,
        preset,
    };
    let mut config = req.config.clone();
    config.train.seeds = vec![seed];
    config.runs = vec![selection];
    config.validate()?;
    let data = load_data(req.data_dir, &config)?;
    let records = multi_seed_experiment(&config.runs, &config.model, &data, &config.train, 1)?;
    create_dir(req.out)?;
    let report = write_run_dir(req.out, &config, &records, start.elapsed().as_secs_f64())?;
    checkpoint_of(&records[0], &config).save(&req.out.join("best.json"))?;
    Ok(report)
}

pub fn cmd_evaluate(checkpoint: &Path, data_dir: &Path, split: Split) -> Result<Evaluation> {
    let ck = Checkpoint::load(checkpoint)?;
    let config = ExperimentConfig {
        data: ck.data.clone(),
        model: ck.model.config.clone(),
        ..ExperimentConfig::default()
    };
    let data = load_data(data_dir, &config)?;
    let graph = ck.model.needs_graph().then_some(&data.operator);
    evaluate(&ck.model, &ck.params, data.split(split), graph)
}

pub fn cmd_ablate(
    config: &ExperimentConfig,
    data_dir: &Path,
    out: &Path,
    workers: usize,
    seed: Option<u64>,
) -> Result<RunReport> {
    let start = Instant::now();
    let mut config = config.clone();
    let env = env_seed();
    if seed.is_some() || env.is_some() {
        config.train.seeds = vec![resolve_seed(seed, env.as_deref(), 0)?];
    }
    config.validate()?;
    let data = load_data(data_dir, &config)?;
    let records = multi_seed_experiment(&config.runs, &config.model, &data, &config.train, workers)?;
    create_dir(out)?;
    write_run_dir(out, &config, &records, start.elapsed().as_secs_f64())
}

pub fn cmd_gradcheck(seed: Option<u64>, inject: Option<OpKind>) -> Result<SuiteReport> {
    run_suite(resolve_seed(seed, env_seed().as_deref(), 0)?, inject)
}

/// Reads `aggregate.csv`, writes `plots/ablation_bars.csv` and
/// `plots/loss_curves.csv`, and returns the formatted table.
pub fn cmd_report(run_dir: &Path) -> Result<String> {
    let agg_path = run_dir.join("aggregate.csv");
    if !agg_path.is_file() {
        return Err(Error::Data(format!("no runs found in {}", run_dir.display())));
    }
    let rows = read_aggregate_csv(&agg_path)?;
    if rows.is_empty() {
        return Err(Error::Data(format!("no runs found in {}", run_dir.display())));
    }
    let plots = run_dir.join("plots");
    create_dir(&plots)?;
    write_atomic_with(&plots.join("ablation_bars.csv"), |w| {
        let mut c = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::Data(e.to_string());
        c.write_record(["method", "acc_mean", "acc_std", "f1_mean", "f1_std"]).map_err(err)?;
        for r in &rows {
            c.write_record([
                r.label(),
                r.acc_mean.to_string(),
                r.acc_std.to_string(),
                r.f1_mean.to_string(),
                r.f1_std.to_string(),
            ])
            .map_err(err)?;
        }
        c.flush().map_err(|e| Error::io(&plots, e))
    })?;

    let curves_dir = run_dir.join("curves");
    let mut curves: Vec<(String, String)> = Vec::new();
    if curves_dir.is_dir() {
        let mut names: Vec<PathBuf> = fs::read_dir(&curves_dir)
            .map_err(|e| Error::io(&curves_dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        names.sort();
        for p in names {
            let run = p.file_stem().expect("file").to_string_lossy().into_owned();
            curves.push((run, read_to_string(&p)?));
        }
    }
    write_atomic_with(&plots.join("loss_curves.csv"), |w| {
        writeln!(w, "run,{}", LOSS_CURVE_HEADER.join(",")).map_err(|e| Error::io(&plots, e))?;
        for (run, text) in &curves {
            for line in text.lines().skip(1) {
                writeln!(w, "{run},{line}").map_err(|e| Error::io(&plots, e))?;
            }
        }
        Ok(())
    })?;
    Ok(format_table(&rows))
}

pub fn read_aggregate_csv(path: &Path) -> Result<Vec<AggregateRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let headers = r.headers().map_err(|e| Error::Data(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != AGGREGATE_HEADER {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            expected: AGGREGATE_HEADER.join(","),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Data(e.to_string()))?;
        let line = i as u64 + 2;
        let num = |k: usize| -> Result<f64> {
            rec[k].parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("column {} is not a number: {:?}", AGGREGATE_HEADER[k], &rec[k]),
            })
        };
        rows.push(AggregateRow {
            model: rec[0].to_string(),
            preset: rec[1].to_string(),
            acc_mean: num(2)?,
            acc_std: num(3)?,
            f1_mean: num(4)?,
            f1_std: num(5)?,
            n_seeds: num(6)? as usize,
        });
    }
    Ok(rows)
}

/// Runs a parsed command, printing to stdout. Returns `Ok(false)` when the
/// command completed but reports failure (a failing gradient check).
pub fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Generate(a) => {
            let cfg = load_config(a.config.as_deref())?;
            let m = cmd_generate(&cfg, &a.out, a.seed)?;
            println!("{}", serde_json::to_string_pretty(&m)?);
        }
        Command::Train(a) => {
            let cfg = load_config(a.config.as_deref())?;
            let report = cmd_train(TrainRequest {
                config: &cfg,
                data_dir: &a.data,
                out: &a.out,
                model: a.model,
                preset: a.preset,
                seed: a.seed,
            })?;
            let r = &report.runs[0];
            println!(
                "{} {} seed {}: val acc {:.4} f1 {:.4}, test acc {:.4} f1 {:.4} (best epoch {} of {})",
                r.model, r.preset, r.seed, r.val.accuracy, r.val.f1, r.test.accuracy, r.test.f1,
                r.best_epoch, r.epochs_ran
            );
        }
        Command::Evaluate(a) => {
            let e = cmd_evaluate(&a.checkpoint, &a.data, a.split)?;
            println!("{}", serde_json::to_string_pretty(&e)?);
        }
        Command::Ablate(a) => {
            let cfg = load_config(a.config.as_deref())?;
            let report = cmd_ablate(&cfg, &a.data, &a.out, a.workers, a.seed)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", format_table(&report.aggregate));
        }
        Command::Gradcheck(a) => {
            let report = cmd_gradcheck(a.seed, a.inject_bug)?;
            if let Some(p) = &a.out {
                write_atomic(p, serde_json::to_string_pretty(&report)?.as_bytes())?;
            }
            for e in &report.entries {
                println!(
                    "{:<28} max rel err {:.3e}  {}",
                    e.name,
                    e.max_rel_err,
                    if e.passed { "ok" } else { "FAIL" }
                );
            }
            if !report.passed {
                let names: Vec<&str> = report.failing().map(|e| e.name.as_str()).collect();
                eprintln!("gradient check failed: {}", names.join(", "));
                return Ok(false);
            }
        }
        Command::Report(a) => print!("{}", cmd_report(&a.run_dir)?),
    }
    Ok(true)
}
