use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::mean_std;
use super::trainer::{evaluate, train, EpochStats, Evaluation, PreparedData, TrainConfig};
use crate::autodiff::ParamStore;
use crate::config::RunSelection;
use crate::error::{Error, Result};
use crate::market::Split;
use crate::model::{HgnnConfig, Model};

/// One trained `(model, preset, seed)` cell of the grid.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub model: Model,
    pub seed: u64,
    pub parameter_count: usize,
    pub best_epoch: usize,
    pub epochs_ran: usize,
    pub val: Evaluation,
    pub test: Evaluation,
    pub history: Vec<EpochStats>,
    pub params: ParamStore,
    pub wall_seconds: f64,
}

impl RunRecord {
    pub fn model_name(&self) -> &'static str {
        self.model.kind.as_str()
    }

    pub fn preset(&self) -> &'static str {
        self.model.preset_label()
    }

    /// Directory-safe identifier, e.g. `hgnn-full-s3`.
    pub fn slug(&self) -> String {
        match self.preset() {
            "-" => format!("{}-s{}", self.model_name(), self.seed),
            p => format!("{}-{}-s{}", self.model_name(), p, self.seed),
        }
    }
}

pub fn run_one(model: &Model, data: &PreparedData, seed: u64, cfg: &TrainConfig) -> Result<RunRecord> {
    let start = Instant::now();
    let outcome = train(model, data, seed, cfg)?;
    let graph = model.needs_graph().then_some(&data.operator);
    let val = evaluate(model, &outcome.params, data.split(Split::Val), graph)?;
    let test = evaluate(model, &outcome.params, data.split(Split::Test), graph)?;
    Ok(RunRecord {
        model: model.clone(),
        seed,
        parameter_count: model.parameter_count(),
        best_epoch: outcome.best_epoch,
        epochs_ran: outcome.epochs_ran,
        val,
        test,
        history: outcome.history,
        params: outcome.params,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Trains every selection under every seed. Runs are independent and fan
/// out over `workers` threads; output order is selection-major, then seed
/// order, regardless of scheduling.
pub fn multi_seed_experiment(
    selections: &[RunSelection],
    base: &HgnnConfig,
    data: &PreparedData,
    cfg: &TrainConfig,
    workers: usize,
) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let models = selections
        .iter()
        .map(|s| s.build(base))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(&Model, u64)> = models
        .iter()
        .flat_map(|m| cfg.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        jobs.par_iter()
            .map(|&(m, seed)| run_one(m, data, seed, cfg))
            .collect()
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub model: String,
    pub preset: String,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub f1_mean: f64,
    pub f1_std: f64,
    pub n_seeds: usize,
}

impl AggregateRow {
    /// Table label, e.g. `HGNN (full)` or `LSTM`.
    pub fn label(&self) -> String {
        let m = match self.model.as_str() {
            "logreg" => "LR".to_string(),
            other => other.to_uppercase(),
        };
        match self.preset.as_str() {
            "-" => m,
            p => format!("{m} ({p})"),
        }
    }
}

/// Per-seed test metrics of one `(model, preset)` group.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedMetrics {
    pub model: String,
    pub preset: String,
    pub accuracy: Vec<f64>,
    pub f1: Vec<f64>,
}

/// Groups test-split metrics by `(model, preset)` in first-seen order.
pub fn group_test_metrics<'a, I>(rows: I) -> Vec<SeedMetrics>
where
    I: IntoIterator<Item = (&'a str, &'a str, f64, f64)>,
{
    let mut groups: Vec<SeedMetrics> = Vec::new();
    for (model, preset, acc, f1) in rows {
        let idx = match groups.iter().position(|g| g.model == model && g.preset == preset) {
            Some(i) => i,
            None => {
                groups.push(SeedMetrics {
                    model: model.to_string(),
                    preset: preset.to_string(),
                    accuracy: Vec::new(),
                    f1: Vec::new(),
                });
                groups.len() - 1
            }
        };
        groups[idx].accuracy.push(acc);
        groups[idx].f1.push(f1);
    }
    groups
}

/// Mean and sample std over seeds. Groups with a single seed get std 0 and a
/// warning in the second return value.
pub fn aggregate_groups(groups: &[SeedMetrics]) -> (Vec<AggregateRow>, Vec<String>) {
    let mut warnings = Vec::new();
    let rows = groups
        .iter()
        .map(|g| {
            if g.accuracy.len() < 2 {
                warnings.push(format!(
                    "{}/{}: only one seed, std reported as 0",
                    g.model, g.preset
                ));
            }
            let (acc_mean, acc_std) = mean_std(&g.accuracy);
            let (f1_mean, f1_std) = mean_std(&g.f1);
            AggregateRow {
                model: g.model.clone(),
                preset: g.preset.clone(),
                acc_mean,
                acc_std,
                f1_mean,
                f1_std,
                n_seeds: g.accuracy.len(),
            }
        })
        .collect();
    (rows, warnings)
}

pub fn aggregate(records: &[RunRecord]) -> (Vec<AggregateRow>, Vec<String>) {
    let groups = group_test_metrics(
        records
            .iter()
            .map(|r| (r.model_name(), r.preset(), r.test.accuracy, r.test.f1)),
    );
    aggregate_groups(&groups)
}

pub const RESULTS_HEADER: [&str; 11] = [
    "model", "preset", "seed", "split", "accuracy", "f1", "tp", "fp", "fn", "tn", "epochs_ran",
];
pub const AGGREGATE_HEADER: [&str; 7] = ["model", "preset", "acc_mean", "acc_std", "f1_mean", "f1_std", "n_seeds"];
pub const LOSS_CURVE_HEADER: [&str; 4] = ["epoch", "train_loss", "val_loss", "val_f1"];

fn csv_err(e: csv::Error) -> Error {
    Error::Data(format!("csv write failed: {e}"))
}

/// One row per run and split (validation and test).
pub fn write_results_csv<W: Write>(out: W, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER).map_err(csv_err)?;
    for r in records {
        for (split, e) in [(Split::Val, &r.val), (Split::Test, &r.test)] {
            let c = e.confusion;
            w.write_record([
                r.model_name().to_string(),
                r.preset().to_string(),
                r.seed.to_string(),
                split.as_str().to_string(),
                e.accuracy.to_string(),
                e.f1.to_string(),
                c.tp.to_string(),
                c.fp.to_string(),
                c.fn_.to_string(),
                c.tn.to_string(),
                r.epochs_ran.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))
}

pub fn write_aggregate_csv<W: Write>(out: W, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGGREGATE_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.model.clone(),
            r.preset.clone(),
            r.acc_mean.to_string(),
            r.acc_std.to_string(),
            r.f1_mean.to_string(),
            r.f1_std.to_string(),
            r.n_seeds.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))
}

pub fn write_loss_curve<W: Write>(out: W, history: &[EpochStats]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LOSS_CURVE_HEADER).map_err(csv_err)?;
    for h in history {
        w.write_record([
            h.epoch.to_string(),
            h.train_loss.to_string(),
            h.val_loss.to_string(),
            h.val_f1.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))
}

/// Text table with one row per method and `mean±std` percentages.
pub fn format_table(rows: &[AggregateRow]) -> String {
    let labels: Vec<String> = rows.iter().map(AggregateRow::label).collect();
    let width = labels.iter().map(String::len).max().unwrap_or(0).max("Method".len());
    let mut s = String::new();
    let _ = writeln!(s, "{:<width$}  {:>13}  {:>13}", "Method", "Acc(%)", "F1(%)");
    for (r, label) in rows.iter().zip(&labels) {
        let _ = writeln!(
            s,
            "{:<width$}  {:>13}  {:>13}",
            label,
            format!("{:.2}±{:.2}", 100.0 * r.acc_mean, 100.0 * r.acc_std),
            format!("{:.2}±{:.2}", 100.0 * r.f1_mean, 100.0 * r.f1_std),
        );
    }
    s
}
