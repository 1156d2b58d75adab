use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::metrics::{predict, Confusion};
use super::optim::{Adam, AdamConfig};
use crate::autodiff::{bce, ParamStore, SparseMatrix, Tape};
use crate::config::DataConfig;
use crate::error::{Error, Result};
use crate::graph::IndustryGraph;
use crate::market::{
    build_windows, check_industry_coverage, curb_samples, index_minutes, DailyBar, Dataset,
    MinuteBar, Split, SplitPlan, SyntheticMarket, Universe,
};
use crate::model::{DayInput, Model};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Global gradient-norm clip; `null` disables it.
    pub clip_norm: Option<f64>,
    pub epochs: usize,
    /// Epochs without a validation-F1 improvement before stopping.
    pub patience: usize,
    pub seeds: Vec<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: Some(5.0),
            epochs: 30,
            patience: 6,
            seeds: vec![1, 2, 3, 4, 5],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.epochs == 0 || self.patience == 0 {
            return Err(Error::Config("epochs and patience must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list must not be empty".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return Err(Error::Config("adam betas must lie in [0, 1) and epsilon must be positive".into()));
        }
        if self.clip_norm.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::Config("clip_norm must be positive".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            clip_norm: self.clip_norm,
        }
    }
}

/// Normalized samples, the split, the graph and per-day model inputs.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub dataset: Dataset,
    pub plan: SplitPlan,
    pub graph: IndustryGraph,
    pub operator: Arc<SparseMatrix>,
    /// Aligned with `dataset.days`.
    pub inputs: Vec<DayInput>,
}

impl PreparedData {
    /// Detects curb events, builds lookback windows, splits by time and
    /// z-scores with training statistics.
    pub fn from_bars(
        daily: &[DailyBar],
        minute: &[MinuteBar],
        industries: &BTreeMap<String, String>,
        data: &DataConfig,
        lookback: usize,
    ) -> Result<Self> {
        check_industry_coverage(daily, industries)?;
        let graph = IndustryGraph::build(industries)?;
        let minutes = index_minutes(minute);
        let events = curb_samples(daily, &minutes, data.curb, data.ma_window)?;
        let universe = Universe::from_industry_map(industries);
        let mut dataset = build_windows(daily, &events, &universe, lookback)?;
        let plan = dataset.split(data.train_frac, data.val_frac)?;
        dataset.normalize(&plan)?;
        let features = crate::market::DAILY_FEATURES;
        let inputs = dataset
            .days
            .iter()
            .map(|d| DayInput::from_batch(d, lookback, features))
            .collect::<Result<_>>()?;
        let operator = graph.normalized_operator();
        Ok(PreparedData {
            dataset,
            plan,
            graph,
            operator,
            inputs,
        })
    }

    pub fn from_synthetic(market: &SyntheticMarket, data: &DataConfig, lookback: usize) -> Result<Self> {
        Self::from_bars(&market.daily, &market.minute, &market.industries, data, lookback)
    }

    pub fn split(&self, split: Split) -> &[DayInput] {
        &self.inputs[self.plan.range(split)]
    }

    pub fn sample_count(&self, split: Split) -> usize {
        self.split(split).iter().map(DayInput::curb_count).sum()
    }

    /// Fraction of label-1 samples in a split.
    pub fn positive_rate(&self, split: Split) -> f64 {
        let days = self.split(split);
        let pos: f64 = days.iter().flat_map(|d| &d.labels).sum();
        pos / self.sample_count(split) as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub confusion: Confusion,
    /// Mean per-sample binary cross-entropy.
    pub loss: f64,
    pub accuracy: f64,
    pub f1: f64,
}

pub fn evaluate(
    model: &Model,
    params: &ParamStore,
    days: &[DayInput],
    graph: Option<&Arc<SparseMatrix>>,
) -> Result<Evaluation> {
    if days.is_empty() {
        return Err(Error::Data("cannot evaluate on an empty split".into()));
    }
    let mut confusion = Confusion::default();
    let mut loss = 0.0;
    for day in days {
        let logits = model.logits(params, day, graph)?;
        for (&z, &y) in logits.iter().zip(&day.labels) {
            loss += bce(z, y);
            confusion.record(y as u8, predict(z));
        }
    }
    Ok(Evaluation {
        confusion,
        loss: loss / confusion.total() as f64,
        accuracy: confusion.accuracy(),
        f1: confusion.f1(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean of the per-day losses seen while updating.
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_f1: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the highest validation F1.
    pub params: ParamStore,
    pub best_epoch: usize,
    pub best_val_f1: f64,
    pub epochs_ran: usize,
    pub history: Vec<EpochStats>,
}

/// Runs one optimizer step per training day, days in chronological order.
pub fn train_epoch(
    model: &Model,
    params: &mut ParamStore,
    adam: &mut Adam,
    days: &[DayInput],
    graph: Option<&Arc<SparseMatrix>>,
) -> Result<f64> {
    let mut total = 0.0;
    for day in days {
        let mut tape = Tape::new();
        let vars = params.register(&mut tape);
        let loss = model.day_loss(&mut tape, &vars, day, graph)?;
        let value = tape.value(loss).item();
        if !value.is_finite() {
            return Err(Error::Diverged(format!("loss is {value} on day {}", day.day)));
        }
        let grads = vars.collect(&tape.backward(loss)?);
        adam.step(params, &grads)?;
        total += value;
    }
    Ok(total / days.len() as f64)
}

/// Trains from `seed`'s initialization with early stopping on validation F1.
/// Only the training and validation splits are read.
pub fn train(model: &Model, data: &PreparedData, seed: u64, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let train_days = data.split(Split::Train);
    let val_days = data.split(Split::Val);
    if train_days.is_empty() || val_days.is_empty() {
        return Err(Error::Data("training and validation splits must be nonempty".into()));
    }
    let graph = model.needs_graph().then_some(&data.operator);
    let mut params = model.init_params(seed);
    let mut adam = Adam::new(cfg.adam());
    let mut best: Option<(usize, f64, ParamStore)> = None;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut stale = 0;
    for epoch in 1..=cfg.epochs {
        let train_loss = train_epoch(model, &mut params, &mut adam, train_days, graph)?;
        let val = evaluate(model, &params, val_days, graph)?;
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss: val.loss,
            val_f1: val.f1,
        });
        if best.as_ref().is_none_or(|(_, f1, _)| val.f1 > *f1) {
            best = Some((epoch, val.f1, params.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    let (best_epoch, best_val_f1, params) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        params,
        best_epoch,
        best_val_f1,
        epochs_ran: history.len(),
        history,
    })
}
