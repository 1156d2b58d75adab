//! Lookback windows, feature normalization and the temporal split.

use std::collections::{BTreeMap, HashMap};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::types::{CurbEvent, DailyBar, IndicatorVector, DAILY_FEATURES, INDICATOR_COUNT};
use crate::autodiff::Matrix;
use crate::error::{Error, Result};

/// One `(stock, day)` sample: the previous `T` daily feature rows and, for
/// curb stocks, the indicator vector and label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleWindow {
    pub stock_id: String,
    pub day: i64,
    pub features: Matrix,
    pub indicators: Option<IndicatorVector>,
    pub label: Option<u8>,
    pub node_index: usize,
}

impl SampleWindow {
    pub fn is_curb(&self) -> bool {
        self.label.is_some()
    }
}

/// Stocks in node order with their industry labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Universe {
    pub stocks: Vec<String>,
    pub industries: Vec<String>,
}

impl Universe {
    pub fn from_industry_map(map: &BTreeMap<String, String>) -> Self {
        Universe {
            stocks: map.keys().cloned().collect(),
            industries: map.values().cloned().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.stocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stocks.is_empty()
    }

    pub fn node_of(&self, stock: &str) -> Option<usize> {
        self.stocks.binary_search_by(|s| s.as_str().cmp(stock)).ok()
    }

    pub fn industry_map(&self) -> BTreeMap<String, String> {
        self.stocks
            .iter()
            .cloned()
            .zip(self.industries.iter().cloned())
            .collect()
    }
}

/// All node windows for one trading day that has at least one labeled curb
/// sample. `windows[i]` is `None` when node `i` lacks `T` days of history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayBatch {
    pub day: i64,
    pub windows: Vec<Option<SampleWindow>>,
}

impl DayBatch {
    pub fn curb_nodes(&self) -> Vec<usize> {
        self.windows
            .iter()
            .enumerate()
            .filter_map(|(i, w)| w.as_ref().filter(|w| w.is_curb()).map(|_| i))
            .collect()
    }

    pub fn curb_samples(&self) -> impl Iterator<Item = &SampleWindow> {
        self.windows.iter().flatten().filter(|w| w.is_curb())
    }

    pub fn labels(&self) -> Vec<f64> {
        self.curb_samples()
            .map(|w| f64::from(w.label.expect("curb sample")))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub feature_mean: [f64; DAILY_FEATURES],
    pub feature_std: [f64; DAILY_FEATURES],
    pub indicator_mean: [f64; INDICATOR_COUNT],
    pub indicator_std: [f64; INDICATOR_COUNT],
}

impl Normalization {
    /// Population mean/std over every window row (all nodes) and every
    /// indicator vector of the given days.
    pub fn fit(days: &[DayBatch]) -> Result<Self> {
        let mut feat = Moments::<DAILY_FEATURES>::default();
        let mut ind = Moments::<INDICATOR_COUNT>::default();
        for w in days.iter().flat_map(|d| d.windows.iter().flatten()) {
            for r in 0..w.features.rows() {
                feat.push(w.features.row(r));
            }
            if let Some(v) = &w.indicators {
                ind.push(&v.to_array());
            }
        }
        if feat.count == 0 || ind.count == 0 {
            return Err(Error::Data("cannot fit normalization on an empty split".into()));
        }
        let (feature_mean, feature_std) = feat.finish();
        let (indicator_mean, indicator_std) = ind.finish();
        Ok(Normalization {
            feature_mean,
            feature_std,
            indicator_mean,
            indicator_std,
        })
    }

    pub fn apply(&self, w: &mut SampleWindow) {
        for r in 0..w.features.rows() {
            for (c, x) in w.features.row_mut(r).iter_mut().enumerate() {
                *x = (*x - self.feature_mean[c]) / self.feature_std[c];
            }
        }
        if let Some(v) = &mut w.indicators {
            let mut a = v.to_array();
            for (c, x) in a.iter_mut().enumerate() {
                *x = (*x - self.indicator_mean[c]) / self.indicator_std[c];
            }
            *v = IndicatorVector::from_array(a);
        }
    }
}

struct Moments<const N: usize> {
    count: usize,
    sum: [f64; N],
    rows: Vec<[f64; N]>,
}

impl<const N: usize> Default for Moments<N> {
    fn default() -> Self {
        Moments {
            count: 0,
            sum: [0.0; N],
            rows: Vec::new(),
        }
    }
}

impl<const N: usize> Moments<N> {
    fn push(&mut self, row: &[f64]) {
        let mut r = [0.0; N];
        r.copy_from_slice(row);
        for (s, x) in self.sum.iter_mut().zip(r) {
            *s += x;
        }
        self.rows.push(r);
        self.count += 1;
    }

    /// Two-pass mean and population std; a constant column gets std 1.
    fn finish(self) -> ([f64; N], [f64; N]) {
        let n = self.count as f64;
        let mean = self.sum.map(|s| s / n);
        let mut var = [0.0; N];
        for r in &self.rows {
            for c in 0..N {
                let d = r[c] - mean[c];
                var[c] += d * d;
            }
        }
        let std = var.map(|v| {
            let s = (v / n).sqrt();
            if s > 1e-12 {
                s
            } else {
                1.0
            }
        });
        (mean, std)
    }
}

/// Contiguous day-index ranges with train days < val days < test days.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl SplitPlan {
    pub fn range(&self, split: Split) -> Range<usize> {
        match split {
            Split::Train => self.train.clone(),
            Split::Val => self.val.clone(),
            Split::Test => self.test.clone(),
        }
    }
}

pub fn temporal_split(n_days: usize, train_frac: f64, val_frac: f64) -> Result<SplitPlan> {
    if !(train_frac > 0.0 && val_frac > 0.0 && train_frac + val_frac < 1.0) {
        return Err(Error::Config(format!(
            "split fractions must be positive with train + val < 1, got {train_frac} + {val_frac}"
        )));
    }
    let n_train = (train_frac * n_days as f64).floor() as usize;
    let n_val = (val_frac * n_days as f64).floor() as usize;
    let plan = SplitPlan {
        train: 0..n_train,
        val: n_train..n_train + n_val,
        test: n_train + n_val..n_days,
    };
    for (name, r) in [("train", &plan.train), ("val", &plan.val), ("test", &plan.test)] {
        if r.is_empty() {
            return Err(Error::Data(format!(
                "{name} split is empty ({n_days} sample days available)"
            )));
        }
    }
    Ok(plan)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub lookback: usize,
    pub universe: Universe,
    pub days: Vec<DayBatch>,
    /// Curb events dropped for lack of `lookback` prior days.
    pub skipped_events: usize,
    /// Node-day windows replaced by zero state for lack of history.
    pub missing_history: usize,
    pub normalization: Option<Normalization>,
}

/// Per-day feature row: open, high, low, close as log-ratios to the previous
/// close (the bar's own open on a stock's first day), `ln(1 + volume)`, and
/// turnover `volume / float_shares`.
pub fn daily_feature_row(bar: &DailyBar, prev_close: Option<f64>) -> [f64; DAILY_FEATURES] {
    let reference = prev_close.unwrap_or(bar.open);
    [
        (bar.open / reference).ln(),
        (bar.high / reference).ln(),
        (bar.low / reference).ln(),
        (bar.close / reference).ln(),
        bar.volume.ln_1p(),
        bar.volume / bar.float_shares,
    ]
}

struct StockHistory {
    days: Vec<i64>,
    rows: Vec<[f64; DAILY_FEATURES]>,
}

impl StockHistory {
    /// The `lookback` rows strictly before `day`, if that many exist.
    fn window(&self, day: i64, lookback: usize) -> Option<Matrix> {
        let end = self.days.partition_point(|&d| d < day);
        if end < lookback {
            return None;
        }
        let data = self.rows[end - lookback..end].concat();
        Some(Matrix::from_vec(lookback, DAILY_FEATURES, data).expect("sized"))
    }
}

/// Assembles one [`DayBatch`] per day that has at least one curb event with
/// full history. `daily` must be sorted by `(stock_id, day)`.
pub fn build_windows(
    daily: &[DailyBar],
    events: &[(CurbEvent, IndicatorVector)],
    universe: &Universe,
    lookback: usize,
) -> Result<Dataset> {
    if lookback == 0 {
        return Err(Error::Config("lookback must be at least 1".into()));
    }
    let mut histories: Vec<StockHistory> = (0..universe.len())
        .map(|_| StockHistory {
            days: Vec::new(),
            rows: Vec::new(),
        })
        .collect();
    let mut prev: Option<&DailyBar> = None;
    for bar in daily {
        let node = universe
            .node_of(&bar.stock_id)
            .ok_or_else(|| Error::Data(format!("stock {} is not in the universe", bar.stock_id)))?;
        let prev_close = prev
            .filter(|p| p.stock_id == bar.stock_id)
            .map(|p| p.close);
        let h = &mut histories[node];
        h.days.push(bar.day);
        h.rows.push(daily_feature_row(bar, prev_close));
        prev = Some(bar);
    }

    let mut by_day: BTreeMap<i64, HashMap<usize, (&CurbEvent, &IndicatorVector)>> = BTreeMap::new();
    let mut skipped_events = 0;
    for (ev, ind) in events {
        let node = universe
            .node_of(&ev.stock_id)
            .ok_or_else(|| Error::Data(format!("stock {} is not in the universe", ev.stock_id)))?;
        let h = &histories[node];
        if h.days.partition_point(|&d| d < ev.day) < lookback {
            skipped_events += 1;
            continue;
        }
        by_day.entry(ev.day).or_default().insert(node, (ev, ind));
    }

    let mut missing_history = 0;
    let days = by_day
        .into_iter()
        .map(|(day, curb)| {
            let windows = histories
                .iter()
                .enumerate()
                .map(|(node, h)| {
                    let Some(features) = h.window(day, lookback) else {
                        missing_history += 1;
                        return None;
                    };
                    let event = curb.get(&node);
                    Some(SampleWindow {
                        stock_id: universe.stocks[node].clone(),
                        day,
                        features,
                        indicators: event.map(|(_, ind)| **ind),
                        label: event.map(|(ev, _)| ev.label),
                        node_index: node,
                    })
                })
                .collect();
            DayBatch { day, windows }
        })
        .collect();

    Ok(Dataset {
        lookback,
        universe: universe.clone(),
        days,
        skipped_events,
        missing_history,
        normalization: None,
    })
}

impl Dataset {
    pub fn split(&self, train_frac: f64, val_frac: f64) -> Result<SplitPlan> {
        temporal_split(self.days.len(), train_frac, val_frac)
    }

    /// Z-scores features and indicators with statistics from the training days only.
    pub fn normalize(&mut self, plan: &SplitPlan) -> Result<()> {
        if self.normalization.is_some() {
            return Err(Error::Contract("dataset is already normalized".into()));
        }
        let stats = Normalization::fit(&self.days[plan.train.clone()])?;
        for w in self.days.iter_mut().flat_map(|d| d.windows.iter_mut().flatten()) {
            stats.apply(w);
        }
        self.normalization = Some(stats);
        Ok(())
    }

    pub fn days_in(&self, plan: &SplitPlan, split: Split) -> &[DayBatch] {
        &self.days[plan.range(split)]
    }

    pub fn curb_sample_count(&self) -> usize {
        self.days.iter().map(|d| d.curb_samples().count()).sum()
    }
}
