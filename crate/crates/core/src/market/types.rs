use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of daily features fed to the sequence encoder:
/// open, high, low, close (as log-ratios to the previous close), log volume, turnover.
pub const DAILY_FEATURES: usize = 6;

/// Number of curb indicators computed from minute data.
pub const INDICATOR_COUNT: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DailyBar {
    pub stock_id: String,
    pub day: i64,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
    pub float_shares: f64,
}

impl DailyBar {
    pub fn validate(&self) -> Result<()> {
        check_ohlc(self.open, self.high, self.low, self.close)?;
        if !(self.volume >= 0.0) {
            return Err(Error::Data(format!("negative volume {}", self.volume)));
        }
        if !(self.float_shares > 0.0) {
            return Err(Error::Data(format!(
                "float_shares must be positive, got {}",
                self.float_shares
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinuteBar {
    pub stock_id: String,
    pub day: i64,
    pub minute: u32,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl MinuteBar {
    pub fn validate(&self) -> Result<()> {
        check_ohlc(self.open, self.high, self.low, self.close)?;
        if !(self.volume >= 0.0) {
            return Err(Error::Data(format!("negative volume {}", self.volume)));
        }
        Ok(())
    }
}

fn check_ohlc(open: f64, high: f64, low: f64, close: f64) -> Result<()> {
    let finite = [open, high, low, close].iter().all(|x| x.is_finite());
    if !finite || !(low <= open.min(close) && open.max(close) <= high) || low <= 0.0 {
        return Err(Error::Data(format!(
            "price ordering violated: open {open}, high {high}, low {low}, close {close}"
        )));
    }
    Ok(())
}

/// Type I (sealed at the curb) or Type II (fell back).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurbType {
    Sealed,
    FellBack,
}

impl CurbType {
    pub fn label(self) -> u8 {
        match self {
            CurbType::Sealed => 1,
            CurbType::FellBack => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurbEvent {
    pub stock_id: String,
    pub day: i64,
    pub prev_close: f64,
    pub curb_price: f64,
    pub touched_minute: u32,
    /// 1 = Type I (closed at the curb), 0 = Type II.
    pub label: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorVector {
    pub moving_average_ratio: f64,
    pub rate_of_change: f64,
    pub turnover_rate: f64,
    pub amplitude: f64,
    pub deviation_rate: f64,
}

impl IndicatorVector {
    pub fn to_array(&self) -> [f64; INDICATOR_COUNT] {
        [
            self.moving_average_ratio,
            self.rate_of_change,
            self.turnover_rate,
            self.amplitude,
            self.deviation_rate,
        ]
    }

    pub fn from_array(a: [f64; INDICATOR_COUNT]) -> Self {
        IndicatorVector {
            moving_average_ratio: a[0],
            rate_of_change: a[1],
            turnover_rate: a[2],
            amplitude: a[3],
            deviation_rate: a[4],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }
}

/// Price limit parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurbRule {
    pub limit_rate: f64,
    pub tick: f64,
}

impl Default for CurbRule {
    fn default() -> Self {
        CurbRule {
            limit_rate: 0.10,
            tick: 0.01,
        }
    }
}

impl CurbRule {
    pub fn curb_price(&self, prev_close: f64) -> f64 {
        round_to_tick(prev_close * (1.0 + self.limit_rate), self.tick)
    }

    pub fn floor_price(&self, prev_close: f64) -> f64 {
        round_to_tick(prev_close * (1.0 - self.limit_rate), self.tick)
    }

    pub fn touches(&self, price: f64, curb_price: f64) -> bool {
        price >= curb_price - self.tick / 2.0
    }

    pub fn at_curb(&self, close: f64, curb_price: f64) -> bool {
        (close - curb_price).abs() <= self.tick / 2.0
    }
}

/// Rounds to the nearest multiple of `tick`. When `1/tick` is an integer the
/// result is the double nearest the decimal value (e.g. exactly `11.0`).
pub fn round_to_tick(x: f64, tick: f64) -> f64 {
    let inv = (1.0 / tick).round();
    if (inv * tick - 1.0).abs() < 1e-12 {
        (x * inv).round() / inv
    } else {
        (x / tick).round() * tick
    }
}
