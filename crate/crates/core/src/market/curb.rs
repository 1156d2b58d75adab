//! Curb-event detection and the minute-level curb indicators.

use std::collections::BTreeMap;

use super::types::{CurbEvent, CurbRule, DailyBar, IndicatorVector, MinuteBar};
use crate::error::{Error, Result};

/// Minute bars grouped by `(stock_id, day)`, each group sorted by minute.
pub type MinuteIndex = BTreeMap<(String, i64), Vec<MinuteBar>>;

pub fn index_minutes(minutes: &[MinuteBar]) -> MinuteIndex {
    let mut index: MinuteIndex = BTreeMap::new();
    for m in minutes {
        index
            .entry((m.stock_id.clone(), m.day))
            .or_default()
            .push(m.clone());
    }
    for group in index.values_mut() {
        group.sort_by_key(|m| m.minute);
    }
    index
}

/// Emits one event per stock-day whose high reaches the curb price implied
/// by the previous bar's close. `daily` must be sorted by `(stock_id, day)`.
pub fn detect_curb_events(
    daily: &[DailyBar],
    minutes: &MinuteIndex,
    rule: CurbRule,
) -> Result<Vec<CurbEvent>> {
    let mut events = Vec::new();
    for pair in daily.windows(2) {
        let (prev, bar) = (&pair[0], &pair[1]);
        if prev.stock_id != bar.stock_id {
            continue;
        }
        let curb_price = rule.curb_price(prev.close);
        if !rule.touches(bar.high, curb_price) {
            continue;
        }
        let group = minutes
            .get(&(bar.stock_id.clone(), bar.day))
            .ok_or_else(|| {
                Error::Data(format!(
                    "no minute data for curb event ({}, {})",
                    bar.stock_id, bar.day
                ))
            })?;
        let touched = group
            .iter()
            .find(|m| rule.touches(m.high, curb_price))
            .ok_or_else(|| {
                Error::Data(format!(
                    "minute data for ({}, {}) never reaches curb price {curb_price}",
                    bar.stock_id, bar.day
                ))
            })?;
        events.push(CurbEvent {
            stock_id: bar.stock_id.clone(),
            day: bar.day,
            prev_close: prev.close,
            curb_price,
            touched_minute: touched.minute,
            label: u8::from(rule.at_curb(bar.close, curb_price)),
        });
    }
    Ok(events)
}

/// Indicators as of `touched_minute`, using only bars at or before it.
/// Windows shorter than `ma_window` near the open are truncated rather than
/// rejected.
pub fn compute_curb_indicators(
    bars: &[MinuteBar],
    touched_minute: u32,
    prev_close: f64,
    float_shares: f64,
    ma_window: usize,
) -> Result<IndicatorVector> {
    let seen: Vec<&MinuteBar> = bars.iter().filter(|b| b.minute <= touched_minute).collect();
    let Some(last) = seen.last() else {
        return Err(Error::Data(format!(
            "no minute bars at or before minute {touched_minute}"
        )));
    };
    if ma_window == 0 {
        return Err(Error::Config("ma_window must be at least 1".into()));
    }
    let m = seen.len() - 1;
    let close = last.close;
    let start = (m + 1).saturating_sub(ma_window);
    let ma = seen[start..].iter().map(|b| b.close).sum::<f64>() / (m + 1 - start) as f64;
    let reference = seen[m.saturating_sub(ma_window)].close;
    if ma == 0.0 || reference == 0.0 || prev_close == 0.0 {
        return Err(Error::Data("zero reference price in indicator window".into()));
    }
    let volume: f64 = seen.iter().map(|b| b.volume).sum();
    let high = seen.iter().map(|b| b.high).fold(f64::NEG_INFINITY, f64::max);
    let low = seen.iter().map(|b| b.low).fold(f64::INFINITY, f64::min);

    Ok(IndicatorVector {
        moving_average_ratio: close / ma - 1.0,
        rate_of_change: (close - reference) / reference,
        turnover_rate: volume / float_shares,
        amplitude: (high - low) / prev_close,
        deviation_rate: (close - ma) / ma,
    })
}

/// Curb events joined with their indicator vectors.
pub fn curb_samples(
    daily: &[DailyBar],
    minutes: &MinuteIndex,
    rule: CurbRule,
    ma_window: usize,
) -> Result<Vec<(CurbEvent, IndicatorVector)>> {
    let float_of: BTreeMap<(&str, i64), f64> = daily
        .iter()
        .map(|b| ((b.stock_id.as_str(), b.day), b.float_shares))
        .collect();
    detect_curb_events(daily, minutes, rule)?
        .into_iter()
        .map(|ev| {
            let bars = &minutes[&(ev.stock_id.clone(), ev.day)];
            let float_shares = float_of[&(ev.stock_id.as_str(), ev.day)];
            let ind =
                compute_curb_indicators(bars, ev.touched_minute, ev.prev_close, float_shares, ma_window)?;
            Ok((ev, ind))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(stock: &str, day: i64, high: f64, close: f64) -> DailyBar {
        DailyBar {
            stock_id: stock.into(),
            day,
            open: close.min(high),
            high,
            low: close.min(high) * 0.95,
            close,
            volume: 1000.0,
            float_shares: 1e6,
        }
    }

    fn minute(m: u32, price: f64, volume: f64) -> MinuteBar {
        MinuteBar {
            stock_id: "S".into(),
            day: 1,
            minute: m,
            open: price,
            high: price,
            low: price,
            close: price,
            volume,
        }
    }

    fn minutes_reaching(high: f64) -> MinuteIndex {
        let mut idx = MinuteIndex::new();
        idx.insert(
            ("S".into(), 1),
            vec![minute(0, 10.2, 1.0), minute(1, 10.6, 1.0), minute(2, high, 1.0)],
        );
        idx
    }

    #[test]
    fn sealed_event_is_type_one() {
        let daily = [day("S", 0, 10.0, 10.0), day("S", 1, 11.0, 11.0)];
        let ev = detect_curb_events(&daily, &minutes_reaching(11.0), CurbRule::default()).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].label, 1);
        assert_eq!(ev[0].touched_minute, 2);
        assert_eq!(ev[0].curb_price, 11.0);
    }

    #[test]
    fn fell_back_event_is_type_two() {
        let daily = [day("S", 0, 10.0, 10.0), day("S", 1, 11.0, 10.5)];
        let ev = detect_curb_events(&daily, &minutes_reaching(11.0), CurbRule::default()).unwrap();
        assert_eq!(ev[0].label, 0);
    }

    #[test]
    fn never_touched_is_no_event() {
        let daily = [day("S", 0, 10.0, 10.0), day("S", 1, 10.8, 10.8)];
        let ev = detect_curb_events(&daily, &MinuteIndex::new(), CurbRule::default()).unwrap();
        assert!(ev.is_empty());
    }

    #[test]
    fn first_day_never_emits() {
        let daily = [day("S", 0, 50.0, 50.0)];
        assert!(detect_curb_events(&daily, &MinuteIndex::new(), CurbRule::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn missing_minutes_name_the_stock_day() {
        let daily = [day("S", 0, 10.0, 10.0), day("S", 1, 11.0, 11.0)];
        let err = detect_curb_events(&daily, &MinuteIndex::new(), CurbRule::default())
            .unwrap_err()
            .to_string();
        assert!(err.contains("(S, 1)"), "{err}");
    }

    #[test]
    fn flat_path_gives_zero_indicators() {
        let bars: Vec<_> = (0..20).map(|m| minute(m, 7.5, 0.0)).collect();
        let ind = compute_curb_indicators(&bars, 12, 7.5, 1e6, 5).unwrap();
        assert_eq!(ind.to_array(), [0.0; 5]);
    }

    #[test]
    fn rate_of_change_against_first_when_window_covers_all() {
        let w = 5;
        let mut bars: Vec<_> = (0..w as u32 - 1).map(|m| minute(m, 100.0, 1.0)).collect();
        bars.push(minute(w as u32 - 1, 110.0, 1.0));
        let ind = compute_curb_indicators(&bars, w as u32 - 1, 100.0, 1e6, w).unwrap();
        assert!((ind.rate_of_change - 0.10).abs() < 1e-12);
    }

    #[test]
    fn zero_prices_are_rejected() {
        let bars = vec![minute(0, 0.0, 1.0)];
        assert!(compute_curb_indicators(&bars, 0, 1.0, 1.0, 5).is_err());
    }
}
