//! Synthetic limit-price market with a planted industry-relational label signal.
//!
//! Daily log-returns follow a factor model: a market factor, a per-industry
//! factor built from a persistent AR(1) regime plus transient noise, and
//! idiosyncratic noise. Surge days push a stock to the upper curb; the surge
//! probability rises with the industry regime. Whether a surged stock seals
//! at the curb depends on the same-day industry factor, the mean same-day
//! return of its industry peers, and how early it touched, so a classifier
//! that pools peer history has a strictly better view of the label than one
//! that only sees the stock itself.
//!
//! Each stock draws from its own ChaCha stream keyed by `(seed, stock index)`,
//! so output depends only on the configuration.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::types::{round_to_tick, CurbRule, DailyBar, MinuteBar};
use crate::autodiff::sigmoid;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n_stocks: usize,
    pub n_industries: usize,
    pub n_days: usize,
    pub minutes_per_day: u32,
    pub limit_rate: f64,
    pub tick: f64,
    /// Daily std of the market factor.
    pub market_vol: f64,
    /// Stationary std of each industry's persistent regime.
    pub industry_regime_vol: f64,
    /// AR(1) coefficient of the industry regime.
    pub industry_regime_persistence: f64,
    /// Daily std of the transient part of the industry factor.
    pub industry_noise_vol: f64,
    /// Daily std of idiosyncratic returns.
    pub idio_vol: f64,
    /// Baseline probability that a stock surges to the curb on a given day.
    pub surge_rate: f64,
    /// Surge log-odds per standardized unit of industry regime.
    pub surge_regime_loading: f64,
    /// Seal log-odds per standardized unit of same-day industry factor.
    pub seal_industry_loading: f64,
    /// Seal log-odds per standardized unit of mean same-day peer return.
    pub seal_peer_loading: f64,
    /// Seal log-odds gained by touching at the open versus mid-session.
    pub seal_timing_loading: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_stocks: 200,
            n_industries: 20,
            n_days: 500,
            minutes_per_day: 240,
            limit_rate: 0.10,
            tick: 0.01,
            market_vol: 0.01,
            industry_regime_vol: 0.008,
            industry_regime_persistence: 0.95,
            industry_noise_vol: 0.004,
            idio_vol: 0.02,
            surge_rate: 0.04,
            surge_regime_loading: 0.5,
            seal_industry_loading: 3.0,
            seal_peer_loading: 1.0,
            seal_timing_loading: 0.5,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn rule(&self) -> CurbRule {
        CurbRule {
            limit_rate: self.limit_rate,
            tick: self.tick,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_industries == 0 || self.n_stocks < 2 * self.n_industries {
            return fail(format!(
                "need at least 2 stocks per industry ({} stocks, {} industries)",
                self.n_stocks, self.n_industries
            ));
        }
        if !(self.limit_rate > 0.0 && self.limit_rate <= 0.2) {
            return fail(format!("limit_rate {} outside (0, 0.2]", self.limit_rate));
        }
        if !(self.tick > 0.0) {
            return fail("tick must be positive".into());
        }
        if self.n_days < 2 {
            return fail("need at least 2 days".into());
        }
        if self.minutes_per_day < 16 {
            return fail("minutes_per_day must be at least 16".into());
        }
        if !(0.0..1.0).contains(&self.industry_regime_persistence) {
            return fail("industry_regime_persistence must be in [0, 1)".into());
        }
        if !(self.surge_rate > 0.0 && self.surge_rate < 1.0) {
            return fail("surge_rate must be in (0, 1)".into());
        }
        let vols = [
            self.market_vol,
            self.industry_regime_vol,
            self.industry_noise_vol,
            self.idio_vol,
        ];
        if vols.iter().any(|v| !(*v >= 0.0)) {
            return fail("volatilities must be non-negative".into());
        }
        Ok(())
    }

    fn stock_id(&self, i: usize) -> String {
        let width = (self.n_stocks.saturating_sub(1)).to_string().len().max(3);
        format!("S{i:0width$}")
    }

    fn industry_id(&self, k: usize) -> String {
        let width = (self.n_industries.saturating_sub(1)).to_string().len().max(2);
        format!("IND{k:0width$}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticMarket {
    pub daily: Vec<DailyBar>,
    pub minute: Vec<MinuteBar>,
    pub industries: BTreeMap<String, String>,
    /// Ground truth: same-day industry factor, indexed `[industry][day]`.
    pub industry_factor: Vec<Vec<f64>>,
    /// Ground truth: industry index of each stock, in stock order.
    pub industry_of: Vec<usize>,
}

const STREAM_FACTORS: u64 = 0;
const STREAM_STOCK: u64 = 1 << 32;
const STREAM_MINUTES: u64 = 2 << 32;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Random draws for one stock-day, fixed before any label is assigned.
#[derive(Clone, Copy)]
struct DayDraw {
    latent_return: f64,
    surge: bool,
    touch_minute: u32,
    seal_uniform: f64,
    fallback: f64,
    gap: f64,
    high_excursion: f64,
    low_excursion: f64,
    turnover: f64,
}

struct StockDraws {
    start_price: f64,
    float_shares: f64,
    days: Vec<DayDraw>,
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SyntheticMarket> {
    cfg.validate()?;
    let (n, k, days) = (cfg.n_stocks, cfg.n_industries, cfg.n_days);
    let industry_of: Vec<usize> = (0..n).map(|i| i % k).collect();

    // Market factor and industry regimes.
    let mut rng = stream(cfg.seed, STREAM_FACTORS);
    let market: Vec<f64> = (0..days).map(|_| cfg.market_vol * normal(&mut rng)).collect();
    let phi = cfg.industry_regime_persistence;
    let innovation = cfg.industry_regime_vol * (1.0 - phi * phi).sqrt();
    let mut regime = vec![vec![0.0; days]; k];
    let mut factor = vec![vec![0.0; days]; k];
    for ind in 0..k {
        let mut r = cfg.industry_regime_vol * normal(&mut rng);
        for t in 0..days {
            if t > 0 {
                r = phi * r + innovation * normal(&mut rng);
            }
            regime[ind][t] = r;
            factor[ind][t] = r + cfg.industry_noise_vol * normal(&mut rng);
        }
    }
    let regime_std = cfg.industry_regime_vol.max(1e-12);
    let factor_std = (cfg.industry_regime_vol.powi(2) + cfg.industry_noise_vol.powi(2))
        .sqrt()
        .max(1e-12);

    // Per-stock draws.
    let surge_logit = (cfg.surge_rate / (1.0 - cfg.surge_rate)).ln();
    let mpd = cfg.minutes_per_day;
    let draws: Vec<StockDraws> = (0..n)
        .map(|i| {
            let mut rng = stream(cfg.seed, STREAM_STOCK + i as u64);
            let ind = industry_of[i];
            let beta_m = rng.random_range(0.8..1.2);
            let beta_i = rng.random_range(0.8..1.2);
            let start_price = round_to_tick((rng.random_range(5f64.ln()..50f64.ln())).exp(), cfg.tick);
            let float_shares = rng.random_range(5e7..5e8_f64).round();
            let base_turnover: f64 = rng.random_range(0.005..0.02);
            let days = (0..days)
                .map(|t| {
                    let latent_return = beta_m * market[t]
                        + beta_i * factor[ind][t]
                        + cfg.idio_vol * normal(&mut rng);
                    let p_surge =
                        sigmoid(surge_logit + cfg.surge_regime_loading * regime[ind][t] / regime_std);
                    let surge = t > 0 && rng.random::<f64>() < p_surge;
                    let lo = (mpd / 48).max(1);
                    let hi = mpd - (mpd / 24).max(2);
                    DayDraw {
                        latent_return,
                        surge,
                        touch_minute: rng.random_range(lo..hi),
                        seal_uniform: rng.random(),
                        fallback: rng.random_range(0.01..0.06),
                        gap: 0.3 * cfg.idio_vol * normal(&mut rng),
                        high_excursion: 0.3 * cfg.idio_vol * normal(&mut rng).abs(),
                        low_excursion: 0.3 * cfg.idio_vol * normal(&mut rng).abs(),
                        turnover: base_turnover
                            * (0.3 * normal(&mut rng)).exp()
                            * if surge { 3.0 } else { 1.0 },
                    }
                })
                .collect();
            StockDraws {
                start_price,
                float_shares,
                days,
            }
        })
        .collect();

    // Peer mean of latent same-day returns, excluding the stock itself.
    let mut industry_sum = vec![vec![0.0; days]; k];
    let mut industry_count = vec![0usize; k];
    for (i, d) in draws.iter().enumerate() {
        industry_count[industry_of[i]] += 1;
        for (acc, day) in industry_sum[industry_of[i]].iter_mut().zip(&d.days) {
            *acc += day.latent_return;
        }
    }
    let peer_mean = |i: usize, t: usize| {
        let ind = industry_of[i];
        (industry_sum[ind][t] - draws[i].days[t].latent_return) / (industry_count[ind] - 1) as f64
    };
    let mut peer_stats = (0.0, 0.0, 0usize);
    for i in 0..n {
        for t in 0..days {
            let p = peer_mean(i, t);
            peer_stats.0 += p;
            peer_stats.1 += p * p;
            peer_stats.2 += 1;
        }
    }
    let peer_mu = peer_stats.0 / peer_stats.2 as f64;
    let peer_sd = (peer_stats.1 / peer_stats.2 as f64 - peer_mu * peer_mu).sqrt().max(1e-12);

    // Seal logits for every surge, then an offset putting the mean seal
    // probability at one half.
    let mut surge_logits: Vec<(usize, usize, f64)> = Vec::new();
    for (i, d) in draws.iter().enumerate() {
        for (t, day) in d.days.iter().enumerate().filter(|(_, day)| day.surge) {
            let timing = 1.0 - 2.0 * f64::from(day.touch_minute) / f64::from(mpd);
            let z = cfg.seal_industry_loading * factor[industry_of[i]][t] / factor_std
                + cfg.seal_peer_loading * (peer_mean(i, t) - peer_mu) / peer_sd
                + cfg.seal_timing_loading * timing;
            surge_logits.push((i, t, z));
        }
    }
    if surge_logits.is_empty() {
        return Err(Error::Config(
            "configuration produced no curb events; increase surge_rate or factor variance".into(),
        ));
    }
    let offset = balance_offset(surge_logits.iter().map(|s| s.2));
    let mut sealed = vec![vec![false; days]; n];
    for &(i, t, z) in &surge_logits {
        sealed[i][t] = draws[i].days[t].seal_uniform < sigmoid(z - offset);
    }

    // Price paths.
    let rule = cfg.rule();
    let mut daily = Vec::with_capacity(n * days);
    let mut minute = Vec::new();
    let mut industries = BTreeMap::new();
    for (i, d) in draws.iter().enumerate() {
        let stock_id = cfg.stock_id(i);
        industries.insert(stock_id.clone(), cfg.industry_id(industry_of[i]));
        let mut path_rng = stream(cfg.seed, STREAM_MINUTES + i as u64);
        let mut prev_close = d.start_price;
        for (t, day) in d.days.iter().enumerate() {
            let bar = if day.surge {
                let (bar, bars) = surge_day(
                    cfg,
                    &rule,
                    &stock_id,
                    t as i64,
                    prev_close,
                    d.float_shares,
                    day,
                    sealed[i][t],
                    &mut path_rng,
                );
                minute.extend(bars);
                bar
            } else {
                quiet_day(cfg, &rule, &stock_id, t as i64, prev_close, d.float_shares, day)
            };
            prev_close = bar.close;
            daily.push(bar);
        }
    }

    Ok(SyntheticMarket {
        daily,
        minute,
        industries,
        industry_factor: factor,
        industry_of,
    })
}

/// Offset `c` with `mean(sigmoid(z - c)) = 1/2`, by bisection.
fn balance_offset(logits: impl Iterator<Item = f64> + Clone) -> f64 {
    let count = logits.clone().count() as f64;
    let mean_p = |c: f64| logits.clone().map(|z| sigmoid(z - c)).sum::<f64>() / count;
    let (mut lo, mut hi) = (-50.0, 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_p(mid) > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn quiet_day(
    cfg: &SynthConfig,
    rule: &CurbRule,
    stock_id: &str,
    day: i64,
    prev_close: f64,
    float_shares: f64,
    draw: &DayDraw,
) -> DailyBar {
    let up = rule.curb_price(prev_close);
    let down = rule.floor_price(prev_close).max(cfg.tick);
    let ceiling = round_to_tick(up - cfg.tick, cfg.tick);
    let clamp = |p: f64| round_to_tick(p, cfg.tick).clamp(down, ceiling);
    let close = clamp(prev_close * draw.latent_return.exp());
    let open = clamp(prev_close * draw.gap.exp());
    let high = clamp(open.max(close) * draw.high_excursion.exp()).max(open.max(close));
    let low = clamp(open.min(close) * (-draw.low_excursion).exp()).min(open.min(close));
    DailyBar {
        stock_id: stock_id.to_string(),
        day,
        open,
        high,
        low,
        close,
        volume: (float_shares * draw.turnover).round(),
        float_shares,
    }
}

/// A day that touches the upper curb at `draw.touch_minute`, with minute bars
/// from Brownian bridges: open → curb before the touch, then either pinned at
/// the curb (sealed) or bridged down to the fallback close.
#[allow(clippy::too_many_arguments)]
fn surge_day(
    cfg: &SynthConfig,
    rule: &CurbRule,
    stock_id: &str,
    day: i64,
    prev_close: f64,
    float_shares: f64,
    draw: &DayDraw,
    sealed: bool,
    rng: &mut ChaCha8Rng,
) -> (DailyBar, Vec<MinuteBar>) {
    let tick = cfg.tick;
    let mpd = cfg.minutes_per_day as usize;
    let up = rule.curb_price(prev_close);
    let down = rule.floor_price(prev_close).max(tick);
    let below = round_to_tick(up - tick, tick);
    let open = round_to_tick(prev_close * draw.gap.exp(), tick).clamp(down, below);
    let close = if sealed {
        up
    } else {
        round_to_tick(up * (1.0 - draw.fallback), tick).clamp(down, below)
    };
    let k = draw.touch_minute as usize;
    let step = 1.5 * cfg.idio_vol / (mpd as f64).sqrt();

    // points[j] is the open of minute j; points[j + 1] its close.
    let mut points = vec![0.0; mpd + 1];
    points[0] = open;
    let pre = log_bridge(open, up, k + 1, step, rng);
    for j in 1..=k {
        points[j] = round_to_tick(pre[j], tick).clamp(down, below);
    }
    points[k + 1] = up;
    if sealed {
        for p in points.iter_mut().take(mpd).skip(k + 2) {
            let dip = if rng.random::<f64>() < 0.2 {
                rng.random_range(1..4) as f64
            } else {
                0.0
            };
            *p = round_to_tick(up - dip * tick, tick);
        }
    } else {
        let post = log_bridge(up, close, mpd - k - 1, step, rng);
        for (off, p) in post.iter().enumerate().take(mpd - k - 1).skip(1) {
            points[k + 1 + off] = round_to_tick(*p, tick).clamp(down, up);
        }
    }
    points[mpd] = close;

    let weights: Vec<f64> = (0..mpd).map(|_| 0.5 + rng.random::<f64>()).collect();
    let total_w: f64 = weights.iter().sum();
    let day_volume = float_shares * draw.turnover;

    let mut bars = Vec::with_capacity(mpd);
    for j in 0..mpd {
        let (o, c) = (points[j], points[j + 1]);
        let cap = if j < k { below } else { up };
        let wiggle = |rng: &mut ChaCha8Rng| round_to_tick(rng.random::<f64>() * 2.0, 1.0) * tick;
        let high = round_to_tick(o.max(c) + wiggle(rng), tick).min(cap).max(o.max(c));
        let low = round_to_tick(o.min(c) - wiggle(rng), tick).max(down).min(o.min(c));
        bars.push(MinuteBar {
            stock_id: stock_id.to_string(),
            day,
            minute: j as u32,
            open: o,
            high,
            low,
            close: c,
            volume: (day_volume * weights[j] / total_w).round(),
        });
    }
    let bar = DailyBar {
        stock_id: stock_id.to_string(),
        day,
        open,
        high: up,
        low: bars.iter().map(|b| b.low).fold(f64::INFINITY, f64::min),
        close,
        volume: bars.iter().map(|b| b.volume).sum(),
        float_shares,
    };
    (bar, bars)
}

/// Brownian bridge in log-price from `a` to `b` over `steps` increments;
/// returns `steps + 1` prices including both ends.
fn log_bridge(a: f64, b: f64, steps: usize, step_sd: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut walk = vec![0.0; steps + 1];
    for j in 1..=steps {
        walk[j] = walk[j - 1] + step_sd * normal(rng);
    }
    let (la, lb) = (a.ln(), b.ln());
    let end = walk[steps];
    (0..=steps)
        .map(|j| {
            let s = j as f64 / steps as f64;
            (la + s * (lb - la) + walk[j] - s * end).exp()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            n_stocks: 12,
            n_industries: 3,
            n_days: 60,
            ..Default::default()
        }
    }

    #[test]
    fn same_seed_same_market() {
        let a = generate_synthetic(&small()).unwrap();
        let b = generate_synthetic(&small()).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&SynthConfig { seed: 8, ..small() }).unwrap();
        assert_ne!(a.daily, c.daily);
    }

    #[test]
    fn bars_are_valid_and_sorted() {
        let m = generate_synthetic(&small()).unwrap();
        assert_eq!(m.daily.len(), 12 * 60);
        for b in &m.daily {
            b.validate().unwrap();
        }
        for b in &m.minute {
            b.validate().unwrap();
        }
        assert!(m
            .daily
            .windows(2)
            .all(|w| (&w[0].stock_id, w[0].day) < (&w[1].stock_id, w[1].day)));
    }

    #[test]
    fn rejects_single_stock_industries() {
        let cfg = SynthConfig {
            n_stocks: 5,
            n_industries: 3,
            ..Default::default()
        };
        assert!(matches!(generate_synthetic(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_configs_without_events() {
        let cfg = SynthConfig {
            n_days: 100,
            surge_rate: 1e-12,
            surge_regime_loading: 0.0,
            ..small()
        };
        let err = generate_synthetic(&cfg).unwrap_err().to_string();
        assert!(err.contains("no curb events"), "{err}");
    }

    #[test]
    fn bridge_hits_both_ends() {
        let mut rng = stream(1, 0);
        let b = log_bridge(10.0, 11.0, 20, 0.01, &mut rng);
        assert_eq!(b.len(), 21);
        assert!((b[0] - 10.0).abs() < 1e-12 && (b[20] - 11.0).abs() < 1e-12);
    }

    #[test]
    fn balance_offset_centres_probabilities() {
        let z = [0.3, 1.5, 2.0, -0.2, 4.0];
        let c = balance_offset(z.iter().copied());
        let mean: f64 = z.iter().map(|&x| sigmoid(x - c)).sum::<f64>() / 5.0;
        assert!((mean - 0.5).abs() < 1e-12);
    }
}
