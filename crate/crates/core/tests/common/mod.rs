#![allow(dead_code)]

use std::sync::OnceLock;

use hgnn::config::DataConfig;
use hgnn::market::{generate_synthetic, SynthConfig, SyntheticMarket};
use hgnn::model::HgnnConfig;
use hgnn::train::PreparedData;

pub fn small_synth() -> SynthConfig {
    SynthConfig {
        n_stocks: 40,
        n_industries: 5,
        n_days: 160,
        minutes_per_day: 60,
        ..SynthConfig::default()
    }
}

pub fn small_market() -> &'static SyntheticMarket {
    static M: OnceLock<SyntheticMarket> = OnceLock::new();
    M.get_or_init(|| generate_synthetic(&small_synth()).unwrap())
}

pub fn small_data() -> &'static PreparedData {
    static D: OnceLock<PreparedData> = OnceLock::new();
    D.get_or_init(|| {
        PreparedData::from_synthetic(small_market(), &DataConfig::default(), HgnnConfig::default().lookback).unwrap()
    })
}

pub fn default_data() -> &'static PreparedData {
    static D: OnceLock<PreparedData> = OnceLock::new();
    D.get_or_init(|| {
        let market = generate_synthetic(&SynthConfig::default()).unwrap();
        PreparedData::from_synthetic(&market, &DataConfig::default(), HgnnConfig::default().lookback).unwrap()
    })
}
