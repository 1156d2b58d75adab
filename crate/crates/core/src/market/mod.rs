//! Market data: bar types, CSV ingestion, curb events and indicators,
//! lookback windows, and the synthetic generator.

mod curb;
mod dataset;
mod io;
mod synth;
mod types;

pub use curb::{compute_curb_indicators, curb_samples, detect_curb_events, index_minutes, MinuteIndex};
pub use dataset::{
    build_windows, daily_feature_row, temporal_split, Dataset, DayBatch, Normalization, SampleWindow,
    Split, SplitPlan, Universe,
};
pub use io::{
    check_industry_coverage, load_daily_csv, load_industry_csv, load_minute_csv, read_daily,
    read_industry, read_minute, write_daily, write_industry, write_minute, DAILY_HEADER,
    INDUSTRY_HEADER, MINUTE_HEADER,
};
pub use synth::{generate_synthetic, SynthConfig, SyntheticMarket};
pub use types::{
    round_to_tick, CurbEvent, CurbRule, CurbType, DailyBar, IndicatorVector, MinuteBar,
    DAILY_FEATURES, INDICATOR_COUNT,
};
