// The model/preset by seed grid on a small market, aggregated into a
// mean±std table.

use hgnn::config::{DataConfig, RunSelection};
use hgnn::market::{generate_synthetic, SynthConfig};
use hgnn::model::HgnnConfig;
use hgnn::train::{aggregate, format_table, multi_seed_experiment, PreparedData, TrainConfig};

pub fn run() -> hgnn::Result<()> {
    let market = generate_synthetic(&SynthConfig {
        n_stocks: 40,
        n_industries: 4,
        n_days: 140,
        seed: 8,
        ..SynthConfig::default()
    })?;
    let model = HgnnConfig::default();
    let data = PreparedData::from_synthetic(&market, &DataConfig::default(), model.lookback)?;
    let cfg = TrainConfig {
        epochs: 3,
        seeds: vec![1, 2],
        ..TrainConfig::default()
    };
    let records = multi_seed_experiment(&RunSelection::default_grid(), &model, &data, &cfg, 2)?;
    for r in &records {
        println!("{:<26} {:>5} params  test acc {:.3}", r.slug(), r.parameter_count, r.test.accuracy);
    }
    let (rows, warnings) = aggregate(&records);
    for w in warnings {
        eprintln!("warning: {w}");
    }
    print!("{}", format_table(&rows));
    Ok(())
}

#[allow(dead_code)]
fn main() -> hgnn::Result<()> {
    run()
}
