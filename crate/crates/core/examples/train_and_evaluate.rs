// Train the full HGNN on a small synthetic market, evaluate it on the test
// split and reload it from a checkpoint.

use hgnn::config::DataConfig;
use hgnn::market::{generate_synthetic, Split, SynthConfig};
use hgnn::model::{Checkpoint, HgnnConfig, Model};
use hgnn::train::{evaluate, train, PreparedData, TrainConfig};

pub fn run() -> hgnn::Result<()> {
    let market = generate_synthetic(&SynthConfig {
        n_stocks: 60,
        n_industries: 6,
        n_days: 160,
        seed: 21,
        ..SynthConfig::default()
    })?;
    let data_cfg = DataConfig::default();
    let model = Model::hgnn(HgnnConfig::default())?;
    let data = PreparedData::from_synthetic(&market, &data_cfg, model.config.lookback)?;
    println!(
        "{} curb samples (train {}, val {}, test {})",
        data.dataset.curb_sample_count(),
        data.sample_count(Split::Train),
        data.sample_count(Split::Val),
        data.sample_count(Split::Test)
    );

    let cfg = TrainConfig {
        epochs: 5,
        learning_rate: 3e-3,
        ..TrainConfig::default()
    };
    let outcome = train(&model, &data, 1, &cfg)?;
    for h in &outcome.history {
        println!(
            "epoch {:>2}  train loss {:.4}  val loss {:.4}  val f1 {:.3}",
            h.epoch, h.train_loss, h.val_loss, h.val_f1
        );
    }
    let test = evaluate(&model, &outcome.params, data.split(Split::Test), Some(&data.operator))?;
    println!("test accuracy {:.3}, f1 {:.3}", test.accuracy, test.f1);

    let ck = Checkpoint {
        fingerprint: "example".into(),
        seed: 1,
        model: model.clone(),
        data: data_cfg,
        best_epoch: outcome.best_epoch,
        val_f1: outcome.best_val_f1,
        params: outcome.params,
    };
    let back = Checkpoint::from_json(&ck.to_json())?;
    assert!(back.params.bit_identical(&ck.params));
    let again = evaluate(&back.model, &back.params, data.split(Split::Test), Some(&data.operator))?;
    assert_eq!(again, test);
    Ok(())
}

#[allow(dead_code)]
fn main() -> hgnn::Result<()> {
    run()
}
