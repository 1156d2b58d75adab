mod common;

use hgnn::autodiff::{Matrix, Tape};
use hgnn::config::RunSelection;
use hgnn::market::Split;
use hgnn::model::{HgnnConfig, Model, ModelKind, Preset};
use hgnn::train::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bce(z: f64, y: f64) -> f64 {
    let mut tape = Tape::new();
    let l = tape.leaf(Matrix::scalar(z));
    let loss = tape.bce_with_logits(l, &[y]).unwrap();
    tape.value(loss).item()
}

fn quick(epochs: usize, seeds: Vec<u64>) -> TrainConfig {
    TrainConfig {
        epochs,
        seeds,
        ..TrainConfig::default()
    }
}

fn full() -> Model {
    Model::hgnn(HgnnConfig::default()).unwrap()
}

#[test]
fn bce_reference_values() {
    assert!((bce(0.0, 1.0) - std::f64::consts::LN_2).abs() < 1e-15);
    assert!((bce(0.0, 0.0) - std::f64::consts::LN_2).abs() < 1e-15);
    assert!(bce(50.0, 1.0) <= 1e-20);
    assert!(bce(-50.0, 0.0) <= 1e-20);
    assert!((bce(-800.0, 1.0) - 800.0).abs() < 1e-9);
}

#[test]
fn training_is_deterministic() {
    let data = common::small_data();
    let cfg = quick(3, vec![4]);
    for model in [full(), Model::new(ModelKind::Logreg, HgnnConfig::default()).unwrap()] {
        let a = train(&model, data, 4, &cfg).unwrap();
        let b = train(&model, data, 4, &cfg).unwrap();
        assert!(a.params.bit_identical(&b.params));
        assert_eq!(a.history, b.history);
    }
}

#[test]
fn best_epoch_is_first_maximum_of_validation_f1() {
    let data = common::small_data();
    let cfg = TrainConfig {
        patience: 2,
        ..quick(12, vec![2])
    };
    let out = train(&full(), data, 2, &cfg).unwrap();
    let best = out.history.iter().map(|h| h.val_f1).fold(f64::NEG_INFINITY, f64::max);
    let first = out.history.iter().find(|h| h.val_f1 == best).unwrap().epoch;
    assert_eq!(out.best_epoch, first);
    assert_eq!(out.best_val_f1, best);
    if out.epochs_ran < cfg.epochs {
        assert_eq!(out.epochs_ran - out.best_epoch, cfg.patience);
    }
    let graph = Some(&data.operator);
    let val = evaluate(&full(), &out.params, data.split(Split::Val), graph).unwrap();
    assert_eq!(val.f1, out.best_val_f1);
}

#[test]
fn test_split_never_influences_the_checkpoint() {
    let data = common::small_data();
    let mut cut = data.clone();
    let end = cut.plan.val.end;
    cut.inputs.truncate(end);
    cut.plan.test = end..end;
    let cfg = quick(3, vec![5]);
    let a = train(&full(), data, 5, &cfg).unwrap();
    let b = train(&full(), &cut, 5, &cfg).unwrap();
    assert!(a.params.bit_identical(&b.params));
}

#[test]
fn one_epoch_lowers_training_loss_on_default_data() {
    let data = common::default_data();
    let model = full();
    let graph = Some(&data.operator);
    let train_days = data.split(Split::Train);
    let mut params = model.init_params(1);
    let before = evaluate(&model, &params, train_days, graph).unwrap().loss;
    let mut adam = Adam::new(AdamConfig::default());
    train_epoch(&model, &mut params, &mut adam, train_days, graph).unwrap();
    let after = evaluate(&model, &params, train_days, graph).unwrap().loss;
    assert!(after < before, "{after} >= {before}");
}

#[test]
fn hgnn_beats_majority_class_on_planted_signal() {
    let data = common::default_data();
    let labels: Vec<f64> = data.split(Split::Test).iter().flat_map(|d| d.labels.clone()).collect();
    let pos = labels.iter().filter(|&&y| y == 1.0).count() as f64 / labels.len() as f64;
    let majority = pos.max(1.0 - pos);
    let rec = run_one(&full(), data, 1, &TrainConfig::default()).unwrap();
    assert!(rec.test.accuracy >= majority + 0.15, "{} vs majority {majority}", rec.test.accuracy);
}

#[test]
fn evaluation_ignores_sample_order() {
    let data = common::small_data();
    let model = full();
    let params = model.init_params(3);
    let days = data.split(Split::Test).to_vec();
    let base = evaluate(&model, &params, &days, Some(&data.operator)).unwrap();
    let mut shuffled = days.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    let again = evaluate(&model, &params, &shuffled, Some(&data.operator)).unwrap();
    assert_eq!(base.confusion, again.confusion);
    assert_eq!(base.accuracy, again.accuracy);
    assert_eq!(base.f1, again.f1);

    let mut r = ChaCha8Rng::seed_from_u64(2);
    let mut pairs: Vec<(u8, u8)> = (0..200).map(|_| (r.random_range(0..2), r.random_range(0..2))).collect();
    let split = |p: &[(u8, u8)]| -> (Vec<u8>, Vec<u8>) { p.iter().copied().unzip() };
    let (l, p) = split(&pairs);
    let c = Confusion::from_pairs(&l, &p);
    pairs.shuffle(&mut r);
    let (l, p) = split(&pairs);
    assert_eq!(c, Confusion::from_pairs(&l, &p));
}

#[test]
fn experiment_order_does_not_depend_on_worker_count() {
    let data = common::small_data();
    let sel = [RunSelection::hgnn(Preset::NodeRelation), RunSelection::baseline(ModelKind::Logreg)];
    let cfg = quick(2, vec![1, 2]);
    let a = multi_seed_experiment(&sel, &HgnnConfig::default(), data, &cfg, 1).unwrap();
    let b = multi_seed_experiment(&sel, &HgnnConfig::default(), data, &cfg, 3).unwrap();
    let keys: Vec<_> = a.iter().map(|r| (r.model_name(), r.preset(), r.seed)).collect();
    assert_eq!(
        keys,
        vec![("hgnn", "node_relation", 1), ("hgnn", "node_relation", 2), ("logreg", "-", 1), ("logreg", "-", 2)]
    );
    for (x, y) in a.iter().zip(&b) {
        assert!(x.params.bit_identical(&y.params));
        assert_eq!(x.test, y.test);
    }
}

fn sample_mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[test]
fn aggregate_recomputes_from_persisted_results() {
    let data = common::small_data();
    let sel = [RunSelection::hgnn(Preset::NodeOnly), RunSelection::baseline(ModelKind::Lstm)];
    let cfg = quick(2, vec![1, 2, 3]);
    let records = multi_seed_experiment(&sel, &HgnnConfig::default(), data, &cfg, 2).unwrap();
    let (rows, warnings) = aggregate(&records);
    assert!(warnings.is_empty());

    let mut buf = Vec::new();
    write_results_csv(&mut buf, &records).unwrap();
    let mut reader = csv::Reader::from_reader(buf.as_slice());
    let header = reader.headers().unwrap().clone();
    assert_eq!(header.iter().collect::<Vec<_>>(), RESULTS_HEADER);
    let test_rows: Vec<csv::StringRecord> = reader
        .records()
        .map(|r| r.unwrap())
        .filter(|r| &r[3] == "test")
        .collect();
    assert_eq!(test_rows.len(), 6);
    for row in &rows {
        let pick = |col: usize| -> Vec<f64> {
            test_rows
                .iter()
                .filter(|r| r[0] == row.model && r[1] == row.preset)
                .map(|r| r[col].parse().unwrap())
                .collect()
        };
        let (am, asd) = sample_mean_std(&pick(4));
        let (fm, fsd) = sample_mean_std(&pick(5));
        assert_eq!(row.n_seeds, 3);
        assert!((am - row.acc_mean).abs() <= 1e-12 && (asd - row.acc_std).abs() <= 1e-12);
        assert!((fm - row.f1_mean).abs() <= 1e-12 && (fsd - row.f1_std).abs() <= 1e-12);
    }

    let mut agg = Vec::new();
    write_aggregate_csv(&mut agg, &rows).unwrap();
    let back: Vec<AggregateRow> = csv::Reader::from_reader(agg.as_slice())
        .deserialize()
        .map(|r| r.unwrap())
        .collect();
    for (a, b) in rows.iter().zip(&back) {
        assert!((a.acc_mean - b.acc_mean).abs() <= 1e-12 && (a.f1_std - b.f1_std).abs() <= 1e-12);
    }
}

#[test]
fn single_seed_aggregate_warns_and_reports_zero_std() {
    let groups = group_test_metrics([("hgnn", "full", 0.7, 0.6)]);
    let (rows, warnings) = aggregate_groups(&groups);
    assert_eq!(rows[0].acc_std, 0.0);
    assert_eq!(warnings.len(), 1);
}

#[test]
fn two_seed_aggregate_example() {
    let groups = group_test_metrics([("hgnn", "full", 0.7, 0.5), ("hgnn", "full", 0.8, 0.7)]);
    let (rows, _) = aggregate_groups(&groups);
    assert!((rows[0].acc_mean - 0.75).abs() < 1e-15);
    assert!((rows[0].acc_std - 0.0707106781186548).abs() < 1e-12);
    assert!((rows[0].f1_mean - 0.6).abs() < 1e-15);
}

#[test]
fn table_rounds_aggregate_to_two_decimals() {
    let groups = group_test_metrics([("hgnn", "full", 0.73456, 0.7), ("hgnn", "full", 0.74, 0.71)]);
    let (rows, _) = aggregate_groups(&groups);
    let table = format_table(&rows);
    let expected = format!("{:.2}±{:.2}", rows[0].acc_mean * 100.0, rows[0].acc_std * 100.0);
    assert!(table.contains("HGNN (full)") && table.contains(&expected), "{table}");
}
