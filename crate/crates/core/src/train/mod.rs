//! Loss, optimizer, training loop, metrics and the multi-seed runner.

mod experiment;
mod metrics;
mod optim;
mod trainer;

pub use experiment::{
    aggregate, aggregate_groups, format_table, group_test_metrics, multi_seed_experiment, run_one,
    write_aggregate_csv, write_loss_curve, write_results_csv, AggregateRow, RunRecord, SeedMetrics,
    AGGREGATE_HEADER, LOSS_CURVE_HEADER, RESULTS_HEADER,
};
pub use metrics::{mean_std, predict, Confusion};
pub use optim::{global_norm, Adam, AdamConfig};
pub use trainer::{
    evaluate, train, train_epoch, EpochStats, Evaluation, PreparedData, TrainConfig, TrainOutcome,
};
