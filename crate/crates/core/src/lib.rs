//! Hierarchical graph neural network for predicting whether a stock that
//! touched its daily price limit closes there, with the baselines, a
//! synthetic limit-price market and an experiment harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod cli;
pub mod config;
pub mod error;
pub mod fsio;
pub mod gradsuite;
pub mod graph;
pub mod market;
pub mod model;
pub mod train;

pub use error::{Error, Result};
