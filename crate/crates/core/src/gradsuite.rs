//! Finite-difference gradient suites: every differentiable tape operation
//! in isolation, then whole-model forward passes on a random toy day.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{
    grad_check, GradCheckOptions, GradCheckReport, Matrix, OpKind, ParamStore, ParamVars,
    SparseMatrix, Tape, Var,
};
use crate::error::Result;
use crate::graph::IndustryGraph;
use crate::model::{DayInput, HgnnConfig, MarketAggregand, Model, ModelKind, Preset};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub name: String,
    pub max_rel_err: f64,
    pub passed: bool,
    /// Names of the parameter arrays whose check failed.
    pub failing_params: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub step: f64,
    pub tolerance: f64,
    pub injected_fault: Option<OpKind>,
    pub entries: Vec<SuiteEntry>,
    pub passed: bool,
}

impl SuiteReport {
    pub fn failing(&self) -> impl Iterator<Item = &SuiteEntry> {
        self.entries.iter().filter(|e| !e.passed)
    }

    pub fn max_rel_err(&self) -> f64 {
        self.entries.iter().map(|e| e.max_rel_err).fold(0.0, f64::max)
    }
}

fn entry(name: &str, r: &GradCheckReport) -> SuiteEntry {
    SuiteEntry {
        name: name.to_string(),
        max_rel_err: r.max_rel_err,
        passed: r.passed,
        failing_params: r.failing().map(|p| p.name.clone()).collect(),
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Matrix::from_vec(rows, cols, data).expect("sized")
}

/// Entries bounded away from zero, for ops with a kink there.
fn away_from_zero(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    random_matrix(rng, rows, cols).map(|x| x.signum() * (0.1 + x.abs()))
}

/// Random sparse matrix with about `density` of its entries set.
pub fn random_sparse(rng: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64) -> SparseMatrix {
    let entries = (0..rows)
        .map(|_| {
            let mut row = Vec::new();
            for c in 0..cols {
                if rng.random::<f64>() < density {
                    row.push((c, rng.random_range(-1.0..1.0)));
                }
            }
            row
        })
        .collect();
    SparseMatrix::from_row_entries(cols, entries).expect("in range")
}

type OpCase = (&'static str, ParamStore, Box<dyn Fn(&mut Tape, &ParamVars) -> Result<Var>>);

/// Reduces `out` to a scalar through a fixed random projection, so every
/// output entry carries a distinct weight into the loss.
fn project(tape: &mut Tape, out: Var, weights: &Matrix) -> Result<Var> {
    let w = tape.leaf(weights.clone());
    let prod = tape.hadamard(out, w)?;
    Ok(tape.sum(prod))
}

fn op_cases(rng: &mut ChaCha8Rng) -> Vec<OpCase> {
    let mut cases: Vec<OpCase> = Vec::new();
    macro_rules! case {
        ($name:expr, [$(($p:expr, $m:expr)),*], $out_shape:expr, |$t:ident, $v:ident| $body:expr) => {{
            let mut store = ParamStore::new();
            $(store.insert($p, $m);)*
            let (r, c) = $out_shape;
            let proj = random_matrix(rng, r, c);
            cases.push((
                $name,
                store,
                Box::new(move |$t: &mut Tape, $v: &ParamVars| {
                    let out = $body?;
                    project($t, out, &proj)
                }),
            ));
        }};
    }
    case!("mat_mul", [("a", random_matrix(rng, 3, 4)), ("b", random_matrix(rng, 4, 2))], (3, 2),
        |t, v| t.matmul(v.get("a")?, v.get("b")?));
    case!("mat_mul_bt", [("a", random_matrix(rng, 3, 4)), ("b", random_matrix(rng, 2, 4))], (3, 2),
        |t, v| t.matmul_bt(v.get("a")?, v.get("b")?));
    case!("add", [("a", random_matrix(rng, 2, 3)), ("b", random_matrix(rng, 2, 3))], (2, 3),
        |t, v| t.add(v.get("a")?, v.get("b")?));
    case!("sub", [("a", random_matrix(rng, 2, 3)), ("b", random_matrix(rng, 2, 3))], (2, 3),
        |t, v| t.sub(v.get("a")?, v.get("b")?));
    case!("add_row", [("a", random_matrix(rng, 4, 3)), ("b", random_matrix(rng, 1, 3))], (4, 3),
        |t, v| t.add_row(v.get("a")?, v.get("b")?));
    case!("hadamard", [("a", random_matrix(rng, 2, 3)), ("b", random_matrix(rng, 2, 3))], (2, 3),
        |t, v| t.hadamard(v.get("a")?, v.get("b")?));
    case!("scale", [("a", random_matrix(rng, 2, 3))], (2, 3),
        |t, v| Ok::<_, crate::Error>(t.scale(v.get("a")?, -1.7)));
    case!("sigmoid", [("a", random_matrix(rng, 3, 2).map(|x| 3.0 * x))], (3, 2),
        |t, v| Ok::<_, crate::Error>(t.sigmoid(v.get("a")?)));
    case!("tanh", [("a", random_matrix(rng, 3, 2).map(|x| 2.0 * x))], (3, 2),
        |t, v| Ok::<_, crate::Error>(t.tanh(v.get("a")?)));
    case!("leaky_relu", [("a", away_from_zero(rng, 3, 3))], (3, 3),
        |t, v| Ok::<_, crate::Error>(t.leaky_relu(v.get("a")?)));
    case!("concat_rows", [("a", random_matrix(rng, 2, 3)), ("b", random_matrix(rng, 1, 3))], (5, 3),
        |t, v| t.concat_rows(&[v.get("a")?, v.get("b")?, v.get("a")?]));
    case!("concat_cols", [("a", random_matrix(rng, 2, 3)), ("b", random_matrix(rng, 2, 1))], (2, 4),
        |t, v| t.concat_cols(&[v.get("a")?, v.get("b")?]));
    case!("sum", [("a", random_matrix(rng, 3, 2))], (1, 1),
        |t, v| Ok::<_, crate::Error>(t.sum(v.get("a")?)));
    case!("transpose", [("a", random_matrix(rng, 2, 3))], (3, 2),
        |t, v| Ok::<_, crate::Error>(t.transpose(v.get("a")?)));
    case!("softmax", [("a", random_matrix(rng, 5, 1).map(|x| 2.0 * x))], (5, 1),
        |t, v| t.softmax(v.get("a")?));
    case!("gather_rows", [("a", random_matrix(rng, 4, 3))], (5, 3),
        |t, v| t.gather_rows(v.get("a")?, &[2, 0, 2, 3, 1]));
    case!("scatter_add_rows", [("a", random_matrix(rng, 3, 2))], (5, 2),
        |t, v| t.scatter_add_rows(v.get("a")?, &[4, 1, 4], 5));
    let sparse = Arc::new(random_sparse(rng, 6, 5, 0.4));
    case!("spmm", [("a", random_matrix(rng, 5, 3))], (6, 3),
        |t, v| t.spmm(&sparse, v.get("a")?));
    let labels: Vec<f64> = (0..6).map(|i| f64::from(i % 2)).collect();
    case!("bce", [("z", random_matrix(rng, 6, 1).map(|x| 4.0 * x))], (1, 1),
        |t, v| t.bce_with_logits(v.get("z")?, &labels));
    cases
}

/// A random day for `n` stocks in two industries (stock `i` in industry
/// `i % 2`); the first `curb` stocks touched the curb and `missing` lists
/// nodes without history.
pub fn toy_day(
    rng: &mut ChaCha8Rng,
    n: usize,
    config: &HgnnConfig,
    curb: usize,
    missing: &[usize],
) -> (DayInput, IndustryGraph) {
    let mut steps: Vec<Matrix> = (0..config.lookback)
        .map(|_| random_matrix(rng, n, config.features))
        .collect();
    for &s in missing {
        for step in &mut steps {
            step.row_mut(s).fill(0.0);
        }
    }
    let curb_nodes: Vec<usize> = (0..curb).collect();
    let labels = (0..curb).map(|k| f64::from((k % 2) as u8)).collect();
    let input = DayInput {
        day: 0,
        steps,
        has_history: (0..n).map(|s| !missing.contains(&s)).collect(),
        curb_nodes,
        indicators: random_matrix(rng, curb, config.indicators),
        labels,
    };
    let industries: BTreeMap<String, String> = (0..n)
        .map(|i| (format!("S{i:03}"), format!("I{}", i % 2)))
        .collect();
    (input, IndustryGraph::build(&industries).expect("nonempty"))
}

/// The toy configuration used for end-to-end checks: `T=5, U=4, V=3`.
pub fn toy_config() -> HgnnConfig {
    HgnnConfig {
        lookback: 5,
        hidden: 4,
        attention_dim: 3,
        mlp_hidden: vec![4],
        ..HgnnConfig::default()
    }
}

fn model_cases() -> Vec<(&'static str, Model, Vec<usize>)> {
    let base = toy_config();
    let hgnn = |cfg: HgnnConfig| Model::new(ModelKind::Hgnn, cfg).expect("valid");
    vec![
        ("hgnn_full", hgnn(base.clone()), vec![]),
        (
            "hgnn_full_node_aggregand",
            hgnn(HgnnConfig {
                market_aggregand: MarketAggregand::Node,
                ..base.clone()
            }),
            vec![],
        ),
        ("hgnn_full_missing_history", hgnn(base.clone()), vec![3]),
        ("hgnn_node_relation", hgnn(base.clone().with_preset(Preset::NodeRelation)), vec![]),
        ("hgnn_node_only", hgnn(base.clone().with_preset(Preset::NodeOnly)), vec![]),
        ("logreg", Model::new(ModelKind::Logreg, base.clone()).expect("valid"), vec![]),
        ("lstm", Model::new(ModelKind::Lstm, base.clone()).expect("valid"), vec![]),
        ("gcn", Model::new(ModelKind::Gcn, base).expect("valid"), vec![]),
    ]
}

/// Gradient check of one model's day loss on a fresh toy day (4 stocks,
/// 2 industries, 2 curb stocks). Parameters are scaled up from their
/// initialization so that gates and activations leave their linear range.
pub fn check_model(model: &Model, seed: u64, missing: &[usize], opts: GradCheckOptions) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let (input, graph) = toy_day(&mut rng, 4, &model.config, 2, missing);
    let op = graph.normalized_operator();
    let mut params = model.init_params(seed);
    for (_, m) in params.iter_mut() {
        for x in m.as_mut_slice() {
            *x = 1.5 * *x + rng.random_range(-0.2..0.2);
        }
    }
    let needs = model.needs_graph();
    grad_check(&params, opts, |tape, vars| {
        model.day_loss(tape, vars, &input, needs.then_some(&op))
    })
}

/// Runs the op suite and the model suite. With `fault`, the adjoint of that
/// operation is corrupted and the checks touching it are expected to fail.
pub fn run_suite(seed: u64, fault: Option<OpKind>) -> Result<SuiteReport> {
    let opts = GradCheckOptions {
        fault,
        ..GradCheckOptions::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    for (name, params, f) in op_cases(&mut rng) {
        let r = grad_check(&params, opts, |t, v| f(t, v))?;
        entries.push(entry(name, &r));
    }
    for (name, model, missing) in model_cases() {
        let r = check_model(&model, seed, &missing, opts)?;
        entries.push(entry(name, &r));
    }
    Ok(SuiteReport {
        seed,
        step: opts.step,
        tolerance: opts.tolerance,
        injected_fault: fault,
        passed: entries.iter().all(|e| e.passed),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_suite_passes() {
        let r = run_suite(1, None).unwrap();
        let bad: Vec<_> = r.failing().map(|e| (&e.name, e.max_rel_err)).collect();
        assert!(r.passed, "{bad:?}");
    }

    #[test]
    fn injected_fault_is_named() {
        let r = run_suite(1, Some(OpKind::Softmax)).unwrap();
        assert!(!r.passed);
        let names: Vec<&str> = r.failing().map(|e| e.name.as_str()).collect();
        assert!(names.contains(&"softmax"), "{names:?}");
        assert!(!names.contains(&"mat_mul"));
    }
}
