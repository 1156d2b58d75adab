use std::collections::BTreeMap;
use std::sync::Arc;

use hgnn::autodiff::{grad_check, Activation, GradCheckOptions, Matrix, ParamStore, Tape};
use hgnn::gradsuite::{check_model, toy_config, toy_day};
use hgnn::graph::IndustryGraph;
use hgnn::model::layers::*;
use hgnn::model::{DayInput, HgnnConfig, Model, ModelKind, Preset, View};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn lstm_store(u: usize, f: usize, fill: impl Fn(&str, usize, usize) -> Matrix) -> ParamStore {
    let mut s = ParamStore::new();
    for g in GATES {
        let [wx, wh, b] = gate_names(g);
        s.insert(wx.clone(), fill(&wx, u, f));
        s.insert(wh.clone(), fill(&wh, u, u));
        s.insert(b.clone(), fill(&b, 1, u));
    }
    s.insert(CAND_P, fill(CAND_P, u, f));
    s.insert(CAND_Q, fill(CAND_Q, u, u));
    s.insert(CAND_B, fill(CAND_B, 1, u));
    s
}

fn encode(store: &ParamStore, window: &Matrix) -> Matrix {
    let mut tape = Tape::new();
    let vars = store.register(&mut tape);
    let steps: Vec<_> = (0..window.rows())
        .map(|t| tape.leaf(Matrix::row_vector(window.row(t))))
        .collect();
    let h = lstm_encode(&mut tape, &vars, &steps).unwrap();
    tape.value(h).clone()
}

#[test]
fn init_params_is_deterministic() {
    let m = Model::hgnn(HgnnConfig::default()).unwrap();
    assert!(m.init_params(9).bit_identical(&m.init_params(9)));
    assert!(!m.init_params(9).bit_identical(&m.init_params(10)));
}

#[test]
fn init_params_candidate_shape() {
    let m = Model::hgnn(HgnnConfig {
        hidden: 8,
        features: 6,
        ..HgnnConfig::default()
    })
    .unwrap();
    assert_eq!(m.init_params(1).get(CAND_P).unwrap().shape(), (8, 6));
}

#[test]
fn init_params_within_glorot_bound_and_zero_biases() {
    let m = Model::hgnn(HgnnConfig::default()).unwrap();
    let p = m.init_params(4);
    for s in m.param_shapes() {
        let a = p.get(&s.name).unwrap();
        let bound = (6.0 / (s.rows + s.cols) as f64).sqrt();
        if s.name.ends_with(".b") {
            assert!(a.as_slice().iter().all(|&x| x == 0.0), "{}", s.name);
        } else {
            assert!(a.max_abs() <= bound, "{}", s.name);
        }
    }
}

#[test]
fn parameter_count_is_pure_function_of_config() {
    for preset in Preset::ALL {
        let cfg = HgnnConfig::default().with_preset(preset);
        let a = Model::hgnn(cfg.clone()).unwrap();
        let b = Model::hgnn(cfg).unwrap();
        assert_eq!(a.parameter_count(), b.parameter_count());
        assert_eq!(a.parameter_count(), a.init_params(3).scalar_count());
    }
}

#[test]
fn lstm_zero_parameters_give_zero_state() {
    let store = lstm_store(3, 2, |_, r, c| Matrix::zeros(r, c));
    let mut r = rng(1);
    let h = encode(&store, &random(&mut r, 4, 2));
    assert!(h.as_slice().iter().all(|&x| x == 0.0));
}

/// Scalar oracle: the four gate equations written out for U = F = 1.
fn scalar_rollout(w: &BTreeMap<&str, f64>, xs: &[f64]) -> f64 {
    let (mut h, mut c) = (0.0f64, 0.0f64);
    for &x in xs {
        let i = sig(w["iwx"] * x + w["iwh"] * h + w["ib"]);
        let r = sig(w["fwx"] * x + w["fwh"] * h + w["fb"]);
        let o = sig(w["owx"] * x + w["owh"] * h + w["ob"]);
        let u = (w["p"] * x + w["q"] * h + w["ub"]).tanh();
        c = r * c + i * u;
        h = o * c.tanh();
    }
    h
}

#[test]
fn lstm_scalar_rollout_matches_hand_equations() {
    let w: BTreeMap<&str, f64> = [
        ("iwx", 0.7), ("iwh", -0.4), ("ib", 0.1),
        ("fwx", -0.3), ("fwh", 0.9), ("fb", 0.2),
        ("owx", 0.5), ("owh", 0.3), ("ob", -0.1),
        ("p", 1.1), ("q", -0.6), ("ub", 0.05),
    ]
    .into_iter()
    .collect();
    let key = |name: &str| -> &str {
        match name {
            "lstm.input.wx" => "iwx",
            "lstm.input.wh" => "iwh",
            "lstm.input.b" => "ib",
            "lstm.forget.wx" => "fwx",
            "lstm.forget.wh" => "fwh",
            "lstm.forget.b" => "fb",
            "lstm.output.wx" => "owx",
            "lstm.output.wh" => "owh",
            "lstm.output.b" => "ob",
            "lstm.cand.p" => "p",
            "lstm.cand.q" => "q",
            "lstm.cand.b" => "ub",
            other => panic!("{other}"),
        }
    };
    let store = lstm_store(1, 1, |n, _, _| Matrix::scalar(w[key(n)]));
    let one = encode(&store, &Matrix::column(&[0.8]));
    assert!((one.item() - scalar_rollout(&w, &[0.8])).abs() < 1e-15);
    let seq = [0.8, -1.2, 0.3, 2.0];
    let many = encode(&store, &Matrix::column(&seq));
    assert!((many.item() - scalar_rollout(&w, &seq)).abs() < 1e-14);
}

#[test]
fn lstm_state_is_bounded() {
    let mut r = rng(2);
    let store = lstm_store(6, 4, |_, rows, cols| random(&mut rng(rows as u64 * 31 + cols as u64), rows, cols).map(|x| 3.0 * x));
    let h = encode(&store, &random(&mut r, 8, 4).map(|x| 5.0 * x));
    assert!(h.as_slice().iter().all(|x| x.abs() < 1.0));
}

fn mlp_store(dims: &[usize], fill: impl Fn(usize, usize) -> Matrix) -> ParamStore {
    let mut s = ParamStore::new();
    for (l, io) in dims.windows(2).enumerate() {
        let (w, b) = mlp_names(l);
        s.insert(w, fill(io[0], io[1]));
        s.insert(b, Matrix::zeros(1, io[1]));
    }
    s
}

fn run_mlp(store: &ParamStore, layers: usize, d: &Matrix) -> Matrix {
    let mut tape = Tape::new();
    let vars = store.register(&mut tape);
    let dv = tape.leaf(d.clone());
    let l = curb_mlp(&mut tape, &vars, layers, dv).unwrap();
    tape.value(l).clone()
}

#[test]
fn curb_mlp_zero_weights() {
    let s = mlp_store(&[5, 16, 8], Matrix::zeros);
    let out = run_mlp(&s, 2, &Matrix::row_vector(&[1.0, -2.0, 3.0, 0.5, 9.0]));
    assert!(out.as_slice().iter().all(|&x| x == 0.0));
}

#[test]
fn curb_mlp_single_identity_layer_passes_positive_input() {
    let s = mlp_store(&[5, 5], |r, _| Matrix::identity(r));
    let d = [0.5, 1.0, 2.0, 0.1, 3.0];
    assert_eq!(run_mlp(&s, 1, &Matrix::row_vector(&d)).as_slice(), &d);
}

#[test]
fn curb_mlp_leaky_hidden_layer_is_piecewise_linear() {
    // Hidden unit sees -2 then 3; only the final layer is linear.
    let mut s = ParamStore::new();
    s.insert("mlp.0.w", Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]));
    s.insert("mlp.0.b", Matrix::zeros(1, 2));
    s.insert("mlp.1.w", Matrix::from_rows(&[[1.0], [1.0]]));
    s.insert("mlp.1.b", Matrix::scalar(-5.0));
    let out = run_mlp(&s, 2, &Matrix::row_vector(&[-2.0, 3.0]));
    assert!((out.item() - (-0.02 + 3.0 - 5.0)).abs() < 1e-15);
}

#[test]
fn curb_mlp_gradient_check_including_input() {
    let mut r = rng(3);
    let mut s = mlp_store(&[5, 7, 4], |rows, cols| random(&mut rng((rows * cols) as u64), rows, cols));
    s.insert("d", random(&mut r, 3, 5));
    let proj = random(&mut r, 3, 4);
    let report = grad_check(&s, GradCheckOptions::default(), |t, v| {
        let l = curb_mlp(t, v, 2, v.get("d")?)?;
        let w = t.leaf(proj.clone());
        let p = t.hadamard(l, w)?;
        Ok(t.sum(p))
    })
    .unwrap();
    assert!(report.passed, "{:?}", report.failing().collect::<Vec<_>>());
}

fn fuse(store: &ParamStore, h: &Matrix, l: &Matrix) -> Matrix {
    let mut tape = Tape::new();
    let vars = store.register(&mut tape);
    let (hv, lv) = (tape.leaf(h.clone()), tape.leaf(l.clone()));
    let e = fuse_node_state(&mut tape, &vars, Activation::Tanh, hv, lv).unwrap();
    tape.value(e).clone()
}

#[test]
fn fuse_zero_weights_gives_zero() {
    let mut s = ParamStore::new();
    s.insert(FUSE_W, Matrix::zeros(4, 2));
    s.insert(FUSE_B, Matrix::zeros(1, 2));
    let e = fuse(&s, &Matrix::row_vector(&[0.3, -0.1]), &Matrix::row_vector(&[2.0, 5.0]));
    assert_eq!(e.as_slice(), &[0.0, 0.0]);
}

#[test]
fn fuse_random_is_bounded_and_differentiable() {
    let mut r = rng(4);
    let mut s = ParamStore::new();
    s.insert(FUSE_W, random(&mut r, 6, 3).map(|x| 4.0 * x));
    s.insert(FUSE_B, random(&mut r, 1, 3));
    s.insert("h", random(&mut r, 2, 3));
    s.insert("l", random(&mut r, 2, 3));
    let e = fuse(&s, s.get("h").unwrap(), s.get("l").unwrap());
    assert!(e.as_slice().iter().all(|x| x.abs() < 1.0));
    let report = grad_check(&s, GradCheckOptions::default(), |t, v| {
        let e = fuse_node_state(t, v, Activation::Tanh, v.get("h")?, v.get("l")?)?;
        Ok(t.sum(e))
    })
    .unwrap();
    assert!(report.passed);
}

#[test]
fn regular_nodes_pass_their_lstm_state_through() {
    let config = toy_config();
    let model = Model::hgnn(config.clone()).unwrap();
    let params = model.init_params(2);
    let (day, graph) = toy_day(&mut rng(5), 5, &config, 2, &[]);
    let op = graph.normalized_operator();
    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    let out = model.forward(&mut tape, &vars, &day, Some(&op)).unwrap();
    let e = tape.value(out.node_states).clone();
    for node in 2..5 {
        let window = Matrix::from_rows(&day.steps.iter().map(|s| s.row(node).to_vec()).collect::<Vec<_>>());
        let h = encode(&params, &window);
        assert_eq!(e.row(node), h.as_slice(), "node {node}");
    }
}

fn convolve(op: &Arc<hgnn::autodiff::SparseMatrix>, pi: &Matrix, e: &Matrix) -> Matrix {
    let mut s = ParamStore::new();
    s.insert(GRAPH_PI, pi.clone());
    let mut tape = Tape::new();
    let vars = s.register(&mut tape);
    let ev = tape.leaf(e.clone());
    let a = graph_convolve(&mut tape, &vars, op, ev).unwrap();
    tape.value(a).clone()
}

fn graph_of(industries: &[&str]) -> IndustryGraph {
    IndustryGraph::build(
        &industries
            .iter()
            .enumerate()
            .map(|(i, ind)| (format!("S{i:02}"), ind.to_string()))
            .collect(),
    )
    .unwrap()
}

#[test]
fn isolated_node_convolution_is_identity() {
    let g = graph_of(&["A"]);
    let e = Matrix::row_vector(&[0.4, -0.7, 1.5]);
    assert_eq!(convolve(&g.normalized_operator(), &Matrix::identity(3), &e), e);
}

#[test]
fn two_clique_convolution_averages() {
    let g = graph_of(&["A", "A"]);
    let e = Matrix::from_rows(&[[1.0, 2.0], [3.0, -4.0]]);
    let a = convolve(&g.normalized_operator(), &Matrix::identity(2), &e);
    for s in 0..2 {
        assert!((a.get(s, 0) - 2.0).abs() < 1e-15 && (a.get(s, 1) + 1.0).abs() < 1e-15);
    }
}

#[test]
fn convolution_matches_dense_oracle_on_random_graph() {
    let mut r = rng(6);
    let n = 30;
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if r.random::<f64>() < 0.15 {
                edges.push((a, b));
            }
        }
    }
    let g = IndustryGraph::from_edges((0..n).map(|i| format!("N{i:02}")).collect(), &edges).unwrap();
    let e = random(&mut r, n, 4);
    let pi = random(&mut r, 4, 4);
    let a = convolve(&g.normalized_operator(), &pi, &e);
    let oracle = g.to_dense_normalized().matmul(&e).unwrap().matmul(&pi.transpose()).unwrap();
    assert!(a.max_abs_diff(&oracle) <= 1e-10);
}

fn attention_store(r: &mut ChaCha8Rng, u: usize, v: usize, zero_p: bool) -> ParamStore {
    let mut s = ParamStore::new();
    s.insert(ATTN_P, if zero_p { Matrix::zeros(v, 1) } else { random(r, v, 1) });
    s.insert(ATTN_Q, random(r, v, u));
    s.insert(ATTN_B, random(r, 1, v));
    s
}

fn attend(s: &ParamStore, a: &Matrix) -> (Matrix, Matrix, Matrix) {
    let mut tape = Tape::new();
    let vars = s.register(&mut tape);
    let av = tape.leaf(a.clone());
    let (eta, w, g) = market_attention(&mut tape, &vars, Activation::Tanh, av, av).unwrap();
    (tape.value(eta).clone(), tape.value(w).clone(), tape.value(g).clone())
}

#[test]
fn zero_score_vector_gives_uniform_weights_and_column_mean() {
    let mut r = rng(7);
    let a = random(&mut r, 6, 3);
    let (_, w, g) = attend(&attention_store(&mut r, 3, 2, true), &a);
    assert!(w.as_slice().iter().all(|&x| (x - 1.0 / 6.0).abs() <= 1e-15));
    for c in 0..3 {
        let mean: f64 = (0..6).map(|s| a.get(s, c)).sum::<f64>() / 6.0;
        assert!((g.get(0, c) - mean).abs() < 1e-15);
    }
}

#[test]
fn single_stock_attention() {
    let mut r = rng(8);
    let a = random(&mut r, 1, 4);
    let (_, w, g) = attend(&attention_store(&mut r, 4, 3, false), &a);
    assert_eq!(w.as_slice(), &[1.0]);
    assert_eq!(g, a);
}

#[test]
fn attention_normalizes_and_ignores_logit_shift() {
    let mut r = rng(9);
    let a = random(&mut r, 12, 4);
    let s = attention_store(&mut r, 4, 3, false);
    let (eta, w, g) = attend(&s, &a);
    assert!((w.sum() - 1.0).abs() <= 1e-12);
    let mut tape = Tape::new();
    let shifted = tape.leaf(eta.map(|x| x + 37.5));
    let w2 = tape.softmax(shifted).unwrap();
    let w2 = tape.value(w2).clone();
    let g2 = w2.transpose().matmul(&a).unwrap();
    assert!(w.max_abs_diff(&w2) <= 1e-12);
    assert!(g.max_abs_diff(&g2) <= 1e-12);
}

#[test]
fn attention_gradient_check() {
    let mut r = rng(10);
    let mut s = attention_store(&mut r, 4, 3, false);
    let a = random(&mut r, 7, 4);
    let proj = random(&mut r, 1, 4);
    s.insert("a", a);
    let report = grad_check(&s, GradCheckOptions::default(), |t, v| {
        let av = v.get("a")?;
        let (_, _, g) = market_attention(t, v, Activation::Tanh, av, av)?;
        let w = t.leaf(proj.clone());
        let p = t.hadamard(g, w)?;
        Ok(t.sum(p))
    })
    .unwrap();
    assert!(report.passed);
}

#[test]
fn hierarchical_fuse_concatenates_in_order() {
    let mut tape = Tape::new();
    let e = tape.leaf(Matrix::row_vector(&[1.0, 2.0]));
    let a = tape.leaf(Matrix::row_vector(&[3.0, 4.0]));
    let g = tape.leaf(Matrix::row_vector(&[5.0, 6.0]));
    let h = hierarchical_fuse(&mut tape, &[e, a, g]).unwrap();
    assert_eq!(tape.value(h).as_slice(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    let only = hierarchical_fuse(&mut tape, &[e]).unwrap();
    assert_eq!(only.cols(), 2);
    let two = hierarchical_fuse(&mut tape, &[e, a]).unwrap();
    assert_eq!(two.cols(), 4);
}

#[test]
fn view_order_is_fixed_regardless_of_listing() {
    let cfg = HgnnConfig {
        views: vec![View::Market, View::Node, View::Relation],
        ..HgnnConfig::default()
    };
    assert_eq!(cfg.ordered_views(), vec![View::Node, View::Relation, View::Market]);
    assert_eq!(cfg.preset(), Some(Preset::Full));
}

fn classify_value(q: &[f64], b: f64, h: &[f64]) -> f64 {
    let mut s = ParamStore::new();
    s.insert(CLS_Q, Matrix::column(q));
    s.insert(CLS_B, Matrix::scalar(b));
    let mut tape = Tape::new();
    let vars = s.register(&mut tape);
    let hv = tape.leaf(Matrix::row_vector(h));
    let z = classify(&mut tape, &vars, hv).unwrap();
    tape.value(z).item()
}

#[test]
fn classify_examples() {
    assert_eq!(classify_value(&[0.0; 3], 0.0, &[1.0, 2.0, 3.0]), 0.0);
    assert_eq!(hgnn::autodiff::sigmoid(0.0), 0.5);
    assert_eq!(classify_value(&[1.0, 0.0, 0.0], 0.0, &[2.0, 7.0, -1.0]), 2.0);
}

#[test]
fn classify_gradient_check() {
    let mut r = rng(11);
    let mut s = ParamStore::new();
    s.insert(CLS_Q, random(&mut r, 6, 1));
    s.insert(CLS_B, random(&mut r, 1, 1));
    s.insert("h", random(&mut r, 3, 6));
    let report = grad_check(&s, GradCheckOptions::default(), |t, v| {
        let z = classify(t, v, v.get("h")?)?;
        t.bce_with_logits(z, &[1.0, 0.0, 1.0])
    })
    .unwrap();
    assert!(report.passed);
}

#[test]
fn single_stock_node_only_forward_is_the_plain_pipeline() {
    let config = HgnnConfig {
        views: vec![View::Node],
        ..toy_config()
    };
    let model = Model::hgnn(config.clone()).unwrap();
    let params = model.init_params(12);
    let (day, _) = toy_day(&mut rng(12), 1, &config, 1, &[]);

    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    let out = model.forward(&mut tape, &vars, &day, None).unwrap();
    assert!(out.industry_states.is_none() && out.attention.is_none());
    let logit = tape.value(out.logits).item();

    let mut t2 = Tape::new();
    let v2 = params.register(&mut t2);
    let steps: Vec<_> = day.steps.iter().map(|s| t2.leaf(s.clone())).collect();
    let h = lstm_encode(&mut t2, &v2, &steps).unwrap();
    let d = t2.leaf(day.indicators.clone());
    let l = curb_mlp(&mut t2, &v2, 2, d).unwrap();
    let e = fuse_node_state(&mut t2, &v2, Activation::Tanh, h, l).unwrap();
    let z = classify(&mut t2, &v2, e).unwrap();
    assert_eq!(logit.to_bits(), t2.value(z).item().to_bits());
}

#[test]
fn node_only_ablation_never_touches_the_graph() {
    let config = toy_config().with_preset(Preset::NodeOnly);
    let model = Model::hgnn(config.clone()).unwrap();
    assert!(!model.needs_graph());
    let names: Vec<String> = model.param_shapes().into_iter().map(|s| s.name).collect();
    assert!(names.iter().all(|n| !n.starts_with("graph.") && !n.starts_with("attn.")));
    let params = model.init_params(13);
    let (day, graph) = toy_day(&mut rng(13), 6, &config, 3, &[4]);
    let with = model.logits(&params, &day, Some(&graph.normalized_operator())).unwrap();
    let without = model.logits(&params, &day, None).unwrap();
    assert_eq!(
        with.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
        without.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn end_to_end_gradient_checks_on_toy_days() {
    let model = Model::hgnn(toy_config()).unwrap();
    for seed in 0..5 {
        let r = check_model(&model, seed, &[], GradCheckOptions::default()).unwrap();
        assert!(r.passed, "seed {seed}: {:.3e}", r.max_rel_err);
    }
}

fn blobs(n: usize, seed: u64) -> (Vec<DayInput>, HgnnConfig) {
    // Means at ±3σ on one feature: a 2σ gap between the blobs' 2σ envelopes.
    let config = HgnnConfig {
        lookback: 1,
        features: 2,
        indicators: 1,
        ..HgnnConfig::default()
    };
    let mut r = rng(seed);
    let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
    let days = (0..n)
        .map(|d| {
            let label = (d % 2) as f64;
            let mu = if label == 1.0 { 3.0 } else { -3.0 };
            let x = [mu + r.sample(normal), r.sample(normal)];
            DayInput {
                day: d as i64,
                steps: vec![Matrix::row_vector(&x)],
                has_history: vec![true],
                curb_nodes: vec![0],
                indicators: Matrix::scalar(r.sample(normal)),
                labels: vec![label],
            }
        })
        .collect();
    (days, config)
}

#[test]
fn logreg_zero_and_unit_weights() {
    let (days, config) = blobs(4, 14);
    let model = Model::new(ModelKind::Logreg, config).unwrap();
    let mut p = model.init_params(1);
    p.get_mut(CLS_Q).unwrap().as_mut_slice().fill(0.0);
    assert_eq!(model.logits(&p, &days[0], None).unwrap(), vec![0.0]);
    p.get_mut(CLS_Q).unwrap().set(1, 0, 1.0);
    let z = model.logits(&p, &days[1], None).unwrap()[0];
    assert_eq!(z, days[1].steps[0].get(0, 1));
}

#[test]
fn logreg_separates_gaussian_blobs() {
    let (days, config) = blobs(400, 15);
    let model = Model::new(ModelKind::Logreg, config).unwrap();
    let mut params = model.init_params(1);
    let mut adam = hgnn::train::Adam::new(hgnn::train::AdamConfig {
        learning_rate: 0.05,
        ..Default::default()
    });
    for _ in 0..5 {
        hgnn::train::train_epoch(&model, &mut params, &mut adam, &days, None).unwrap();
    }
    let eval = hgnn::train::evaluate(&model, &params, &days, None).unwrap();
    assert!(eval.accuracy >= 0.99, "{}", eval.accuracy);
}

#[test]
fn lstm_baseline_zero_params() {
    let config = toy_config();
    let model = Model::new(ModelKind::Lstm, config.clone()).unwrap();
    let mut p = model.init_params(1);
    for (_, m) in p.iter_mut() {
        m.as_mut_slice().fill(0.0);
    }
    let (day, _) = toy_day(&mut rng(16), 4, &config, 2, &[]);
    assert_eq!(model.logits(&p, &day, None).unwrap(), vec![0.0, 0.0]);
}

#[test]
fn lstm_baseline_equals_node_only_hgnn_without_curb_branch() {
    let config = HgnnConfig {
        use_curb_features: false,
        ..toy_config().with_preset(Preset::NodeOnly)
    };
    let lstm = Model::new(ModelKind::Lstm, config.clone()).unwrap();
    let hgnn = Model::hgnn(config.clone()).unwrap();
    let (pl, ph) = (lstm.init_params(17), hgnn.init_params(17));
    assert!(pl.bit_identical(&ph));
    let (day, _) = toy_day(&mut rng(17), 5, &config, 3, &[]);
    assert_eq!(lstm.logits(&pl, &day, None).unwrap(), hgnn.logits(&ph, &day, None).unwrap());
}

#[test]
fn gcn_isolated_node_is_lstm_head_after_pi() {
    let config = toy_config();
    let gcn = Model::new(ModelKind::Gcn, config.clone()).unwrap();
    let mut p = gcn.init_params(18);
    *p.get_mut(GRAPH_PI).unwrap() = Matrix::identity(config.hidden);
    let (day, graph) = toy_day(&mut rng(18), 1, &config, 1, &[]);
    let z = gcn.logits(&p, &day, Some(&graph.normalized_operator())).unwrap()[0];

    let window = Matrix::from_rows(&day.steps.iter().map(|s| s.row(0).to_vec()).collect::<Vec<_>>());
    let h = encode(&p, &window);
    let q = p.get(CLS_Q).unwrap();
    let oracle: f64 = h.as_slice().iter().zip(q.as_slice()).map(|(x, w)| x.tanh() * w).sum::<f64>()
        + p.get(CLS_B).unwrap().item();
    assert!((z - oracle).abs() < 1e-14);
}

#[test]
fn baseline_gradient_checks() {
    for kind in [ModelKind::Lstm, ModelKind::Gcn, ModelKind::Logreg] {
        let model = Model::new(kind, toy_config()).unwrap();
        let r = check_model(&model, 19, &[], GradCheckOptions::default()).unwrap();
        assert!(r.passed, "{kind:?} {:.3e}", r.max_rel_err);
    }
}
