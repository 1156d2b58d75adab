//! HGNN and the three baselines, sharing one parameter naming scheme and one
//! day-level forward pass.

mod checkpoint;
mod config;
mod input;
pub mod layers;

use std::sync::Arc;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autodiff::{Matrix, ParamStore, ParamVars, SparseMatrix, Tape, Var};
use crate::error::{Error, Result};
use layers::*;

pub use checkpoint::Checkpoint;
pub use config::{HgnnConfig, MarketAggregand, Preset, View};
pub use input::DayInput;

#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Hgnn,
    Logreg,
    Lstm,
    Gcn,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Hgnn => "hgnn",
            ModelKind::Logreg => "logreg",
            ModelKind::Lstm => "lstm",
            ModelKind::Gcn => "gcn",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [ModelKind::Hgnn, ModelKind::Logreg, ModelKind::Lstm, ModelKind::Gcn]
            .into_iter()
            .find(|k| k.as_str() == s)
    }
}

/// Declared shape of one parameter array.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamShape {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

impl ParamShape {
    fn new(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        ParamShape {
            name: name.into(),
            rows,
            cols,
        }
    }

    pub fn is_bias(&self) -> bool {
        self.name.ends_with(".b")
    }

    /// Glorot bound `√(6/(fan_in + fan_out))`.
    pub fn init_bound(&self) -> f64 {
        (6.0 / (self.rows + self.cols) as f64).sqrt()
    }
}

/// Traced intermediates of one forward pass. Row `k` of `logits` belongs to
/// `input.curb_nodes[k]`.
#[derive(Clone, Copy, Debug)]
pub struct DayOutput {
    pub logits: Var,
    /// Node states `e` for every node (graph models) or for curb rows only.
    pub node_states: Var,
    pub industry_states: Option<Var>,
    pub attention_logits: Option<Var>,
    pub attention: Option<Var>,
    pub market_state: Option<Var>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub kind: ModelKind,
    pub config: HgnnConfig,
}

impl Model {
    pub fn new(kind: ModelKind, config: HgnnConfig) -> Result<Self> {
        config.validate()?;
        Ok(Model { kind, config })
    }

    pub fn hgnn(config: HgnnConfig) -> Result<Self> {
        Model::new(ModelKind::Hgnn, config)
    }

    /// Ablation label for result tables; baselines have none.
    pub fn preset_label(&self) -> &'static str {
        match self.kind {
            ModelKind::Hgnn => self.config.preset().map_or("custom", Preset::name),
            _ => "-",
        }
    }

    pub fn needs_graph(&self) -> bool {
        match self.kind {
            ModelKind::Hgnn => self.config.needs_graph(),
            ModelKind::Gcn => true,
            ModelKind::Logreg | ModelKind::Lstm => false,
        }
    }

    fn uses_curb_branch(&self) -> bool {
        self.kind == ModelKind::Hgnn && self.config.use_curb_features
    }

    pub fn param_shapes(&self) -> Vec<ParamShape> {
        let c = &self.config;
        let (u, f) = (c.hidden, c.features);
        let mut out = Vec::new();
        if self.kind == ModelKind::Logreg {
            out.push(ParamShape::new(CLS_Q, c.lookback * f + c.indicators, 1));
            out.push(ParamShape::new(CLS_B, 1, 1));
            return out;
        }
        for g in GATES {
            let [wx, wh, b] = gate_names(g);
            out.push(ParamShape::new(wx, u, f));
            out.push(ParamShape::new(wh, u, u));
            out.push(ParamShape::new(b, 1, u));
        }
        out.push(ParamShape::new(CAND_P, u, f));
        out.push(ParamShape::new(CAND_Q, u, u));
        out.push(ParamShape::new(CAND_B, 1, u));
        if self.uses_curb_branch() {
            let mut dims = vec![c.indicators];
            dims.extend(&c.mlp_hidden);
            dims.push(u);
            for (l, io) in dims.windows(2).enumerate() {
                let (w, b) = mlp_names(l);
                out.push(ParamShape::new(w, io[0], io[1]));
                out.push(ParamShape::new(b, 1, io[1]));
            }
            out.push(ParamShape::new(FUSE_W, 2 * u, u));
            out.push(ParamShape::new(FUSE_B, 1, u));
        }
        if self.needs_graph() {
            out.push(ParamShape::new(GRAPH_PI, u, u));
        }
        if self.kind == ModelKind::Hgnn && c.has(View::Market) {
            out.push(ParamShape::new(ATTN_P, c.attention_dim, 1));
            out.push(ParamShape::new(ATTN_Q, c.attention_dim, u));
            out.push(ParamShape::new(ATTN_B, 1, c.attention_dim));
        }
        let width = match self.kind {
            ModelKind::Hgnn => c.ordered_views().len() * u,
            _ => u,
        };
        out.push(ParamShape::new(CLS_Q, width, 1));
        out.push(ParamShape::new(CLS_B, 1, 1));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.param_shapes().iter().map(|s| s.rows * s.cols).sum()
    }

    /// Glorot-uniform weights and zero biases. Each array draws from its own
    /// stream keyed by `(seed, name)`, so two models that share a parameter
    /// name and shape start from the same values.
    pub fn init_params(&self, seed: u64) -> ParamStore {
        let mut store = ParamStore::new();
        for shape in self.param_shapes() {
            let mut m = Matrix::zeros(shape.rows, shape.cols);
            if !shape.is_bias() {
                let bound = shape.init_bound();
                let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(name_stream(&shape.name));
                for x in m.as_mut_slice() {
                    *x = dist.sample(&mut rng);
                }
            }
            store.insert(shape.name, m);
        }
        store
    }

    /// Checks that `params` has exactly the declared names and shapes.
    pub fn check_params(&self, params: &ParamStore) -> Result<()> {
        let shapes = self.param_shapes();
        if shapes.len() != params.len() {
            return Err(Error::Contract(format!(
                "expected {} parameter arrays, found {}",
                shapes.len(),
                params.len()
            )));
        }
        for s in shapes {
            let m = params.require(&s.name)?;
            if m.shape() != (s.rows, s.cols) {
                return Err(Error::Shape {
                    op: "check_params",
                    left: m.shape(),
                    right: (s.rows, s.cols),
                });
            }
        }
        Ok(())
    }

    /// Records one day's forward pass. `graph` is the normalized operator and
    /// is required exactly when [`Model::needs_graph`] holds.
    pub fn forward(
        &self,
        tape: &mut Tape,
        vars: &ParamVars,
        input: &DayInput,
        graph: Option<&Arc<SparseMatrix>>,
    ) -> Result<DayOutput> {
        if self.kind == ModelKind::Logreg {
            let x = tape.leaf(input.flattened_curb_features());
            let logits = classify(tape, vars, x)?;
            return Ok(DayOutput {
                logits,
                node_states: x,
                industry_states: None,
                attention_logits: None,
                attention: None,
                market_state: None,
            });
        }
        if input.lookback() != self.config.lookback {
            return Err(Error::Contract(format!(
                "input has {} steps, model expects {}",
                input.lookback(),
                self.config.lookback
            )));
        }
        let graph = if self.needs_graph() {
            let g = graph.ok_or_else(|| Error::Contract("this model needs the graph operator".into()))?;
            if g.rows() != input.node_count() {
                return Err(Error::Shape {
                    op: "forward",
                    left: (g.rows(), g.cols()),
                    right: (input.node_count(), input.node_count()),
                });
            }
            Some(g)
        } else {
            None
        };
        match graph {
            Some(g) => self.forward_graph(tape, vars, input, g),
            None => self.forward_local(tape, vars, input),
        }
    }

    /// Models without a graph view only ever touch curb rows.
    fn forward_local(&self, tape: &mut Tape, vars: &ParamVars, input: &DayInput) -> Result<DayOutput> {
        let steps: Vec<Var> = input
            .steps_for(&input.curb_nodes)
            .into_iter()
            .map(|m| tape.leaf(m))
            .collect();
        let h = lstm_encode(tape, vars, &steps)?;
        let e = if self.uses_curb_branch() {
            let l = self.curb_features(tape, vars, input)?;
            fuse_node_state(tape, vars, self.config.fusion_activation, h, l)?
        } else {
            h
        };
        let logits = classify(tape, vars, e)?;
        Ok(DayOutput {
            logits,
            node_states: e,
            industry_states: None,
            attention_logits: None,
            attention: None,
            market_state: None,
        })
    }

    fn forward_graph(
        &self,
        tape: &mut Tape,
        vars: &ParamVars,
        input: &DayInput,
        graph: &Arc<SparseMatrix>,
    ) -> Result<DayOutput> {
        let n = input.node_count();
        let u = self.config.hidden;
        let steps: Vec<Var> = input.steps.iter().map(|m| tape.leaf(m.clone())).collect();
        let h = lstm_encode(tape, vars, &steps)?;

        let mut curb = vec![false; n];
        for &c in &input.curb_nodes {
            curb[c] = true;
        }
        let e = if self.uses_curb_branch() {
            let l = self.curb_features(tape, vars, input)?;
            let h_curb = tape.gather_rows(h, &input.curb_nodes)?;
            let e_curb = fuse_node_state(tape, vars, self.config.fusion_activation, h_curb, l)?;
            let keep = row_mask(n, u, |s| input.has_history[s] && !curb[s]);
            let keep = tape.leaf(keep);
            let regular = tape.hadamard(h, keep)?;
            let placed = tape.scatter_add_rows(e_curb, &input.curb_nodes, n)?;
            tape.add(regular, placed)?
        } else if input.has_history.iter().all(|&b| b) {
            h
        } else {
            let keep = tape.leaf(row_mask(n, u, |s| input.has_history[s]));
            tape.hadamard(h, keep)?
        };

        if self.kind == ModelKind::Gcn {
            let a = graph_convolve(tape, vars, graph, e)?;
            let a = tape.tanh(a);
            let a_curb = tape.gather_rows(a, &input.curb_nodes)?;
            let logits = classify(tape, vars, a_curb)?;
            return Ok(DayOutput {
                logits,
                node_states: e,
                industry_states: Some(a),
                attention_logits: None,
                attention: None,
                market_state: None,
            });
        }

        let a = graph_convolve(tape, vars, graph, e)?;
        let mut parts = Vec::with_capacity(3);
        let mut out = DayOutput {
            logits: e,
            node_states: e,
            industry_states: Some(a),
            attention_logits: None,
            attention: None,
            market_state: None,
        };
        for view in self.config.ordered_views() {
            let part = match view {
                View::Node => tape.gather_rows(e, &input.curb_nodes)?,
                View::Relation => tape.gather_rows(a, &input.curb_nodes)?,
                View::Market => {
                    let aggregand = match self.config.market_aggregand {
                        MarketAggregand::Relation => a,
                        MarketAggregand::Node => e,
                    };
                    let (eta, w, g) =
                        market_attention(tape, vars, self.config.attention_activation, a, aggregand)?;
                    out.attention_logits = Some(eta);
                    out.attention = Some(w);
                    out.market_state = Some(g);
                    let ones = tape.leaf(Matrix::filled(input.curb_count(), 1, 1.0));
                    tape.matmul(ones, g)?
                }
            };
            parts.push(part);
        }
        let fused = hierarchical_fuse(tape, &parts)?;
        out.logits = classify(tape, vars, fused)?;
        Ok(out)
    }

    fn curb_features(&self, tape: &mut Tape, vars: &ParamVars, input: &DayInput) -> Result<Var> {
        if input.indicators.cols() != self.config.indicators {
            return Err(Error::Shape {
                op: "curb_mlp",
                left: input.indicators.shape(),
                right: (input.curb_count(), self.config.indicators),
            });
        }
        let d = tape.leaf(input.indicators.clone());
        curb_mlp(tape, vars, self.config.mlp_hidden.len() + 1, d)
    }

    /// Curb-stock logits for one day without keeping the tape.
    pub fn logits(
        &self,
        params: &ParamStore,
        input: &DayInput,
        graph: Option<&Arc<SparseMatrix>>,
    ) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let vars = params.register(&mut tape);
        let out = self.forward(&mut tape, &vars, input, graph)?;
        Ok(tape.value(out.logits).as_slice().to_vec())
    }

    /// Mean binary cross-entropy of one day, recorded on `tape`.
    pub fn day_loss(
        &self,
        tape: &mut Tape,
        vars: &ParamVars,
        input: &DayInput,
        graph: Option<&Arc<SparseMatrix>>,
    ) -> Result<Var> {
        let out = self.forward(tape, vars, input, graph)?;
        tape.bce_with_logits(out.logits, &input.labels)
    }
}

fn row_mask(n: usize, u: usize, keep: impl Fn(usize) -> bool) -> Matrix {
    let mut m = Matrix::zeros(n, u);
    for s in (0..n).filter(|&s| keep(s)) {
        m.row_mut(s).fill(1.0);
    }
    m
}

fn name_stream(name: &str) -> u64 {
    let digest = Sha256::digest(name.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}
