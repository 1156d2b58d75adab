//! The HGNN building blocks, batched over rows: every function maps a stack of
//! per-stock row vectors to another stack, so one tape records a whole day.

use std::sync::Arc;

use crate::autodiff::{Activation, ParamVars, SparseMatrix, Tape, Var};
use crate::error::{Error, Result};

pub const GATES: [&str; 3] = ["input", "forget", "output"];

pub fn gate_names(gate: &str) -> [String; 3] {
    [
        format!("lstm.{gate}.wx"),
        format!("lstm.{gate}.wh"),
        format!("lstm.{gate}.b"),
    ]
}

pub const CAND_P: &str = "lstm.cand.p";
pub const CAND_Q: &str = "lstm.cand.q";
pub const CAND_B: &str = "lstm.cand.b";
pub const FUSE_W: &str = "fuse.w";
pub const FUSE_B: &str = "fuse.b";
pub const GRAPH_PI: &str = "graph.pi";
pub const ATTN_P: &str = "attn.p";
pub const ATTN_Q: &str = "attn.q";
pub const ATTN_B: &str = "attn.b";
pub const CLS_Q: &str = "cls.q";
pub const CLS_B: &str = "cls.b";

pub fn mlp_names(layer: usize) -> (String, String) {
    (format!("mlp.{layer}.w"), format!("mlp.{layer}.b"))
}

/// `x · wᵀ + h · vᵀ + b` for row-stacked `x` and `h`; the recurrent term is
/// skipped when `h` is absent (zero initial state).
fn affine2(tape: &mut Tape, x: Var, wx: Var, h: Option<Var>, wh: Var, b: Var) -> Result<Var> {
    let mut z = tape.matmul_bt(x, wx)?;
    if let Some(h) = h {
        let r = tape.matmul_bt(h, wh)?;
        z = tape.add(z, r)?;
    }
    tape.add_row(z, b)
}

/// Runs the LSTM over `steps` (each `k×F`, oldest first) from zero state and
/// returns the last hidden state, `k×U`.
///
/// Gates `i, r, o = σ(W x + V h + b)` (r is the forget gate), candidate
/// `u = tanh(P_u x + Q_u h + b_u)`, `c = r⊙c' + i⊙u`, `h = o⊙tanh(c)`.
pub fn lstm_encode(tape: &mut Tape, vars: &ParamVars, steps: &[Var]) -> Result<Var> {
    if steps.is_empty() {
        return Err(Error::Contract("lstm_encode needs at least one step".into()));
    }
    let gate_vars: Vec<[Var; 3]> = GATES
        .iter()
        .map(|g| {
            let [wx, wh, b] = gate_names(g);
            Ok([vars.get(&wx)?, vars.get(&wh)?, vars.get(&b)?])
        })
        .collect::<Result<_>>()?;
    let (p, q, bu) = (vars.get(CAND_P)?, vars.get(CAND_Q)?, vars.get(CAND_B)?);

    let mut h: Option<Var> = None;
    let mut c: Option<Var> = None;
    for &x in steps {
        let mut g = Vec::with_capacity(3);
        for [wx, wh, b] in &gate_vars {
            let z = affine2(tape, x, *wx, h, *wh, *b)?;
            g.push(tape.sigmoid(z));
        }
        let (i, r, o) = (g[0], g[1], g[2]);
        let u = affine2(tape, x, p, h, q, bu)?;
        let u = tape.tanh(u);
        let iu = tape.hadamard(i, u)?;
        let c_new = match c {
            Some(prev) => {
                let kept = tape.hadamard(r, prev)?;
                tape.add(kept, iu)?
            }
            None => iu,
        };
        let tc = tape.tanh(c_new);
        h = Some(tape.hadamard(o, tc)?);
        c = Some(c_new);
    }
    Ok(h.expect("at least one step"))
}

/// Fully connected layers with leaky ReLU between them and no activation on
/// the output layer. `d` is `m×indicators`; returns `m×U`.
pub fn curb_mlp(tape: &mut Tape, vars: &ParamVars, layers: usize, d: Var) -> Result<Var> {
    let mut x = d;
    for l in 0..layers {
        let (w, b) = mlp_names(l);
        let z = tape.matmul(x, vars.get(&w)?)?;
        x = tape.add_row(z, vars.get(&b)?)?;
        if l + 1 < layers {
            x = tape.leaky_relu(x);
        }
    }
    Ok(x)
}

/// Curb-node state `ψ([h ⊕ l] W_f + b_f)`; `h` and `l` are `m×U`.
pub fn fuse_node_state(
    tape: &mut Tape,
    vars: &ParamVars,
    activation: Activation,
    h: Var,
    l: Var,
) -> Result<Var> {
    let hl = tape.concat_cols(&[h, l])?;
    let z = tape.matmul(hl, vars.get(FUSE_W)?)?;
    let z = tape.add_row(z, vars.get(FUSE_B)?)?;
    Ok(tape.activate(z, activation))
}

/// Industry states: row `s` is `Σ_{j ∈ N(s) ∪ {s}} π e_j / √(deg j · deg s)`.
pub fn graph_convolve(
    tape: &mut Tape,
    vars: &ParamVars,
    norm: &Arc<SparseMatrix>,
    e: Var,
) -> Result<Var> {
    let pooled = tape.spmm(norm, e)?;
    tape.matmul_bt(pooled, vars.get(GRAPH_PI)?)
}

/// Attention over all stocks: `η_s = P_aᵀ φ(Q_a a_s + b_a)`, `w = softmax(η)`,
/// `g = Σ_s w_s x_s` where `x` is `aggregand`. Returns `(η, w, g)` with
/// `η, w` as `n×1` and `g` as `1×U`.
pub fn market_attention(
    tape: &mut Tape,
    vars: &ParamVars,
    activation: Activation,
    a: Var,
    aggregand: Var,
) -> Result<(Var, Var, Var)> {
    let z = tape.matmul_bt(a, vars.get(ATTN_Q)?)?;
    let z = tape.add_row(z, vars.get(ATTN_B)?)?;
    let z = tape.activate(z, activation);
    let eta = tape.matmul(z, vars.get(ATTN_P)?)?;
    let w = tape.softmax(eta)?;
    debug_assert!((tape.value(w).sum() - 1.0).abs() <= 1e-12);
    let wt = tape.transpose(w);
    let g = tape.matmul(wt, aggregand)?;
    Ok((eta, w, g))
}

/// Concatenates the enabled views side by side.
pub fn hierarchical_fuse(tape: &mut Tape, views: &[Var]) -> Result<Var> {
    if views.len() == 1 {
        return Ok(views[0]);
    }
    tape.concat_cols(views)
}

/// Scalar logit per row: `H Q + b`.
pub fn classify(tape: &mut Tape, vars: &ParamVars, h: Var) -> Result<Var> {
    let z = tape.matmul(h, vars.get(CLS_Q)?)?;
    tape.add_row(z, vars.get(CLS_B)?)
}
