//! Define-by-run tape for reverse-mode differentiation over [`Matrix`] values.
//!
//! Every operation appends one record holding its output value and operand
//! ids, so records are topologically ordered by construction. [`Tape::backward`]
//! walks the records once, newest first, accumulating adjoints into a fresh
//! buffer; the tape itself is never mutated, so replaying it is bit-identical.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::matrix::{matmul_at_into, matmul_bt_into, matmul_into, Matrix, SparseMatrix};
use crate::error::{Error, Result};

/// Negative-side slope of the leaky ReLU.
pub const LEAKY_RELU_SLOPE: f64 = 0.01;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    id: usize,
    rows: usize,
    cols: usize,
}

impl Var {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Tanh,
    LeakyRelu,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    LEAKY_RELU_SLOPE * x
                }
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Operation tags, used in diagnostics and for adjoint fault injection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Leaf,
    MatMul,
    MatMulBt,
    Add,
    AddRow,
    Sub,
    Hadamard,
    Scale,
    Sigmoid,
    Tanh,
    LeakyRelu,
    ConcatRows,
    ConcatCols,
    Sum,
    Transpose,
    Softmax,
    GatherRows,
    ScatterAddRows,
    #[serde(rename = "spmm")]
    SpMM,
    Bce,
}

impl OpKind {
    /// Every differentiable operation (leaves excluded).
    pub const DIFFERENTIABLE: [OpKind; 19] = [
        OpKind::MatMul,
        OpKind::MatMulBt,
        OpKind::Add,
        OpKind::AddRow,
        OpKind::Sub,
        OpKind::Hadamard,
        OpKind::Scale,
        OpKind::Sigmoid,
        OpKind::Tanh,
        OpKind::LeakyRelu,
        OpKind::ConcatRows,
        OpKind::ConcatCols,
        OpKind::Sum,
        OpKind::Transpose,
        OpKind::Softmax,
        OpKind::GatherRows,
        OpKind::ScatterAddRows,
        OpKind::SpMM,
        OpKind::Bce,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Leaf => "leaf",
            OpKind::MatMul => "mat_mul",
            OpKind::MatMulBt => "mat_mul_bt",
            OpKind::Add => "add",
            OpKind::AddRow => "add_row",
            OpKind::Sub => "sub",
            OpKind::Hadamard => "hadamard",
            OpKind::Scale => "scale",
            OpKind::Sigmoid => "sigmoid",
            OpKind::Tanh => "tanh",
            OpKind::LeakyRelu => "leaky_relu",
            OpKind::ConcatRows => "concat_rows",
            OpKind::ConcatCols => "concat_cols",
            OpKind::Sum => "sum",
            OpKind::Transpose => "transpose",
            OpKind::Softmax => "softmax",
            OpKind::GatherRows => "gather_rows",
            OpKind::ScatterAddRows => "scatter_add_rows",
            OpKind::SpMM => "spmm",
            OpKind::Bce => "bce",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::DIFFERENTIABLE.into_iter().find(|k| k.name() == s)
    }
}

enum Op {
    Leaf,
    MatMul(usize, usize),
    MatMulBt(usize, usize),
    Add(usize, usize),
    AddRow(usize, usize),
    Sub(usize, usize),
    Hadamard(usize, usize),
    Scale(usize, f64),
    Activate(usize, Activation),
    ConcatRows(Vec<usize>),
    ConcatCols(Vec<usize>),
    Sum(usize),
    Transpose(usize),
    Softmax(usize),
    GatherRows(usize, Vec<usize>),
    ScatterAddRows(usize, Vec<usize>),
    SpMM(Arc<SparseMatrix>, usize),
    Bce(usize, Vec<f64>),
}

impl Op {
    fn kind(&self) -> OpKind {
        match self {
            Op::Leaf => OpKind::Leaf,
            Op::MatMul(..) => OpKind::MatMul,
            Op::MatMulBt(..) => OpKind::MatMulBt,
            Op::Add(..) => OpKind::Add,
            Op::AddRow(..) => OpKind::AddRow,
            Op::Sub(..) => OpKind::Sub,
            Op::Hadamard(..) => OpKind::Hadamard,
            Op::Scale(..) => OpKind::Scale,
            Op::Activate(_, Activation::Sigmoid) => OpKind::Sigmoid,
            Op::Activate(_, Activation::Tanh) => OpKind::Tanh,
            Op::Activate(_, Activation::LeakyRelu) => OpKind::LeakyRelu,
            Op::ConcatRows(_) => OpKind::ConcatRows,
            Op::ConcatCols(_) => OpKind::ConcatCols,
            Op::Sum(_) => OpKind::Sum,
            Op::Transpose(_) => OpKind::Transpose,
            Op::Softmax(_) => OpKind::Softmax,
            Op::GatherRows(..) => OpKind::GatherRows,
            Op::ScatterAddRows(..) => OpKind::ScatterAddRows,
            Op::SpMM(..) => OpKind::SpMM,
            Op::Bce(..) => OpKind::Bce,
        }
    }
}

struct Record {
    value: Matrix,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    records: Vec<Record>,
    fault: Option<OpKind>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Corrupts the adjoint of every `kind` record by a factor of 1.5.
    /// Test fixture for negative-control gradient checks.
    #[doc(hidden)]
    pub fn with_fault(kind: OpKind) -> Self {
        Tape {
            records: Vec::new(),
            fault: Some(kind),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.records[v.id].value
    }

    pub fn kind(&self, v: Var) -> OpKind {
        self.records[v.id].op.kind()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        let (rows, cols) = value.shape();
        let id = self.records.len();
        self.records.push(Record { value, op });
        Var { id, rows, cols }
    }

    /// Records an input. Parameters and constants are both leaves; whether
    /// a leaf's gradient is read is up to the caller.
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        if a.cols != b.rows {
            return Err(shape_err("matmul", a, b));
        }
        let mut out = Matrix::zeros(a.rows, b.cols);
        matmul_into(self.value(a), self.value(b), &mut out);
        Ok(self.push(out, Op::MatMul(a.id, b.id)))
    }

    /// `a · bᵀ`
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Result<Var> {
        if a.cols != b.cols {
            return Err(shape_err("matmul_bt", a, b));
        }
        let mut out = Matrix::zeros(a.rows, b.rows);
        matmul_bt_into(self.value(a), self.value(b), &mut out);
        Ok(self.push(out, Op::MatMulBt(a.id, b.id)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if a.shape() != b.shape() {
            return Err(shape_err("add", a, b));
        }
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        Ok(self.push(out, Op::Add(a.id, b.id)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        if a.shape() != b.shape() {
            return Err(shape_err("sub", a, b));
        }
        let mut out = self.value(a).clone();
        for (o, y) in out.as_mut_slice().iter_mut().zip(self.value(b).as_slice()) {
            *o -= y;
        }
        Ok(self.push(out, Op::Sub(a.id, b.id)))
    }

    /// Adds a `1×n` row vector to every row of an `m×n` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        if row.rows != 1 || row.cols != a.cols {
            return Err(shape_err("add_row", a, row));
        }
        let mut out = self.value(a).clone();
        let r = self.value(row).as_slice();
        for i in 0..a.rows {
            for (o, b) in out.row_mut(i).iter_mut().zip(r) {
                *o += b;
            }
        }
        Ok(self.push(out, Op::AddRow(a.id, row.id)))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        if a.shape() != b.shape() {
            return Err(shape_err("hadamard", a, b));
        }
        let mut out = self.value(a).clone();
        for (o, y) in out.as_mut_slice().iter_mut().zip(self.value(b).as_slice()) {
            *o *= y;
        }
        Ok(self.push(out, Op::Hadamard(a.id, b.id)))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let out = self.value(a).map(|x| k * x);
        self.push(out, Op::Scale(a.id, k))
    }

    pub fn activate(&mut self, a: Var, f: Activation) -> Var {
        let out = self.value(a).map(|x| f.apply(x));
        self.push(out, Op::Activate(a.id, f))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.activate(a, Activation::Sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.activate(a, Activation::Tanh)
    }

    pub fn leaky_relu(&mut self, a: Var) -> Var {
        self.activate(a, Activation::LeakyRelu)
    }

    /// Stacks matrices with equal column counts vertically.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Contract("concat_rows of nothing".into()))?;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            if p.cols != first.cols {
                return Err(shape_err("concat_rows", first, p));
            }
            rows += p.rows;
            data.extend_from_slice(self.value(p).as_slice());
        }
        let out = Matrix::from_vec(rows, first.cols, data)?;
        Ok(self.push(out, Op::ConcatRows(parts.iter().map(|p| p.id).collect())))
    }

    /// Joins matrices with equal row counts side by side.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Contract("concat_cols of nothing".into()))?;
        let mut cols = 0;
        for &p in parts {
            if p.rows != first.rows {
                return Err(shape_err("concat_cols", first, p));
            }
            cols += p.cols;
        }
        let mut out = Matrix::zeros(first.rows, cols);
        for r in 0..first.rows {
            let mut offset = 0;
            for &p in parts {
                out.row_mut(r)[offset..offset + p.cols].copy_from_slice(self.value(p).row(r));
                offset += p.cols;
            }
        }
        Ok(self.push(out, Op::ConcatCols(parts.iter().map(|p| p.id).collect())))
    }

    /// Sum of all entries, as a `1×1` value.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.push(Matrix::scalar(s), Op::Sum(a.id))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        self.push(out, Op::Transpose(a.id))
    }

    /// Softmax over every entry of a row or column vector, with the maximum
    /// logit subtracted before exponentiation.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        if a.rows != 1 && a.cols != 1 {
            return Err(Error::Shape {
                op: "softmax",
                left: a.shape(),
                right: (a.rows * a.cols, 1),
            });
        }
        let out = softmax_values(self.value(a));
        Ok(self.push(out, Op::Softmax(a.id)))
    }

    pub fn gather_rows(&mut self, a: Var, ids: &[usize]) -> Result<Var> {
        let src = self.value(a);
        let mut out = Matrix::zeros(ids.len(), a.cols);
        for (k, &i) in ids.iter().enumerate() {
            if i >= a.rows {
                return Err(Error::Index {
                    op: "gather_rows",
                    index: i,
                    len: a.rows,
                });
            }
            out.row_mut(k).copy_from_slice(src.row(i));
        }
        Ok(self.push(out, Op::GatherRows(a.id, ids.to_vec())))
    }

    /// Row `k` of `a` is added into row `ids[k]` of an `n×d` zero matrix.
    pub fn scatter_add_rows(&mut self, a: Var, ids: &[usize], n: usize) -> Result<Var> {
        if ids.len() != a.rows {
            return Err(Error::Contract(format!(
                "scatter_add_rows: {} ids for {} rows",
                ids.len(),
                a.rows
            )));
        }
        let src = self.value(a);
        let mut out = Matrix::zeros(n, a.cols);
        for (k, &i) in ids.iter().enumerate() {
            if i >= n {
                return Err(Error::Index {
                    op: "scatter_add_rows",
                    index: i,
                    len: n,
                });
            }
            for (o, s) in out.row_mut(i).iter_mut().zip(src.row(k)) {
                *o += s;
            }
        }
        Ok(self.push(out, Op::ScatterAddRows(a.id, ids.to_vec())))
    }

    /// Sparse-dense product `s · a` with a constant sparse left operand.
    pub fn spmm(&mut self, s: &Arc<SparseMatrix>, a: Var) -> Result<Var> {
        if s.cols() != a.rows {
            return Err(Error::Shape {
                op: "spmm",
                left: (s.rows(), s.cols()),
                right: a.shape(),
            });
        }
        let mut out = Matrix::zeros(s.rows(), a.cols);
        s.spmm_into(self.value(a), &mut out);
        Ok(self.push(out, Op::SpMM(Arc::clone(s), a.id)))
    }

    /// Mean binary cross-entropy of an `m×1` logit column against 0/1 labels,
    /// in the overflow-free form `max(z,0) − z·y + ln(1 + e^{−|z|})`.
    pub fn bce_with_logits(&mut self, logits: Var, labels: &[f64]) -> Result<Var> {
        if logits.cols != 1 || logits.rows != labels.len() || labels.is_empty() {
            return Err(Error::Shape {
                op: "bce_with_logits",
                left: logits.shape(),
                right: (labels.len(), 1),
            });
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
            return Err(Error::Contract(format!("label {bad} is not 0 or 1")));
        }
        let z = self.value(logits).as_slice();
        let total: f64 = z.iter().zip(labels).map(|(&z, &y)| bce(z, y)).sum();
        let loss = total / labels.len() as f64;
        Ok(self.push(Matrix::scalar(loss), Op::Bce(logits.id, labels.to_vec())))
    }

    /// Reverse pass from a `1×1` loss. Leaves that the loss does not depend
    /// on get zero gradients.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if loss.shape() != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a 1x1 loss, got {}x{}",
                loss.rows, loss.cols
            )));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; loss.id + 1];
        grads[loss.id] = Some(Matrix::scalar(1.0));

        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let record = &self.records[id];
            let fault = self.fault == Some(record.op.kind());
            let emit = |grads: &mut Vec<Option<Matrix>>, target: usize, mut m: Matrix| {
                if fault {
                    m.scale_in_place(1.5);
                }
                accumulate(grads, target, m);
            };
            match &record.op {
                Op::Leaf => {}
                &Op::MatMul(a, b) => {
                    let (av, bv) = (&self.records[a].value, &self.records[b].value);
                    let mut ga = Matrix::zeros(av.rows(), av.cols());
                    matmul_bt_into(&g, bv, &mut ga);
                    let mut gb = Matrix::zeros(bv.rows(), bv.cols());
                    matmul_at_into(av, &g, &mut gb);
                    emit(&mut grads, a, ga);
                    emit(&mut grads, b, gb);
                }
                &Op::MatMulBt(a, b) => {
                    let (av, bv) = (&self.records[a].value, &self.records[b].value);
                    let mut ga = Matrix::zeros(av.rows(), av.cols());
                    matmul_into(&g, bv, &mut ga);
                    let mut gb = Matrix::zeros(bv.rows(), bv.cols());
                    matmul_at_into(&g, av, &mut gb);
                    emit(&mut grads, a, ga);
                    emit(&mut grads, b, gb);
                }
                &Op::Add(a, b) => {
                    emit(&mut grads, a, g.clone());
                    emit(&mut grads, b, g.clone());
                }
                &Op::Sub(a, b) => {
                    emit(&mut grads, a, g.clone());
                    emit(&mut grads, b, g.map(|x| -x));
                }
                &Op::AddRow(a, row) => {
                    let mut gr = Matrix::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for (o, x) in gr.as_mut_slice().iter_mut().zip(g.row(i)) {
                            *o += x;
                        }
                    }
                    emit(&mut grads, a, g.clone());
                    emit(&mut grads, row, gr);
                }
                &Op::Hadamard(a, b) => {
                    let (av, bv) = (&self.records[a].value, &self.records[b].value);
                    emit(&mut grads, a, zip_map(&g, bv, |x, y| x * y));
                    emit(&mut grads, b, zip_map(&g, av, |x, y| x * y));
                }
                &Op::Scale(a, k) => emit(&mut grads, a, g.map(|x| k * x)),
                &Op::Activate(a, f) => {
                    let local = match f {
                        Activation::Sigmoid => {
                            zip_map(&g, &record.value, |gx, y| gx * y * (1.0 - y))
                        }
                        Activation::Tanh => zip_map(&g, &record.value, |gx, y| gx * (1.0 - y * y)),
                        Activation::LeakyRelu => {
                            zip_map(&g, &self.records[a].value, |gx, x| {
                                if x > 0.0 {
                                    gx
                                } else {
                                    LEAKY_RELU_SLOPE * gx
                                }
                            })
                        }
                    };
                    emit(&mut grads, a, local);
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let pv = &self.records[p].value;
                        let n = pv.len();
                        let slice = g.as_slice()[offset..offset + n].to_vec();
                        emit(&mut grads, p, Matrix::from_vec(pv.rows(), pv.cols(), slice)?);
                        offset += n;
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let pv = &self.records[p].value;
                        let mut gp = Matrix::zeros(pv.rows(), pv.cols());
                        for r in 0..pv.rows() {
                            gp.row_mut(r)
                                .copy_from_slice(&g.row(r)[offset..offset + pv.cols()]);
                        }
                        emit(&mut grads, p, gp);
                        offset += pv.cols();
                    }
                }
                &Op::Sum(a) => {
                    let av = &self.records[a].value;
                    emit(&mut grads, a, Matrix::filled(av.rows(), av.cols(), g.item()));
                }
                &Op::Transpose(a) => emit(&mut grads, a, g.transpose()),
                &Op::Softmax(a) => {
                    let y = &record.value;
                    let dot: f64 = g
                        .as_slice()
                        .iter()
                        .zip(y.as_slice())
                        .map(|(gx, yx)| gx * yx)
                        .sum();
                    emit(&mut grads, a, zip_map(&g, y, |gx, yx| yx * (gx - dot)));
                }
                Op::GatherRows(a, ids) => {
                    let av = &self.records[*a].value;
                    let mut ga = Matrix::zeros(av.rows(), av.cols());
                    for (k, &i) in ids.iter().enumerate() {
                        for (o, x) in ga.row_mut(i).iter_mut().zip(g.row(k)) {
                            *o += x;
                        }
                    }
                    emit(&mut grads, *a, ga);
                }
                Op::ScatterAddRows(a, ids) => {
                    let av = &self.records[*a].value;
                    let mut ga = Matrix::zeros(av.rows(), av.cols());
                    for (k, &i) in ids.iter().enumerate() {
                        ga.row_mut(k).copy_from_slice(g.row(i));
                    }
                    emit(&mut grads, *a, ga);
                }
                Op::SpMM(s, a) => {
                    let av = &self.records[*a].value;
                    let mut ga = Matrix::zeros(av.rows(), av.cols());
                    s.spmm_t_into(&g, &mut ga);
                    emit(&mut grads, *a, ga);
                }
                Op::Bce(a, labels) => {
                    let z = &self.records[*a].value;
                    let k = g.item() / labels.len() as f64;
                    let gz: Vec<f64> = z
                        .as_slice()
                        .iter()
                        .zip(labels)
                        .map(|(&z, &y)| k * (sigmoid(z) - y))
                        .collect();
                    emit(&mut grads, *a, Matrix::from_vec(z.rows(), 1, gz)?);
                }
            }
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

fn shape_err(op: &'static str, a: Var, b: Var) -> Error {
    Error::Shape {
        op,
        left: a.shape(),
        right: b.shape(),
    }
}

fn accumulate(grads: &mut [Option<Matrix>], id: usize, m: Matrix) {
    match &mut grads[id] {
        Some(g) => g.add_assign(&m),
        slot @ None => *slot = Some(m),
    }
}

fn zip_map(a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    let data = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Matrix::from_vec(a.rows(), a.cols(), data).expect("same shape")
}

pub(crate) fn bce(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

pub(crate) fn softmax_values(a: &Matrix) -> Matrix {
    let max = a.as_slice().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps = a.map(|x| (x - max).exp());
    let total = exps.sum();
    exps.map(|x| x / total)
}

/// Adjoints from one reverse pass, indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`; zeros when `v` did not
    /// contribute to the loss.
    pub fn get(&self, v: Var) -> Matrix {
        self.grads
            .get(v.id)
            .and_then(|g| g.clone())
            .unwrap_or_else(|| Matrix::zeros(v.rows, v.cols))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn op_names_match_serde() {
        for k in OpKind::DIFFERENTIABLE {
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
            assert_eq!(OpKind::parse(k.name()), Some(k));
        }
    }

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows)
    }

    #[test]
    fn matmul_identity_and_dot() {
        let mut t = Tape::new();
        let i = t.leaf(Matrix::identity(2));
        let x = t.leaf(m(&[&[3.0], &[4.0]]));
        let y = t.matmul(i, x).unwrap();
        assert_eq!(t.value(y), &m(&[&[3.0], &[4.0]]));

        let a = t.leaf(m(&[&[1.0, 2.0]]));
        let d = t.matmul(a, x).unwrap();
        assert_eq!(t.value(d).item(), 11.0);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut t = Tape::new();
        let a = t.leaf(Matrix::zeros(2, 3));
        let b = t.leaf(Matrix::zeros(2, 3));
        let err = t.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("(2, 3)"), "{err}");
    }

    #[test]
    fn activations_at_known_points() {
        assert_eq!(Activation::Sigmoid.apply(0.0), 0.5);
        assert_eq!(Activation::Tanh.apply(0.0), 0.0);
        assert!((Activation::LeakyRelu.apply(-2.0) - (-0.02)).abs() < 1e-15);
        assert_eq!(Activation::LeakyRelu.apply(3.0), 3.0);
    }

    #[test]
    fn softmax_examples() {
        let mut t = Tape::new();
        let c = t.leaf(Matrix::column(&[7.5, 7.5, 7.5]));
        let s = t.softmax(c).unwrap();
        for &v in t.value(s).as_slice() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let l = t.leaf(Matrix::column(&[0.0, 2f64.ln(), 2f64.ln()]));
        let s = t.softmax(l).unwrap();
        let expect = [0.2, 0.4, 0.4];
        for (v, e) in t.value(s).as_slice().iter().zip(expect) {
            assert!((v - e).abs() < 1e-15);
        }
        let big = t.leaf(Matrix::column(&[1000.0, 0.0]));
        let s = t.softmax(big).unwrap();
        assert!(t.value(s).is_finite());
    }

    #[test]
    fn concat_cols_of_rows() {
        let mut t = Tape::new();
        let a = t.leaf(Matrix::row_vector(&[1.0, 2.0]));
        let b = t.leaf(Matrix::row_vector(&[3.0]));
        let c = t.concat_cols(&[a, b]).unwrap();
        assert_eq!(t.value(c).as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn gather_and_duplicate_adjoint() {
        let mut t = Tape::new();
        let a = t.leaf(Matrix::column(&[1.0, 2.0, 3.0]));
        let g = t.gather_rows(a, &[2, 0]).unwrap();
        assert_eq!(t.value(g).as_slice(), &[3.0, 1.0]);

        let d = t.gather_rows(a, &[1, 1]).unwrap();
        let s = t.sum(d);
        let grads = t.backward(s).unwrap();
        assert_eq!(grads.get(a).as_slice(), &[0.0, 2.0, 0.0]);

        assert!(matches!(
            t.gather_rows(a, &[3]),
            Err(Error::Index { index: 3, .. })
        ));
    }

    #[test]
    fn sum_and_quadratic_gradients() {
        let mut t = Tape::new();
        let p = t.leaf(m(&[&[1.0, -2.0], &[0.5, 4.0]]));
        let s = t.sum(p);
        assert_eq!(t.backward(s).unwrap().get(p), Matrix::filled(2, 2, 1.0));

        let sq = t.hadamard(p, p).unwrap();
        let s = t.sum(sq);
        let half = t.scale(s, 0.5);
        assert_eq!(&t.backward(half).unwrap().get(p), t.value(p));
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut t = Tape::new();
        let p = t.leaf(Matrix::zeros(2, 1));
        assert!(matches!(t.backward(p), Err(Error::Contract(_))));
    }

    #[test]
    fn unused_leaf_gets_zero_gradient() {
        let mut t = Tape::new();
        let p = t.leaf(Matrix::filled(1, 3, 2.0));
        let unused = t.leaf(Matrix::filled(2, 2, 1.0));
        let s = t.sum(p);
        assert_eq!(t.backward(s).unwrap().get(unused), Matrix::zeros(2, 2));
    }

    #[test]
    fn bce_closed_forms() {
        let mut t = Tape::new();
        let z = t.leaf(Matrix::column(&[0.0]));
        let l1 = t.bce_with_logits(z, &[1.0]).unwrap();
        let l0 = t.bce_with_logits(z, &[0.0]).unwrap();
        assert!((t.value(l1).item() - 2f64.ln()).abs() < 1e-15);
        assert!((t.value(l0).item() - 2f64.ln()).abs() < 1e-15);
        let big = t.leaf(Matrix::column(&[50.0]));
        let l = t.bce_with_logits(big, &[1.0]).unwrap();
        assert!(t.value(l).item() <= 1e-20);
        assert!(t.bce_with_logits(z, &[0.5]).is_err());
    }

    #[test]
    fn replayed_backward_is_bit_identical() {
        let mut t = Tape::new();
        let a = t.leaf(m(&[&[0.3, -1.2], &[0.7, 0.1]]));
        let b = t.leaf(m(&[&[1.1], &[-0.4]]));
        let y = t.matmul(a, b).unwrap();
        let y = t.tanh(y);
        let y = t.softmax(y).unwrap();
        let w = t.leaf(Matrix::column(&[1.0, 3.0]));
        let y = t.hadamard(y, w).unwrap();
        let loss = t.sum(y);
        let g1 = t.backward(loss).unwrap();
        let g2 = t.backward(loss).unwrap();
        for v in [a, b] {
            let (x, y) = (g1.get(v), g2.get(v));
            assert!(x
                .as_slice()
                .iter()
                .zip(y.as_slice())
                .all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }
}
