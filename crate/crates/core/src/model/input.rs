use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::market::DayBatch;

/// One day's model inputs in node-major matrices, built once per dataset so
/// training epochs only replay arithmetic.
#[derive(Clone, Debug, PartialEq)]
pub struct DayInput {
    pub day: i64,
    /// `T` matrices of shape `n×F`, oldest first; rows without history are zero.
    pub steps: Vec<Matrix>,
    pub has_history: Vec<bool>,
    /// Node indices of the day's curb stocks, ascending.
    pub curb_nodes: Vec<usize>,
    /// `m×I`, row `k` belongs to `curb_nodes[k]`.
    pub indicators: Matrix,
    pub labels: Vec<f64>,
}

impl DayInput {
    pub fn from_batch(batch: &DayBatch, lookback: usize, features: usize) -> Result<Self> {
        let n = batch.windows.len();
        let mut steps = vec![Matrix::zeros(n, features); lookback];
        let mut has_history = vec![false; n];
        let mut curb_nodes = Vec::new();
        let mut indicators = Vec::new();
        let mut labels = Vec::new();
        for (node, w) in batch.windows.iter().enumerate() {
            let Some(w) = w else { continue };
            if w.features.shape() != (lookback, features) {
                return Err(Error::Shape {
                    op: "day_input",
                    left: w.features.shape(),
                    right: (lookback, features),
                });
            }
            has_history[node] = true;
            for (t, step) in steps.iter_mut().enumerate() {
                step.row_mut(node).copy_from_slice(w.features.row(t));
            }
            if let (Some(ind), Some(label)) = (w.indicators, w.label) {
                curb_nodes.push(node);
                indicators.push(ind.to_array().to_vec());
                labels.push(f64::from(label));
            }
        }
        if curb_nodes.is_empty() {
            return Err(Error::Data(format!("day {} has no curb samples", batch.day)));
        }
        Ok(DayInput {
            day: batch.day,
            steps,
            has_history,
            curb_nodes,
            indicators: Matrix::from_rows(&indicators),
            labels,
        })
    }

    pub fn node_count(&self) -> usize {
        self.has_history.len()
    }

    pub fn curb_count(&self) -> usize {
        self.curb_nodes.len()
    }

    pub fn lookback(&self) -> usize {
        self.steps.len()
    }

    /// Step matrices restricted to `rows`, in that order.
    pub fn steps_for(&self, rows: &[usize]) -> Vec<Matrix> {
        self.steps.iter().map(|s| select_rows(s, rows)).collect()
    }

    /// `m × (T·F + I)`: each curb stock's window flattened oldest first,
    /// followed by its indicators.
    pub fn flattened_curb_features(&self) -> Matrix {
        let rows: Vec<Vec<f64>> = self
            .curb_nodes
            .iter()
            .enumerate()
            .map(|(k, &node)| {
                let mut r: Vec<f64> = self.steps.iter().flat_map(|s| s.row(node).to_vec()).collect();
                r.extend_from_slice(self.indicators.row(k));
                r
            })
            .collect();
        Matrix::from_rows(&rows)
    }
}

fn select_rows(m: &Matrix, rows: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(rows.len(), m.cols());
    for (k, &r) in rows.iter().enumerate() {
        out.row_mut(k).copy_from_slice(m.row(r));
    }
    out
}
