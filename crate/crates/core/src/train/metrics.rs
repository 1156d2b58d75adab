use serde::{Deserialize, Serialize};

/// Binary confusion counts with label 1 (sealed at the curb) as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    /// Counts `(label, prediction)` pairs; both must be 0 or 1.
    pub fn from_pairs(labels: &[u8], predictions: &[u8]) -> Self {
        assert_eq!(labels.len(), predictions.len(), "label/prediction length mismatch");
        let mut c = Confusion::default();
        for (&y, &p) in labels.iter().zip(predictions) {
            c.record(y, p);
        }
        c
    }

    pub fn record(&mut self, label: u8, prediction: u8) {
        match (label, prediction) {
            (1, 1) => self.tp += 1,
            (0, 1) => self.fp += 1,
            (1, 0) => self.fn_ += 1,
            (0, 0) => self.tn += 1,
            _ => panic!("labels and predictions must be 0 or 1, got ({label}, {prediction})"),
        }
    }

    pub fn merge(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `2PR/(P+R)`, or 0 when `P + R = 0`.
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Label 1 iff `σ(z) ≥ 0.5`, i.e. `z ≥ 0`.
pub fn predict(logit: f64) -> u8 {
    u8::from(logit >= 0.0)
}

/// Sample mean and standard deviation (`n − 1` denominator; 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}
