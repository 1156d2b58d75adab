use std::collections::BTreeMap;

use crate::autodiff::{Matrix, ParamStore};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Global L2 norm above which gradients are rescaled; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: Some(5.0),
        }
    }
}

/// Adam with bias-corrected moments.
#[derive(Clone, Debug, Default)]
pub struct Adam {
    config: AdamConfig,
    step: u64,
    first: BTreeMap<String, Matrix>,
    second: BTreeMap<String, Matrix>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            ..Adam::default()
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &ParamStore) -> Result<()> {
        let scale = match self.config.clip_norm {
            Some(max) => {
                let norm = global_norm(grads);
                if !norm.is_finite() {
                    return Err(Error::Diverged(format!("gradient norm is {norm}")));
                }
                if norm > max {
                    max / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        self.step += 1;
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
            ..
        } = self.config;
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        for (name, p) in params.iter_mut() {
            let g = grads.require(name)?;
            if g.shape() != p.shape() {
                return Err(Error::Shape {
                    op: "adam_step",
                    left: p.shape(),
                    right: g.shape(),
                });
            }
            let m = self
                .first
                .entry(name.clone())
                .or_insert_with(|| Matrix::zeros(p.rows(), p.cols()));
            let v = self
                .second
                .entry(name.clone())
                .or_insert_with(|| Matrix::zeros(p.rows(), p.cols()));
            let iter = p
                .as_mut_slice()
                .iter_mut()
                .zip(g.as_slice())
                .zip(m.as_mut_slice().iter_mut().zip(v.as_mut_slice()));
            for ((p, &g), (m, v)) in iter {
                let g = g * scale;
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            }
        }
        Ok(())
    }
}

pub fn global_norm(grads: &ParamStore) -> f64 {
    grads.iter().map(|(_, g)| g.sum_of_squares()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(v: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("p", Matrix::scalar(v));
        s
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = scalar_store(1.0);
        let mut adam = Adam::new(AdamConfig::default());
        adam.step(&mut p, &scalar_store(0.3)).unwrap();
        let moved = 1.0 - p.get("p").unwrap().item();
        assert!((moved - 1e-3).abs() < 1e-9, "{moved}");
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = scalar_store(1.25);
        let mut adam = Adam::new(AdamConfig::default());
        adam.step(&mut p, &scalar_store(0.0)).unwrap();
        assert_eq!(p.get("p").unwrap().item(), 1.25);
    }

    #[test]
    fn quadratic_converges() {
        let mut p = scalar_store(0.0);
        let mut adam = Adam::new(AdamConfig {
            learning_rate: 0.1,
            ..AdamConfig::default()
        });
        for _ in 0..200 {
            let x = p.get("p").unwrap().item();
            adam.step(&mut p, &scalar_store(2.0 * (x - 3.0))).unwrap();
        }
        assert!((p.get("p").unwrap().item() - 3.0).abs() <= 0.1);
    }

    #[test]
    fn clipping_rescales_large_gradients() {
        let mut s = ParamStore::new();
        s.insert("a", Matrix::row_vector(&[30.0, 40.0]));
        assert_eq!(global_norm(&s), 50.0);
        let mut p = ParamStore::new();
        p.insert("a", Matrix::zeros(1, 2));
        let mut adam = Adam::new(AdamConfig::default());
        adam.step(&mut p, &s).unwrap();
        assert!(p.is_finite());
    }
}
