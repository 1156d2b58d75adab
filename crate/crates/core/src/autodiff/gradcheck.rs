//! Central finite-difference validation of tape gradients.

use serde::{Deserialize, Serialize};

use super::params::{ParamStore, ParamVars};
use super::tape::{OpKind, Tape, Var};
use crate::error::{Error, Result};

/// Denominator floor for the relative error, so that entries whose true
/// gradient is ~0 are judged on absolute error instead of amplified noise.
pub const REL_ERR_FLOOR: f64 = 1e-5;

#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    pub step: f64,
    pub tolerance: f64,
    /// Corrupt the adjoint of this operation in the analytic pass.
    pub fault: Option<OpKind>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-5,
            tolerance: 1e-4,
            fault: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamCheck {
    pub name: String,
    pub entries: usize,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub step: f64,
    pub tolerance: f64,
    pub params: Vec<ParamCheck>,
    pub max_rel_err: f64,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn failing(&self) -> impl Iterator<Item = &ParamCheck> {
        self.params.iter().filter(|p| !p.passed)
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Compares the tape gradient of the scalar built by `f` against central
/// differences for every entry of every array in `params`.
pub fn grad_check<F>(params: &ParamStore, opts: GradCheckOptions, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamVars) -> Result<Var>,
{
    let mut tape = match opts.fault {
        Some(kind) => Tape::with_fault(kind),
        None => Tape::new(),
    };
    let vars = params.register(&mut tape);
    let loss = f(&mut tape, &vars)?;
    let analytic = vars.collect(&tape.backward(loss)?);

    let eval = |p: &ParamStore| -> Result<f64> {
        let mut t = Tape::new();
        let v = p.register(&mut t);
        let out = f(&mut t, &v)?;
        let value = t.value(out).item();
        if !value.is_finite() {
            return Err(Error::Contract("non-finite loss during gradient check".into()));
        }
        Ok(value)
    };

    let mut probe = params.clone();
    let mut checks = Vec::with_capacity(params.len());
    for (name, values) in params.iter() {
        let grad = analytic.require(name)?;
        let (mut max_rel, mut max_abs) = (0.0f64, 0.0f64);
        for idx in 0..values.len() {
            let original = values.as_slice()[idx];
            probe.get_mut(name).expect("same keys").as_mut_slice()[idx] = original + opts.step;
            let plus = eval(&probe)?;
            probe.get_mut(name).expect("same keys").as_mut_slice()[idx] = original - opts.step;
            let minus = eval(&probe)?;
            probe.get_mut(name).expect("same keys").as_mut_slice()[idx] = original;

            let numeric = (plus - minus) / (2.0 * opts.step);
            let a = grad.as_slice()[idx];
            max_abs = max_abs.max((a - numeric).abs());
            max_rel = max_rel.max(relative_error(a, numeric));
        }
        checks.push(ParamCheck {
            name: name.clone(),
            entries: values.len(),
            max_rel_err: max_rel,
            max_abs_err: max_abs,
            passed: max_rel <= opts.tolerance,
        });
    }
    let max_rel_err = checks.iter().fold(0.0f64, |m, c| m.max(c.max_rel_err));
    Ok(GradCheckReport {
        step: opts.step,
        tolerance: opts.tolerance,
        passed: checks.iter().all(|c| c.passed),
        params: checks,
        max_rel_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Matrix;

    fn store(entries: &[(&str, Matrix)]) -> ParamStore {
        let mut s = ParamStore::new();
        for (k, v) in entries {
            s.insert(*k, v.clone());
        }
        s
    }

    #[test]
    fn linear_function_is_exact() {
        let p = store(&[("w", Matrix::from_rows(&[[0.5, -1.5, 2.0]]))]);
        let r = grad_check(&p, GradCheckOptions::default(), |t, v| {
            let w = v.get("w")?;
            let x = t.leaf(Matrix::column(&[1.0, 2.0, 3.0]));
            t.matmul(w, x)
        })
        .unwrap();
        assert!(r.passed);
        assert!(r.max_rel_err < 1e-9, "{}", r.max_rel_err);
    }

    #[test]
    fn sigmoid_chain_depth_three() {
        let p = store(&[("x", Matrix::from_rows(&[[0.3, -1.7], [1.1, 0.2]]))]);
        let opts = GradCheckOptions {
            tolerance: 1e-6,
            ..Default::default()
        };
        let r = grad_check(&p, opts, |t, v| {
            let mut y = v.get("x")?;
            for _ in 0..3 {
                y = t.sigmoid(y);
            }
            Ok(t.sum(y))
        })
        .unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn corrupted_adjoint_is_reported() {
        let p = store(&[("x", Matrix::from_rows(&[[0.3, -1.7]]))]);
        let opts = GradCheckOptions {
            fault: Some(OpKind::Tanh),
            ..Default::default()
        };
        let r = grad_check(&p, opts, |t, v| {
            let y = t.tanh(v.get("x")?);
            Ok(t.sum(y))
        })
        .unwrap();
        assert!(!r.passed);
        assert_eq!(r.failing().next().unwrap().name, "x");
    }
}
