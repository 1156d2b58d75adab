// Record a small computation on a tape, read its gradients, and confirm them
// against central finite differences.

use hgnn::autodiff::{grad_check, GradCheckOptions, Matrix, ParamStore, Tape};

pub fn run() -> hgnn::Result<()> {
    // loss = sum(tanh(x W + b))
    let mut params = ParamStore::new();
    params.insert("w", Matrix::from_rows(&[[0.5, -0.3], [0.8, 0.1], [-0.2, 0.7]]));
    params.insert("b", Matrix::row_vector(&[0.1, -0.1]));
    let x = Matrix::from_rows(&[[1.0, 2.0, -1.0], [0.5, -0.5, 0.25]]);

    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    let xv = tape.leaf(x.clone());
    let z = tape.matmul(xv, vars.get("w")?)?;
    let z = tape.add_row(z, vars.get("b")?)?;
    let h = tape.tanh(z);
    let loss = tape.sum(h);
    let grads = vars.collect(&tape.backward(loss)?);
    println!("loss = {:.6}", tape.value(loss).item());
    println!("dL/db = {:?}", grads.require("b")?.as_slice());

    let report = grad_check(&params, GradCheckOptions::default(), |t, v| {
        let xv = t.leaf(x.clone());
        let z = t.matmul(xv, v.get("w")?)?;
        let z = t.add_row(z, v.get("b")?)?;
        let h = t.tanh(z);
        Ok(t.sum(h))
    })?;
    println!("finite-difference max relative error {:.2e}", report.max_rel_err);
    assert!(report.passed);
    Ok(())
}

#[allow(dead_code)]
fn main() -> hgnn::Result<()> {
    run()
}
