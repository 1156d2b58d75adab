// Finite-difference checks of every tape operation and every model, plus the
// same suite with one operation's adjoint deliberately corrupted.

use hgnn::autodiff::OpKind;
use hgnn::gradsuite::run_suite;

pub fn run() -> hgnn::Result<()> {
    let clean = run_suite(11, None)?;
    for e in &clean.entries {
        println!("{:<28} {:.2e}", e.name, e.max_rel_err);
    }
    assert!(clean.passed);

    let broken = run_suite(11, Some(OpKind::Hadamard))?;
    let failing: Vec<&str> = broken.failing().map(|e| e.name.as_str()).collect();
    println!("with a corrupted hadamard adjoint: {} checks fail", failing.len());
    assert!(failing.contains(&"hadamard"));
    Ok(())
}

#[allow(dead_code)]
fn main() -> hgnn::Result<()> {
    run()
}
