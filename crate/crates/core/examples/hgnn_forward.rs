// One day through the full HGNN on a toy universe: curb logits, attention
// weights over all stocks, and the parameter count of each ablation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hgnn::autodiff::Tape;
use hgnn::gradsuite::{toy_config, toy_day};
use hgnn::model::{Model, Preset};

pub fn run() -> hgnn::Result<()> {
    let config = toy_config();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (day, graph) = toy_day(&mut rng, 6, &config, 3, &[5]);
    let op = graph.normalized_operator();

    let model = Model::hgnn(config.clone())?;
    let params = model.init_params(1);
    let mut tape = Tape::new();
    let vars = params.register(&mut tape);
    let out = model.forward(&mut tape, &vars, &day, Some(&op))?;
    println!("curb nodes {:?}", day.curb_nodes);
    println!("logits     {:?}", tape.value(out.logits).as_slice());
    let w = tape.value(out.attention.expect("market view enabled"));
    println!("attention  {:?} (sum {})", w.as_slice(), w.sum());

    for preset in Preset::ALL {
        let m = Model::hgnn(config.clone().with_preset(preset))?;
        println!("{:<14} {} parameters", preset.name(), m.parameter_count());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> hgnn::Result<()> {
    run()
}
