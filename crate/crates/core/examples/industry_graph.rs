// Build the industry graph, inspect its normalization coefficients and
// compare the sparse operator with the dense normalized adjacency.

use std::collections::BTreeMap;

use hgnn::graph::IndustryGraph;

pub fn run() -> hgnn::Result<()> {
    let industries: BTreeMap<String, String> = [
        ("AAA", "banks"),
        ("BBB", "banks"),
        ("CCC", "banks"),
        ("DDD", "energy"),
        ("EEE", "energy"),
        ("FFF", "retail"),
    ]
    .into_iter()
    .map(|(s, i)| (s.to_string(), i.to_string()))
    .collect();
    let g = IndustryGraph::build(&industries)?;
    println!("{} nodes, {} edges", g.node_count(), g.edge_count());
    for s in 0..g.node_count() {
        println!("  {} degree {} neighbors {:?}", g.stock_id(s), g.degree(s), g.neighbors(s));
    }
    println!("r(AAA, BBB) = {}", g.sym_norm_coefficient(0, 1)?);

    let sparse = g.normalized_operator().to_dense();
    let dense = g.to_dense_normalized();
    println!("sparse vs dense max abs diff {:.1e}", sparse.max_abs_diff(&dense));

    let mut edges = Vec::new();
    g.write_edge_list(&mut edges).expect("in-memory write");
    print!("{}", String::from_utf8_lossy(&edges));
    Ok(())
}

#[allow(dead_code)]
fn main() -> hgnn::Result<()> {
    run()
}
