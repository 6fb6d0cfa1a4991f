use std::fmt::Write;

use crate::network::Network;
use crate::scalar::Scalar;

/// Renders `net` as a Graphviz digraph laid out left to right in three
/// ranks. Inactive nodes are left out. Edges between active nodes are solid
/// when the weight is live and dashed when it has been pruned.
pub fn export_dot<T: Scalar>(net: &Network<T>) -> String {
    let n = net.n_inputs();
    let bias = net.bias_input();
    let inputs: Vec<usize> = (0..n).filter(|&l| net.input_active()[l]).collect();
    let hidden: Vec<usize> = (0..net.n_hidden()).filter(|&m| net.hidden_active()[m]).collect();

    let mut out = String::from("digraph network {\n  rankdir=LR;\n  node [shape=circle];\n");
    let rank = |out: &mut String, names: Vec<(String, String)>| {
        out.push_str("  { rank=same;");
        for (id, label) in names {
            let _ = write!(out, " {id} [label=\"{label}\"];");
        }
        out.push_str(" }\n");
    };
    rank(
        &mut out,
        inputs
            .iter()
            .map(|&l| {
                let label = if bias && l + 1 == n { "bias".to_string() } else { format!("x{}", l + 1) };
                (format!("x{l}"), label)
            })
            .collect(),
    );
    if !hidden.is_empty() {
        rank(&mut out, hidden.iter().map(|&m| (format!("h{m}"), format!("h{}", m + 1))).collect());
    }
    rank(
        &mut out,
        (0..net.n_outputs()).map(|p| (format!("y{p}"), format!("y{}", p + 1))).collect(),
    );

    let edge = |out: &mut String, from: String, to: String, live: bool, weight: f64| {
        if live {
            let _ = writeln!(out, "  {from} -> {to} [label=\"{weight:.3}\"];");
        } else {
            let _ = writeln!(out, "  {from} -> {to} [style=dashed];");
        }
    };
    for &m in &hidden {
        for &l in &inputs {
            edge(&mut out, format!("x{l}"), format!("h{m}"), net.w_mask()[[m, l]], net.w()[[m, l]].as_f64());
        }
    }
    for p in 0..net.n_outputs() {
        for &m in &hidden {
            edge(&mut out, format!("h{m}"), format!("y{p}"), net.v_mask()[[p, m]], net.v()[[p, m]].as_f64());
        }
    }
    out.push_str("}\n");
    out
}
