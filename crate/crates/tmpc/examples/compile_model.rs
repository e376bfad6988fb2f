//! Build a small classifier graph in code, round-trip it through the model
//! container format, and lower it to a fixed-point program.
//!
//!   cargo run --example compile_model

use tmpc::compile::compile_to_llil;
use tmpc::container::{parse_model, write_llil, write_model};
use tmpc::graph::OpKind;
use tmpc::models;

fn main() -> tmpc::Result<()> {
    // output(ArgMax(xW + b)) over a (1, 784) query
    let model = models::logistic_regression(784, 10, 7);

    let bytes = write_model(&model)?;
    println!("HLIL container: {} bytes", bytes.len());
    let parsed = parse_model(&bytes)?;

    println!("\nHLIL nodes:");
    for (id, node) in parsed.graph.nodes.iter().enumerate() {
        println!("  %{id} = {}{:?}", node.op.name(), node.inputs);
    }

    let program = compile_to_llil(&parsed, 15)?;
    println!("\nLLIL at scale 15:");
    for (id, node) in program.graph.nodes.iter().enumerate() {
        match &node.op {
            OpKind::ScaleDown { amount } => {
                println!("  %{id} = ScaleDown(%{}, {amount})", node.inputs[0])
            }
            op => println!("  %{id} = {}{:?}", op.name(), node.inputs),
        }
    }

    let llil_bytes = write_llil(&program)?;
    println!("\nLLIL container: {} bytes (i64 weights, scale in header)", llil_bytes.len());
    Ok(())
}
