//! Compare the floating-point reference interpreter with the fixed-point
//! one on the same model across a range of scales: the quantization error
//! shrinks as s grows, until it doesn't matter for classification.
//!
//!   cargo run --example fixed_vs_float

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use tmpc::compile::compile_to_llil;
use tmpc::fixed::{dequantize, quantize};
use tmpc::interp::{eval_fixed, eval_float};
use tmpc::models;

fn main() -> tmpc::Result<()> {
    let model = models::two_layer(16, 8, 5, 1.0, 1.0, 3);
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let inputs: Vec<_> =
        (0..200).map(|_| models::random_input(&mut rng, vec![1, 16], -1.0, 1.0)).collect();

    println!("{:>6} {:>12} {:>11}", "scale", "max |err|", "agreement");
    for s in [4u32, 6, 8, 10, 12, 15, 18, 20] {
        let program = compile_to_llil(&model, s)?;
        // compare the pre-argmax logits by evaluating the graph up to Add
        let mut agree = 0usize;
        let mut max_err = 0f64;
        for input in &inputs {
            let float_idx = eval_float(&model, input)?.data()[0];
            let q = quantize(input, s)?;
            let fixed_idx = eval_fixed(&program, &q)?.data()[0];
            if float_idx as u64 == fixed_idx {
                agree += 1;
            }
            // also track elementwise error on the quantized input itself
            let back = dequantize(&q, s)?;
            for (a, b) in back.data().iter().zip(input.data()) {
                max_err = max_err.max((*a as f64 - *b as f64).abs());
            }
        }
        println!(
            "{:>6} {:>12.6} {:>10.1}%",
            s,
            max_err,
            agree as f64 / inputs.len() as f64 * 100.0
        );
    }
    println!("\n(input round-trip error is bounded by 2^-s; agreement climbs with s)");
    Ok(())
}
