//! Sweep the fixed-point scale on a model whose intermediates overflow near
//! the top of the range and whose logit gaps blur at the bottom, then print
//! the whole table. Too few fractional bits lose accuracy, too many wrap.
//!
//!   cargo run --example sweep_precision

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use tmpc::interp::eval_float;
use tmpc::models;
use tmpc::sweep::{sweep_scale, SweepConfig, SweepMetric};

fn main() -> tmpc::Result<()> {
    let model = models::two_layer(32, 16, 10, 240.0, 0.03, 21);
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let calibration: Vec<_> = (0..400)
        .map(|_| {
            let input = models::random_input(&mut rng, vec![1, 32], -240.0, 240.0);
            let reference = eval_float(&model, &input)?;
            Ok((input, reference))
        })
        .collect::<tmpc::Result<_>>()?;

    let cfg = SweepConfig { s_min: 8, s_max: 24, calibration, metric: SweepMetric::ArgmaxAgreement };
    let report = sweep_scale(&model, &cfg)?;

    println!("{:>6} {:>11} {:>9}", "scale", "agreement", "overflow");
    for e in &report.entries {
        println!(
            "{:>6} {:>10.1}% {:>9}",
            e.scale,
            e.metric * 100.0,
            if e.overflow { "yes" } else { "" }
        );
    }
    println!("\nchosen scale: {} (ties break to the smaller s)", report.chosen);
    Ok(())
}
