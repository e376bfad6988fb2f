//! Convolution triple traffic, naive im2col granularity versus masking at
//! image granularity. The filter is small, so revealing the m x m masked
//! image instead of the q^2 x f^2 patch matrix saves an order of magnitude
//! or two.
//!
//!   cargo run --release --example conv_traffic

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use tmpc::comm::{total_elements, Phase};
use tmpc::net::{local_mesh, run_parties, MeshKeys};
use tmpc::protocol::conv::{conv2d_protocol, conv_cost_elements, ConvMode};
use tmpc::protocol::{share_tensor, PartyId, ProtocolFlags};
use tmpc::tensor::Tensor;

fn main() -> tmpc::Result<()> {
    println!(
        "{:>5} {:>4} {:>10} {:>10} {:>10} {:>10} {:>7}",
        "m", "f", "naive", "formula", "reshaped", "formula", "ratio"
    );
    for (m, f) in [(28usize, 5usize), (64, 11), (96, 7)] {
        let mut rng = ChaCha20Rng::seed_from_u64((m + f) as u64);
        let image = Tensor::new(vec![m, m], (0..m * m).map(|_| rng.gen()).collect())?;
        let filter = Tensor::new(vec![f, f], (0..f * f).map(|_| rng.gen()).collect())?;
        let (i0, i1) = share_tensor(&image, &mut rng);
        let (f0, f1) = share_tensor(&filter, &mut rng);

        let mut measured = [0u64; 2];
        for (slot, mode) in [ConvMode::Naive, ConvMode::Reshaped].into_iter().enumerate() {
            let ctxs = local_mesh(&MeshKeys::from_seed(13), ProtocolFlags::default(), 13);
            let (_, ctxs) = run_parties(ctxs, |ctx| match ctx.id() {
                PartyId::P0 => conv2d_protocol(ctx, Some(&i0), Some(&f0), (m, m), (f, f), mode),
                PartyId::P1 => conv2d_protocol(ctx, Some(&i1), Some(&f1), (m, m), (f, f), mode),
                PartyId::P2 => conv2d_protocol(ctx, None, None, (m, m), (f, f), mode),
            })?;
            let reports: Vec<_> = ctxs.iter().map(|c| c.comm_report()).collect();
            measured[slot] = total_elements(&reports, &Phase::REVEAL);
        }
        println!(
            "{:>5} {:>4} {:>10} {:>10} {:>10} {:>10} {:>6.1}x",
            m,
            f,
            measured[0],
            conv_cost_elements(m, f, ConvMode::Naive),
            measured[1],
            conv_cost_elements(m, f, ConvMode::Reshaped),
            measured[0] as f64 / measured[1] as f64,
        );
    }
    println!("\n(measured reveal-phase elements match the analytic costs exactly)");
    Ok(())
}
