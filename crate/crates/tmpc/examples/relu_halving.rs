//! Helper-traffic halving. Every share pair the helper deals inside the
//! sign-bit pipeline can lose one of its halves to the k12 tape; this runs
//! the same ReLU with the optimization on and off and prints both sides.
//!
//!   cargo run --release --example relu_halving

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use tmpc::comm::Phase;
use tmpc::net::{local_mesh, run_parties, MeshKeys};
use tmpc::protocol::relu::relu;
use tmpc::protocol::{share_value, PartyId, ProtocolFlags};
use tmpc::ring;

fn main() -> tmpc::Result<()> {
    let n = 64 * 64;
    let mut rng = ChaCha20Rng::seed_from_u64(21);
    let values: Vec<u64> = (0..n)
        .map(|_| {
            let v = rng.gen_range(-(1i64 << 40)..(1i64 << 40));
            ring::from_signed(v)
        })
        .collect();
    let (x0, x1): (Vec<u64>, Vec<u64>) =
        values.iter().map(|&x| share_value(x, &mut rng)).unzip();

    let mut totals = [0u64; 2];
    let mut egress = [0u64; 2];
    for (slot, prf_opt) in [true, false].into_iter().enumerate() {
        let flags = ProtocolFlags { reshaped_conv: true, prf_opt };
        let ctxs = local_mesh(&MeshKeys::from_seed(9), flags, 9);
        let (results, ctxs) = run_parties(ctxs, |ctx| match ctx.id() {
            PartyId::P0 => relu(ctx, Some(&x0), n),
            PartyId::P1 => relu(ctx, Some(&x1), n),
            PartyId::P2 => relu(ctx, None, n),
        })?;
        // sanity: reconstruct equals cleartext ReLU
        let z: Vec<u64> = results[0]
            .as_ref()
            .unwrap()
            .iter()
            .zip(results[1].as_ref().unwrap())
            .map(|(&a, &b)| a.wrapping_add(b))
            .collect();
        assert!(z
            .iter()
            .zip(&values)
            .all(|(&got, &x)| got == if ring::to_signed(x) >= 0 { x } else { 0 }));

        let reports: Vec<_> = ctxs.iter().map(|c| c.comm_report()).collect();
        egress[slot] = reports[2].sent_elements(&Phase::ALL);
        totals[slot] = reports.iter().map(|r| r.sent_elements(&Phase::ALL)).sum();
    }

    println!("ReLU over a 64x64 tensor ({n} elements):");
    println!("  P2 egress, tape-derived shares on:  {:>9} elements", egress[0]);
    println!("  P2 egress, both shares sent:        {:>9} elements", egress[1]);
    println!("  -> helper egress ratio: {:.0}%", 100.0 * egress[0] as f64 / egress[1] as f64);
    let reduction = 100.0 * (totals[1] - totals[0]) as f64 / totals[1] as f64;
    println!("  overall ReLU traffic: {} vs {} elements ({reduction:.1}% reduction)", totals[0], totals[1]);
    Ok(())
}
