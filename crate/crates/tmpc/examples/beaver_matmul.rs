//! Multiply two secret-shared matrices with a Beaver triple whose masks
//! come off the pairwise PRF tapes: three in-memory parties, one triple,
//! and counters matching 2(ab + bc) + ac revealed ring elements.
//!
//!   cargo run --example beaver_matmul

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use tmpc::comm::{check_symmetry, total_elements, Phase};
use tmpc::net::{local_mesh, run_parties, MeshKeys};
use tmpc::protocol::beaver::{beaver_matmul, MatDims};
use tmpc::protocol::{reconstruct_tensor, share_tensor, PartyId, ProtocolFlags};
use tmpc::ring;
use tmpc::tensor::Tensor;

fn main() -> tmpc::Result<()> {
    let (a, b, c) = (32, 48, 16);
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let x = Tensor::new(vec![a, b], (0..a * b).map(|_| rng.gen()).collect())?;
    let y = Tensor::new(vec![b, c], (0..b * c).map(|_| rng.gen()).collect())?;
    let expected = ring::mat_mul(x.data(), y.data(), a, b, c);

    // the dealer splits X and Y; P2 never sees data
    let (x0, x1) = share_tensor(&x, &mut rng);
    let (y0, y1) = share_tensor(&y, &mut rng);
    let dims = MatDims { a, b, c };

    let ctxs = local_mesh(&MeshKeys::from_seed(42), ProtocolFlags::default(), 42);
    let (results, ctxs) = run_parties(ctxs, |ctx| match ctx.id() {
        PartyId::P0 => beaver_matmul(ctx, Some(&x0), Some(&y0), dims),
        PartyId::P1 => beaver_matmul(ctx, Some(&x1), Some(&y1), dims),
        PartyId::P2 => beaver_matmul(ctx, None, None, dims),
    })?;

    let [r0, r1, _] = results;
    let z = reconstruct_tensor(&r0.unwrap(), &r1.unwrap());
    assert_eq!(z.data(), expected.as_slice());
    println!("reconstruct(Z) == X . Y mod 2^64 for ({a}x{b}) . ({b}x{c})  [ok]");

    let reports: Vec<_> = ctxs.iter().map(|ctx| ctx.comm_report()).collect();
    check_symmetry(&reports)?;
    let holders = reports[0].sent_elements(&[Phase::BeaverE, Phase::BeaverF])
        + reports[1].sent_elements(&[Phase::BeaverE, Phase::BeaverF]);
    let helper = reports[2].sent_elements(&Phase::ALL);
    println!("\nP0<->P1 reveal traffic: {holders} elements (formula 2(ab+bc) = {})", 2 * (a * b + b * c));
    println!("P2 egress:              {helper} elements (formula ac = {})", a * c);
    println!("total revealed:         {} elements", total_elements(&reports, &Phase::REVEAL));
    Ok(())
}
