//! The whole pipeline in one process: build a model, compile it, deal
//! shares, run the three parties over in-memory channels, and check the
//! revealed class against both cleartext backends.
//!
//!   cargo run --example mpc_inference

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use tmpc::compile::compile_to_llil;
use tmpc::dealer::{deal_shares, public_program};
use tmpc::fixed::quantize;
use tmpc::interp::{eval_fixed, eval_float};
use tmpc::models;
use tmpc::net::{local_mesh, run_parties, MeshKeys};
use tmpc::protocol::exec::run_llil_mpc;
use tmpc::protocol::{PartyId, ProtocolFlags};

fn main() -> tmpc::Result<()> {
    let model = models::logistic_regression(784, 10, 7);
    let program = compile_to_llil(&model, 15)?;
    println!("compiled classifier at scale 15 ({} nodes)", program.graph.nodes.len());

    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let mut agree = 0;
    let total = 25;
    for trial in 0..total {
        let input_f = models::random_input(&mut rng, vec![1, 784], 0.0, 1.0);
        let float_class = eval_float(&model, &input_f)?.data()[0] as u64;
        let input = quantize(&input_f, 15)?;
        let fixed_class = eval_fixed(&program, &input)?.data()[0];

        let dealt = deal_shares(&program, &input, trial)?;
        let public = public_program(&program);
        let ctxs = local_mesh(&MeshKeys::from_seed(trial), ProtocolFlags::default(), trial);
        let (results, _) = run_parties(ctxs, |ctx| match ctx.id() {
            PartyId::P0 => run_llil_mpc(ctx, &program, Some(&dealt.p0)),
            PartyId::P1 => run_llil_mpc(ctx, &program, Some(&dealt.p1)),
            PartyId::P2 => run_llil_mpc(ctx, &public, None),
        })?;
        let mpc_class = match results[0].as_ref().unwrap() {
            tmpc::TensorData::I64(t) => t.data()[0],
            _ => unreachable!(),
        };
        if trial < 5 {
            println!(
                "  input {trial}: float={float_class} fixed={fixed_class} mpc={mpc_class}"
            );
        }
        if mpc_class == float_class {
            agree += 1;
        }
    }
    println!("mpc class == float class on {agree}/{total} random inputs");
    Ok(())
}
