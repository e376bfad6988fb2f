//! Whole-program MPC execution against the fixed-point interpreter, plus
//! the TCP mesh path.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use tmpc::comm::{check_symmetry, total_elements, Phase};
use tmpc::compile::compile_to_llil;
use tmpc::dealer::{deal_shares, public_program};
use tmpc::fixed::quantize;
use tmpc::graph::{Graph, InputSpec, LlilProgram, Node, OpKind, Padding};
use tmpc::interp::{eval_fixed, eval_float};
use tmpc::models;
use tmpc::net::{connect_mesh, local_mesh, run_parties, MeshKeys, PartyConfig};
use tmpc::protocol::conv::{conv_cost_elements, ConvMode};
use tmpc::protocol::exec::run_llil_mpc;
use tmpc::protocol::{PartyContext, PartyId, ProtocolFlags};
use tmpc::tensor::{DType, Tensor, TensorData};

fn run_mpc(
    program: &LlilProgram,
    input: &Tensor<u64>,
    seed: u64,
) -> (TensorData, [PartyContext; 3]) {
    let dealt = deal_shares(program, input, seed).unwrap();
    let public = public_program(program);
    let ctxs = local_mesh(&MeshKeys::from_seed(seed), ProtocolFlags::default(), seed);
    let (results, ctxs) = run_parties(ctxs, |ctx| match ctx.id() {
        PartyId::P0 => run_llil_mpc(ctx, program, Some(&dealt.p0)),
        PartyId::P1 => run_llil_mpc(ctx, program, Some(&dealt.p1)),
        PartyId::P2 => run_llil_mpc(ctx, &public, None),
    })
    .unwrap();
    let [r0, r1, r2] = results;
    assert!(r1.is_none() && r2.is_none(), "only the recipient learns the output");
    (r0.unwrap(), ctxs)
}

#[test]
fn classifier_pipeline_matches_fixed_interpreter() {
    let model = models::logistic_regression(32, 10, 41);
    let program = compile_to_llil(&model, 15).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    for trial in 0..20 {
        let input_f = models::random_input(&mut rng, vec![1, 32], 0.0, 1.0);
        let input = quantize(&input_f, 15).unwrap();
        let expected = eval_fixed(&program, &input).unwrap();
        let (got, ctxs) = run_mpc(&program, &input, 1000 + trial);
        let got = got.as_i64().unwrap().clone();
        // ArgMax indices are immune to the +-1 truncation slack away from
        // decision boundaries; seeded trials stay clean.
        assert_eq!(got.data(), expected.data(), "trial {trial}");
        check_symmetry(&ctxs.iter().map(|c| c.comm_report()).collect::<Vec<_>>()).unwrap();
    }
}

#[test]
fn conv_model_with_pooling_and_padding() {
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    // Conv2D(SAME, stride 2) -> ReLU -> MaxPool -> AvgPool fed by quantized data.
    let graph = Graph {
        nodes: vec![
            Node { op: OpKind::Input, inputs: vec![] },
            Node { op: OpKind::Const, inputs: vec![] },
            Node { op: OpKind::Conv2D { stride: 2, padding: Padding::Same }, inputs: vec![0, 1] },
            Node { op: OpKind::ScaleDown { amount: 10 }, inputs: vec![2] },
            Node { op: OpKind::ReLU, inputs: vec![3] },
            Node { op: OpKind::MaxPool { window: 2, stride: 1 }, inputs: vec![4] },
            Node { op: OpKind::AvgPool { window: 2, stride: 2 }, inputs: vec![5] },
        ],
        input_spec: InputSpec { shape: vec![9, 9], dtype: DType::I64 },
        output: 6,
    };
    let filter = quantize(&models::random_input(&mut rng, vec![3, 3], -1.0, 1.0), 10).unwrap();
    let program = LlilProgram {
        scale: 10,
        graph,
        weights: BTreeMap::from([(1usize, filter)]),
    };
    program.validate().unwrap();

    for trial in 0..5 {
        let input =
            quantize(&models::random_input(&mut rng, vec![9, 9], -1.0, 1.0), 10).unwrap();
        let expected = eval_fixed(&program, &input).unwrap();
        let (got, _) = run_mpc(&program, &input, 2000 + trial);
        let got = got.as_i64().unwrap().clone();
        assert_eq!(got.shape(), expected.shape());
        // One truncation sits on the dataflow path (the ScaleDown), and the
        // public AvgPool division adds at most one more unit of slack.
        for (g, e) in got.data().iter().zip(expected.data()) {
            let diff = (g.wrapping_sub(*e) as i64).abs();
            assert!(diff <= 2, "trial {trial}: {g} vs {e}");
        }
    }
}

#[test]
fn single_add_costs_nothing_but_the_reveal() {
    let graph = Graph {
        nodes: vec![
            Node { op: OpKind::Input, inputs: vec![] },
            Node { op: OpKind::Const, inputs: vec![] },
            Node { op: OpKind::Add, inputs: vec![0, 1] },
        ],
        input_spec: InputSpec { shape: vec![1, 4], dtype: DType::I64 },
        output: 2,
    };
    let program = LlilProgram {
        scale: 15,
        graph,
        weights: BTreeMap::from([(1usize, Tensor::new(vec![1, 4], vec![1, 2, 3, 4]).unwrap())]),
    };
    let input = Tensor::new(vec![1, 4], vec![10, 20, 30, 40]).unwrap();
    let (got, ctxs) = run_mpc(&program, &input, 3000);
    assert_eq!(got.as_i64().unwrap().data(), &[11, 22, 33, 44]);

    let reports: Vec<_> = ctxs.iter().map(|c| c.comm_report()).collect();
    // additive homomorphism: zero protocol communication beyond the reveal
    let protocol_phases = [Phase::BeaverE, Phase::BeaverF, Phase::BeaverC, Phase::PcMsg, Phase::MsbDeal];
    assert_eq!(total_elements(&reports, &protocol_phases), 0);
    assert_eq!(total_elements(&reports, &[Phase::RevealOutput]), 4);
}

#[test]
fn single_conv_reveal_counts_match_reshaped_formula() {
    let mut rng = ChaCha20Rng::seed_from_u64(10);
    let (m, f) = (28usize, 5usize);
    let graph = Graph {
        nodes: vec![
            Node { op: OpKind::Input, inputs: vec![] },
            Node { op: OpKind::Const, inputs: vec![] },
            Node { op: OpKind::Conv2D { stride: 1, padding: Padding::Valid }, inputs: vec![0, 1] },
            Node { op: OpKind::ScaleDown { amount: 12 }, inputs: vec![2] },
        ],
        input_spec: InputSpec { shape: vec![m, m], dtype: DType::I64 },
        output: 3,
    };
    let filter = quantize(&models::random_input(&mut rng, vec![f, f], -1.0, 1.0), 12).unwrap();
    let program = LlilProgram { scale: 12, graph, weights: BTreeMap::from([(1usize, filter)]) };
    let input = quantize(&models::random_input(&mut rng, vec![m, m], -1.0, 1.0), 12).unwrap();

    let (_, ctxs) = run_mpc(&program, &input, 4000);
    let reports: Vec<_> = ctxs.iter().map(|c| c.comm_report()).collect();
    let revealed = total_elements(&reports, &Phase::REVEAL);
    assert_eq!(revealed, conv_cost_elements(m, f, ConvMode::Reshaped));
}

fn free_ports(n: usize) -> Vec<u16> {
    let listeners: Vec<std::net::TcpListener> = (0..n)
        .map(|_| std::net::TcpListener::bind("127.0.0.1:0").unwrap())
        .collect();
    listeners.iter().map(|l| l.local_addr().unwrap().port()).collect()
}

fn tcp_configs(ports: &[u16], seed: u64) -> [PartyConfig; 3] {
    let keys = MeshKeys::from_seed(seed);
    let addr = |p: u16| format!("127.0.0.1:{p}");
    let mk = |party: u8| {
        let key_names: [(&str, &tmpc::prf::PrfKey); 2] = match party {
            0 => [("k01", &keys.k01), ("k02", &keys.k02)],
            1 => [("k01", &keys.k01), ("k12", &keys.k12)],
            _ => [("k02", &keys.k02), ("k12", &keys.k12)],
        };
        PartyConfig {
            party_id: party,
            listen: addr(ports[party as usize]),
            peers: (0..3)
                .filter(|&p| p != party)
                .map(|p| (p, addr(ports[p as usize])))
                .collect(),
            keys: key_names.iter().map(|(n, k)| (n.to_string(), k.to_hex())).collect(),
            output_recipient: party == 0,
            reshaped_conv: true,
            prf_opt: true,
            seed,
            timeout_ms: 10_000,
        }
    };
    [mk(0), mk(1), mk(2)]
}

#[test]
fn tcp_mesh_runs_a_classifier() {
    let model = models::logistic_regression(16, 4, 77);
    let program = compile_to_llil(&model, 14).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let input_f = models::random_input(&mut rng, vec![1, 16], 0.0, 1.0);
    let input = quantize(&input_f, 14).unwrap();
    let expected = eval_fixed(&program, &input).unwrap();

    let dealt = deal_shares(&program, &input, 5).unwrap();
    let public = public_program(&program);
    let configs = tcp_configs(&free_ports(3), 55);

    let results = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| {
                let program = &program;
                let public = &public;
                let dealt = &dealt;
                s.spawn(move || {
                    let mut ctx = connect_mesh(cfg).unwrap();
                    let shares = match cfg.party_id {
                        0 => Some(&dealt.p0),
                        1 => Some(&dealt.p1),
                        _ => None,
                    };
                    let prog = if cfg.party_id == 2 { public } else { program };
                    run_llil_mpc(&mut ctx, prog, shares).unwrap()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect::<Vec<_>>()
    });
    let got = results[0].as_ref().unwrap().as_i64().unwrap().clone();
    assert_eq!(got.data(), expected.data());
    assert!(results[1].is_none() && results[2].is_none());
}

#[test]
fn tcp_handshake_rejects_bad_version() {
    use std::io::{Read, Write};
    let ports = free_ports(1);
    let addr = format!("127.0.0.1:{}", ports[0]);
    let listener = std::net::TcpListener::bind(&addr).unwrap();
    let bad_peer = std::thread::spawn(move || {
        let (mut s, _) = listener.accept().unwrap();
        let mut hello = [0u8; 6];
        s.read_exact(&mut hello).unwrap();
        // magic ok, version wrong
        s.write_all(b"TMPW\x02\x00").unwrap();
    });

    let mut cfgs = tcp_configs(&[0, ports[0], 0], 1);
    // make P2 dial only the bad peer first: party 2 dials party 0
    cfgs[2].peers.insert(0, addr);
    cfgs[2].timeout_ms = 2000;
    let err = connect_mesh(&cfgs[2]).map(|_| ()).unwrap_err();
    assert!(err.to_string().contains("version mismatch"), "{err}");
    bad_peer.join().unwrap();
}

#[test]
fn tcp_missing_peer_times_out_with_name() {
    let ports = free_ports(3);
    let mut cfgs = tcp_configs(&ports, 2);
    cfgs[2].timeout_ms = 300;
    // nobody is listening on party 0's port
    let err = connect_mesh(&cfgs[2]).map(|_| ()).unwrap_err();
    assert!(err.to_string().contains("party 0"), "{err}");
}

#[test]
fn two_layer_float_fixed_mpc_agreement() {
    // the full chain on a model with a hidden ReLU layer
    let model = models::two_layer(16, 8, 5, 1.0, 1.0, 3);
    let program = compile_to_llil(&model, 14).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    let mut agree = 0;
    let total = 25;
    for trial in 0..total {
        let input_f = models::random_input(&mut rng, vec![1, 16], -1.0, 1.0);
        let float_idx = eval_float(&model, &input_f).unwrap().data()[0] as u64;
        let input = quantize(&input_f, 14).unwrap();
        let (got, _) = run_mpc(&program, &input, 5000 + trial);
        if got.as_i64().unwrap().data()[0] == float_idx {
            agree += 1;
        }
    }
    assert!(agree >= total - 1, "agreement {agree}/{total}");
}
