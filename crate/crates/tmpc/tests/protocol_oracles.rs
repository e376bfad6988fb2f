//! Every protocol op against its cleartext oracle over an in-memory mesh,
//! plus the per-op traffic formulas.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use tmpc::comm::{check_symmetry, total_elements, CommReport, Phase};
use tmpc::graph::Padding;
use tmpc::interp::conv2d_ref;
use tmpc::net::{local_mesh, run_parties, MeshKeys};
use tmpc::protocol::argmax::argmax_protocol;
use tmpc::protocol::beaver::{beaver_matmul, MatDims};
use tmpc::protocol::compare::{bits_of, private_compare};
use tmpc::protocol::conv::{conv2d_protocol, conv_cost_elements, ConvMode};
use tmpc::protocol::convert::{compute_msb, share_convert};
use tmpc::protocol::pool::maxpool;
use tmpc::protocol::relu::{drelu, relu, select_share};
use tmpc::protocol::{
    reconstruct_tensor, share_tensor, share_value, PartyContext, PartyId, ProtocolFlags,
};
use tmpc::ring::{self, fp67, odd};
use tmpc::tensor::Tensor;

fn mesh(seed: u64) -> [PartyContext; 3] {
    local_mesh(&MeshKeys::from_seed(seed), ProtocolFlags::default(), seed ^ 0x5eed)
}

fn reports(ctxs: &[PartyContext; 3]) -> Vec<CommReport> {
    ctxs.iter().map(|c| c.comm_report()).collect()
}

/// Split a vector into two additive share vectors.
fn share_vec(xs: &[u64], rng: &mut ChaCha20Rng) -> (Vec<u64>, Vec<u64>) {
    let mut a = Vec::with_capacity(xs.len());
    let mut b = Vec::with_capacity(xs.len());
    for &x in xs {
        let (p, q) = share_value(x, rng);
        a.push(p);
        b.push(q);
    }
    (a, b)
}

fn reconstruct_vec(a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().zip(b).map(|(&x, &y)| x.wrapping_add(y)).collect()
}

/// Signed values with bounded magnitude, as quantized data would be.
fn bounded(rng: &mut ChaCha20Rng, bits: u32) -> u64 {
    let v = rng.gen_range(0..(1i64 << bits));
    ring::from_signed(if rng.gen() { v } else { -v })
}

#[test]
fn beaver_matmul_known_product() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let x = Tensor::new(vec![2, 2], vec![1, 2, 3, 4]).unwrap();
    let y = Tensor::new(vec![2, 2], vec![5, 6, 7, 8]).unwrap();
    let (x0, x1) = share_tensor(&x, &mut rng);
    let (y0, y1) = share_tensor(&y, &mut rng);
    let dims = MatDims { a: 2, b: 2, c: 2 };

    let (results, ctxs) = run_parties(mesh(1), |ctx| match ctx.id() {
        PartyId::P0 => beaver_matmul(ctx, Some(&x0), Some(&y0), dims),
        PartyId::P1 => beaver_matmul(ctx, Some(&x1), Some(&y1), dims),
        PartyId::P2 => beaver_matmul(ctx, None, None, dims),
    })
    .unwrap();

    let [r0, r1, _] = results;
    let z = reconstruct_tensor(&r0.unwrap(), &r1.unwrap());
    assert_eq!(z.data(), &[19, 22, 43, 50]);
    check_symmetry(&reports(&ctxs)).unwrap();
}

#[test]
fn beaver_matmul_random_oracle_and_counters() {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let (a, b, c) = (16, 16, 16);
    for trial in 0..20 {
        let x = Tensor::new(vec![a, b], (0..a * b).map(|_| rng.gen()).collect()).unwrap();
        let y = Tensor::new(vec![b, c], (0..b * c).map(|_| rng.gen()).collect()).unwrap();
        let expected = ring::mat_mul(x.data(), y.data(), a, b, c);
        let (x0, x1) = share_tensor(&x, &mut rng);
        let (y0, y1) = share_tensor(&y, &mut rng);
        let dims = MatDims { a, b, c };

        let (results, ctxs) = run_parties(mesh(100 + trial), |ctx| match ctx.id() {
            PartyId::P0 => beaver_matmul(ctx, Some(&x0), Some(&y0), dims),
            PartyId::P1 => beaver_matmul(ctx, Some(&x1), Some(&y1), dims),
            PartyId::P2 => beaver_matmul(ctx, None, None, dims),
        })
        .unwrap();
        let [r0, r1, _] = results;
        let z = reconstruct_tensor(&r0.unwrap(), &r1.unwrap());
        assert_eq!(z.data(), expected.as_slice());

        // 2(ab + bc) elements between P0<->P1 plus ac elements P2->P0.
        let reports = reports(&ctxs);
        check_symmetry(&reports).unwrap();
        let p0p1: u64 = reports[0].sent_elements(&[Phase::BeaverE, Phase::BeaverF])
            + reports[1].sent_elements(&[Phase::BeaverE, Phase::BeaverF]);
        assert_eq!(p0p1 as usize, 2 * (a * b + b * c));
        let p2_egress = reports[2].sent_elements(&Phase::ALL);
        assert_eq!(p2_egress as usize, a * c);
    }
}

#[test]
fn conv_all_ones_and_both_modes_match_reference() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);

    // 3x3 all-ones image, 2x2 all-ones filter -> 2x2 of 4
    let image = Tensor::filled(vec![3, 3], 1u64);
    let filter = Tensor::filled(vec![2, 2], 1u64);
    for mode in [ConvMode::Naive, ConvMode::Reshaped] {
        let (i0, i1) = share_tensor(&image, &mut rng);
        let (f0, f1) = share_tensor(&filter, &mut rng);
        let (results, _) = run_parties(mesh(4), |ctx| match ctx.id() {
            PartyId::P0 => conv2d_protocol(ctx, Some(&i0), Some(&f0), (3, 3), (2, 2), mode),
            PartyId::P1 => conv2d_protocol(ctx, Some(&i1), Some(&f1), (3, 3), (2, 2), mode),
            PartyId::P2 => conv2d_protocol(ctx, None, None, (3, 3), (2, 2), mode),
        })
        .unwrap();
        let [r0, r1, _] = results;
        let z = reconstruct_tensor(&r0.unwrap(), &r1.unwrap());
        assert_eq!(z.data(), &[4, 4, 4, 4]);
    }

    // random 5x5 image, 3x3 filter: protocol equals conv2d_ref elementwise
    for trial in 0..10 {
        let image = Tensor::new(vec![5, 5], (0..25).map(|_| rng.gen()).collect()).unwrap();
        let filter = Tensor::new(vec![3, 3], (0..9).map(|_| rng.gen()).collect()).unwrap();
        let expected = conv2d_ref(&image, &filter, 1, Padding::Valid).unwrap();
        for mode in [ConvMode::Naive, ConvMode::Reshaped] {
            let (i0, i1) = share_tensor(&image, &mut rng);
            let (f0, f1) = share_tensor(&filter, &mut rng);
            let (results, _) = run_parties(mesh(40 + trial), |ctx| match ctx.id() {
                PartyId::P0 => conv2d_protocol(ctx, Some(&i0), Some(&f0), (5, 5), (3, 3), mode),
                PartyId::P1 => conv2d_protocol(ctx, Some(&i1), Some(&f1), (5, 5), (3, 3), mode),
                PartyId::P2 => conv2d_protocol(ctx, None, None, (5, 5), (3, 3), mode),
            })
            .unwrap();
            let [r0, r1, _] = results;
            let z = reconstruct_tensor(&r0.unwrap(), &r1.unwrap());
            assert_eq!(z, expected, "mode {mode:?}");
        }
    }
}

#[test]
fn conv_traffic_matches_formulas() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let (m, f) = (12, 3);
    for mode in [ConvMode::Naive, ConvMode::Reshaped] {
        let image = Tensor::new(vec![m, m], (0..m * m).map(|_| rng.gen()).collect()).unwrap();
        let filter = Tensor::new(vec![f, f], (0..f * f).map(|_| rng.gen()).collect()).unwrap();
        let (i0, i1) = share_tensor(&image, &mut rng);
        let (f0, f1) = share_tensor(&filter, &mut rng);
        let (_, ctxs) = run_parties(mesh(6), |ctx| match ctx.id() {
            PartyId::P0 => conv2d_protocol(ctx, Some(&i0), Some(&f0), (m, m), (f, f), mode),
            PartyId::P1 => conv2d_protocol(ctx, Some(&i1), Some(&f1), (m, m), (f, f), mode),
            PartyId::P2 => conv2d_protocol(ctx, None, None, (m, m), (f, f), mode),
        })
        .unwrap();
        let reports = reports(&ctxs);
        check_symmetry(&reports).unwrap();
        let revealed = total_elements(&reports, &Phase::REVEAL);
        assert_eq!(revealed, conv_cost_elements(m, f, mode), "mode {mode:?}");
    }
}

#[test]
fn private_compare_truth_table() {
    // (x, r, beta) -> beta xor (x > r)
    let cases = [(5u64, 3u64, 0u64, 1u64), (3, 3, 0, 0), (7, 2, 1, 0)];
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    for &(x, r, beta, expected) in &cases {
        let bits = bits_of(&[x]);
        let (b0, b1): (Vec<u64>, Vec<u64>) = bits
            .iter()
            .map(|&b| {
                let s0 = rng.gen_range(0..fp67::P);
                (s0, fp67::sub(b, s0))
            })
            .unzip();
        let (results, _) = run_parties(mesh(8), |ctx| match ctx.id() {
            PartyId::P0 => private_compare(ctx, Some(&b0), Some(&[r]), Some(&[beta]), 1),
            PartyId::P1 => private_compare(ctx, Some(&b1), Some(&[r]), Some(&[beta]), 1),
            PartyId::P2 => private_compare(ctx, None, None, None, 1),
        })
        .unwrap();
        assert_eq!(results[2].as_ref().unwrap()[0], expected, "x={x} r={r} beta={beta}");
    }
}

#[test]
fn private_compare_random_oracle() {
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let n = 200;
    let xs: Vec<u64> = (0..n).map(|_| rng.gen()).collect();
    let rs: Vec<u64> = xs
        .iter()
        .map(|&x| {
            // mix near-misses and far thresholds
            if rng.gen() {
                x.wrapping_add(rng.gen_range(0..3)).wrapping_sub(1)
            } else {
                rng.gen()
            }
        })
        .collect();
    let betas: Vec<u64> = (0..n).map(|_| rng.gen_range(0..2u64)).collect();
    let bits = bits_of(&xs);
    let (b0, b1): (Vec<u64>, Vec<u64>) = bits
        .iter()
        .map(|&b| {
            let s0 = rng.gen_range(0..fp67::P);
            (s0, fp67::sub(b, s0))
        })
        .unzip();
    let (results, _) = run_parties(mesh(10), |ctx| match ctx.id() {
        PartyId::P0 => private_compare(ctx, Some(&b0), Some(&rs), Some(&betas), n),
        PartyId::P1 => private_compare(ctx, Some(&b1), Some(&rs), Some(&betas), n),
        PartyId::P2 => private_compare(ctx, None, None, None, n),
    })
    .unwrap();
    let got = results[2].as_ref().unwrap();
    for i in 0..n {
        let expected = betas[i] ^ u64::from(xs[i] > rs[i]);
        assert_eq!(got[i], expected, "x={} r={} beta={}", xs[i], rs[i], betas[i]);
    }
}

#[test]
fn share_convert_reconstructs_over_odd_ring() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    // contract identities plus random values below 2^62
    let mut values = vec![5u64, 1u64 << 63, 0, odd::MAX];
    values.extend((0..500).map(|_| rng.gen_range(0..(1u64 << 62))));
    let n = values.len();
    let (a0, a1) = share_vec(&values, &mut rng);

    let (results, _) = run_parties(mesh(12), |ctx| match ctx.id() {
        PartyId::P0 => share_convert(ctx, Some(&a0), n),
        PartyId::P1 => share_convert(ctx, Some(&a1), n),
        PartyId::P2 => share_convert(ctx, None, n),
    })
    .unwrap();
    let [r0, r1, _] = results;
    let (y0, y1) = (r0.unwrap(), r1.unwrap());
    for i in 0..n {
        let got = odd::add(y0[i], y1[i]);
        assert_eq!(got, odd::reduce(values[i]), "value {}", values[i]);
    }
}

#[test]
fn compute_msb_examples_and_random() {
    let mut rng = ChaCha20Rng::seed_from_u64(13);
    // a=1 -> 0; a=2^63 -> 1; a=2^64-2 -> 1 (bit 63 of the odd-ring value)
    let mut values = vec![1u64, 1u64 << 63, u64::MAX - 1];
    values.extend((0..200).map(|_| rng.gen_range(0..=odd::MAX)));
    let n = values.len();
    // share over the odd ring
    let (a0, a1): (Vec<u64>, Vec<u64>) = values
        .iter()
        .map(|&v| {
            let s0 = rng.gen_range(0..=odd::MAX);
            (s0, odd::sub(v, s0))
        })
        .unzip();

    let (results, _) = run_parties(mesh(14), |ctx| match ctx.id() {
        PartyId::P0 => compute_msb(ctx, Some(&a0), n),
        PartyId::P1 => compute_msb(ctx, Some(&a1), n),
        PartyId::P2 => compute_msb(ctx, None, n),
    })
    .unwrap();
    let [r0, r1, _] = results;
    let bits = reconstruct_vec(&r0.unwrap(), &r1.unwrap());
    for i in 0..n {
        assert_eq!(bits[i], values[i] >> 63, "value {}", values[i]);
    }
}

#[test]
fn drelu_sign_convention() {
    let mut rng = ChaCha20Rng::seed_from_u64(15);
    let mut values: Vec<u64> =
        vec![5, ring::from_signed(-3), 0, ring::from_signed(-1), 1];
    values.extend((0..200).map(|_| bounded(&mut rng, 45)));
    let n = values.len();
    let (x0, x1) = share_vec(&values, &mut rng);

    let (results, _) = run_parties(mesh(16), |ctx| match ctx.id() {
        PartyId::P0 => drelu(ctx, Some(&x0), n),
        PartyId::P1 => drelu(ctx, Some(&x1), n),
        PartyId::P2 => drelu(ctx, None, n),
    })
    .unwrap();
    let [r0, r1, _] = results;
    let bits = reconstruct_vec(&r0.unwrap(), &r1.unwrap());
    for i in 0..n {
        let expected = u64::from(ring::to_signed(values[i]) >= 0);
        assert_eq!(bits[i], expected, "value {}", ring::to_signed(values[i]));
    }
}

#[test]
fn select_share_is_a_mux() {
    let mut rng = ChaCha20Rng::seed_from_u64(17);
    let n = 300;
    let bs: Vec<u64> = (0..n).map(|_| rng.gen_range(0..2u64)).collect();
    let xs: Vec<u64> = (0..n).map(|_| rng.gen()).collect();
    let ys: Vec<u64> = (0..n).map(|_| rng.gen()).collect();
    let (b0, b1) = share_vec(&bs, &mut rng);
    let (x0, x1) = share_vec(&xs, &mut rng);
    let (y0, y1) = share_vec(&ys, &mut rng);

    let (results, _) = run_parties(mesh(18), |ctx| match ctx.id() {
        PartyId::P0 => select_share(ctx, Some(&b0), Some(&x0), Some(&y0), n),
        PartyId::P1 => select_share(ctx, Some(&b1), Some(&x1), Some(&y1), n),
        PartyId::P2 => select_share(ctx, None, None, None, n),
    })
    .unwrap();
    let [r0, r1, _] = results;
    let z = reconstruct_vec(&r0.unwrap(), &r1.unwrap());
    for i in 0..n {
        let expected = if bs[i] == 1 { ys[i] } else { xs[i] };
        assert_eq!(z[i], expected);
    }
}

#[test]
fn relu_matches_cleartext_exactly() {
    let mut rng = ChaCha20Rng::seed_from_u64(19);
    // element-wise over a random 32x32 tensor
    let values: Vec<u64> = (0..1024).map(|_| bounded(&mut rng, 50)).collect();
    let (x0, x1) = share_vec(&values, &mut rng);
    let n = values.len();

    let (results, _) = run_parties(mesh(20), |ctx| match ctx.id() {
        PartyId::P0 => relu(ctx, Some(&x0), n),
        PartyId::P1 => relu(ctx, Some(&x1), n),
        PartyId::P2 => relu(ctx, None, n),
    })
    .unwrap();
    let [r0, r1, _] = results;
    let z = reconstruct_vec(&r0.unwrap(), &r1.unwrap());
    for i in 0..n {
        let expected = if ring::to_signed(values[i]) >= 0 { values[i] } else { 0 };
        assert_eq!(z[i], expected, "value {}", ring::to_signed(values[i]));
    }
}

#[test]
fn relu_helper_egress_halves_with_prf_opt() {
    let mut rng = ChaCha20Rng::seed_from_u64(21);
    let values: Vec<u64> = (0..256).map(|_| bounded(&mut rng, 40)).collect();
    let (x0, x1) = share_vec(&values, &mut rng);
    let n = values.len();

    let egress = |prf_opt: bool| -> (u64, u64) {
        let keys = MeshKeys::from_seed(77);
        let flags = ProtocolFlags { reshaped_conv: true, prf_opt };
        let ctxs = local_mesh(&keys, flags, 77);
        let (_, ctxs) = run_parties(ctxs, |ctx| match ctx.id() {
            PartyId::P0 => relu(ctx, Some(&x0), n),
            PartyId::P1 => relu(ctx, Some(&x1), n),
            PartyId::P2 => relu(ctx, None, n),
        })
        .unwrap();
        let reports = reports(&ctxs);
        check_symmetry(&reports).unwrap();
        let total: u64 = reports.iter().map(|r| r.sent_elements(&Phase::ALL)).sum();
        (reports[2].sent_elements(&Phase::ALL), total)
    };

    let (opt, total_opt) = egress(true);
    let (unopt, total_unopt) = egress(false);
    assert_eq!(2 * opt, unopt, "helper egress must halve exactly");
    assert!(total_opt < total_unopt);
    // per element: sc deals 66, msb deals 67, two triple shares
    assert_eq!(opt as usize, n * 135);
}

#[test]
fn maxpool_window_semantics() {
    let mut rng = ChaCha20Rng::seed_from_u64(23);
    // [1, -2, 3, 0] -> 3
    let window = vec![1u64, ring::from_signed(-2), 3, 0];
    let (w0, w1) = share_vec(&window, &mut rng);
    let (results, _) = run_parties(mesh(24), |ctx| match ctx.id() {
        PartyId::P0 => maxpool(ctx, Some(&w0), 4),
        PartyId::P1 => maxpool(ctx, Some(&w1), 4),
        PartyId::P2 => maxpool(ctx, None, 4),
    })
    .unwrap();
    let [r0, r1, _] = results;
    assert_eq!(reconstruct_vec(&r0.unwrap(), &r1.unwrap()), vec![3]);

    // k=1 is the identity and costs nothing
    let single = vec![ring::from_signed(-7)];
    let (s0, s1) = share_vec(&single, &mut rng);
    let (results, ctxs) = run_parties(mesh(25), |ctx| match ctx.id() {
        PartyId::P0 => maxpool(ctx, Some(&s0), 1),
        PartyId::P1 => maxpool(ctx, Some(&s1), 1),
        PartyId::P2 => maxpool(ctx, None, 1),
    })
    .unwrap();
    let [r0, r1, _] = results;
    assert_eq!(reconstruct_vec(&r0.unwrap(), &r1.unwrap()), single);
    assert_eq!(total_elements(&reports(&ctxs), &Phase::ALL), 0);
}

#[test]
fn argmax_reveals_first_maximal_index() {
    let mut rng = ChaCha20Rng::seed_from_u64(27);
    // [2, 7, 7, 1] -> 1 (ties keep the earlier index)
    let xs = vec![2u64, 7, 7, 1];
    let (x0, x1) = share_vec(&xs, &mut rng);
    let (results, _) = run_parties(mesh(28), |ctx| match ctx.id() {
        PartyId::P0 => argmax_protocol(ctx, Some(&x0), 4),
        PartyId::P1 => argmax_protocol(ctx, Some(&x1), 4),
        PartyId::P2 => argmax_protocol(ctx, None, 4),
    })
    .unwrap();
    assert_eq!(results[0], Some(1));
    assert_eq!(results[1], None);
    assert_eq!(results[2], None);

    // n = 1 -> 0
    let one = vec![ring::from_signed(-5)];
    let (o0, o1) = share_vec(&one, &mut rng);
    let (results, _) = run_parties(mesh(29), |ctx| match ctx.id() {
        PartyId::P0 => argmax_protocol(ctx, Some(&o0), 1),
        PartyId::P1 => argmax_protocol(ctx, Some(&o1), 1),
        PartyId::P2 => argmax_protocol(ctx, None, 1),
    })
    .unwrap();
    assert_eq!(results[0], Some(0));

    // random vectors equal the cleartext argmax with the same tie-break
    for trial in 0..30 {
        let n = rng.gen_range(2..12);
        let xs: Vec<u64> = (0..n).map(|_| bounded(&mut rng, 30)).collect();
        let expected = {
            let mut best = 0usize;
            for i in 1..n {
                if ring::to_signed(xs[i]) > ring::to_signed(xs[best]) {
                    best = i;
                }
            }
            best as u64
        };
        let (x0, x1) = share_vec(&xs, &mut rng);
        let (results, _) = run_parties(mesh(300 + trial), |ctx| match ctx.id() {
            PartyId::P0 => argmax_protocol(ctx, Some(&x0), n),
            PartyId::P1 => argmax_protocol(ctx, Some(&x1), n),
            PartyId::P2 => argmax_protocol(ctx, None, n),
        })
        .unwrap();
        assert_eq!(results[0], Some(expected), "xs {xs:?}");
    }
}

#[test]
fn transcripts_are_reproducible() {
    let mut rng = ChaCha20Rng::seed_from_u64(31);
    let values: Vec<u64> = (0..64).map(|_| bounded(&mut rng, 40)).collect();
    let (x0, x1) = share_vec(&values, &mut rng);
    let n = values.len();

    let run = || {
        let ctxs = local_mesh(&MeshKeys::from_seed(99), ProtocolFlags::default(), 99);
        let (_, ctxs) = run_parties(ctxs, |ctx| match ctx.id() {
            PartyId::P0 => relu(ctx, Some(&x0), n),
            PartyId::P1 => relu(ctx, Some(&x1), n),
            PartyId::P2 => relu(ctx, None, n),
        })
        .unwrap();
        let mut digests: Vec<String> = Vec::new();
        for ctx in &ctxs {
            let report = ctx.comm_report();
            for t in report.transcripts {
                digests.push(format!("{}->{}:{}", t.from, t.to, t.sha256));
            }
        }
        digests.sort();
        digests
    };
    assert_eq!(run(), run());
}
