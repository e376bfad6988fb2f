//! Seeded synthetic model builders shared by examples, benchmarks and tests.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::graph::{Graph, HlilGraph, InputSpec, Node, OpKind, Padding};
use crate::tensor::{DType, Tensor};

fn uniform_tensor(rng: &mut ChaCha20Rng, shape: Vec<usize>, lo: f32, hi: f32) -> Tensor<f32> {
    let count: usize = shape.iter().product();
    let data = (0..count).map(|_| rng.gen_range(lo..hi)).collect();
    Tensor::new(shape, data).expect("fixture shape")
}

/// Random float input drawn uniformly from [lo, hi).
pub fn random_input(rng: &mut ChaCha20Rng, shape: Vec<usize>, lo: f32, hi: f32) -> Tensor<f32> {
    uniform_tensor(rng, shape, lo, hi)
}

/// The classic classifier: `output(ArgMax(xW + b))` over a (1, d) query.
pub fn logistic_regression(d: usize, k: usize, seed: u64) -> HlilGraph {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let w = uniform_tensor(&mut rng, vec![d, k], -1.0, 1.0);
    let b = uniform_tensor(&mut rng, vec![1, k], -1.0, 1.0);
    let graph = Graph {
        nodes: vec![
            Node { op: OpKind::Input, inputs: vec![] },
            Node { op: OpKind::Const, inputs: vec![] },
            Node { op: OpKind::Const, inputs: vec![] },
            Node { op: OpKind::MatMul, inputs: vec![0, 1] },
            Node { op: OpKind::Add, inputs: vec![3, 2] },
            Node { op: OpKind::ArgMax, inputs: vec![4] },
        ],
        input_spec: InputSpec { shape: vec![1, d], dtype: DType::F32 },
        output: 5,
    };
    let weights = BTreeMap::from([(1usize, w), (2usize, b)]);
    HlilGraph { graph, weights }
}

/// Two dense layers with a ReLU in between, ending in ArgMax. The first
/// layer's weight range is decoupled from the second's so callers can push
/// intermediate magnitudes toward the overflow guard band while keeping
/// logit gaps small.
pub fn two_layer(
    d: usize,
    h: usize,
    k: usize,
    w1_range: f32,
    w2_range: f32,
    seed: u64,
) -> HlilGraph {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let w1 = uniform_tensor(&mut rng, vec![d, h], -w1_range, w1_range);
    let w2 = uniform_tensor(&mut rng, vec![h, k], -w2_range, w2_range);
    let graph = Graph {
        nodes: vec![
            Node { op: OpKind::Input, inputs: vec![] },
            Node { op: OpKind::Const, inputs: vec![] },
            Node { op: OpKind::Const, inputs: vec![] },
            Node { op: OpKind::MatMul, inputs: vec![0, 1] },
            Node { op: OpKind::ReLU, inputs: vec![3] },
            Node { op: OpKind::MatMul, inputs: vec![4, 2] },
            Node { op: OpKind::ArgMax, inputs: vec![5] },
        ],
        input_spec: InputSpec { shape: vec![1, d], dtype: DType::F32 },
        output: 6,
    };
    let weights = BTreeMap::from([(1usize, w1), (2usize, w2)]);
    HlilGraph { graph, weights }
}

/// A small convolutional model: Conv2D, ReLU, MaxPool, Reshape, MatMul, ArgMax.
pub fn conv_classifier(m: usize, f: usize, k: usize, seed: u64) -> HlilGraph {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let q = m - f + 1;
    let pooled = q / 2;
    let filter = uniform_tensor(&mut rng, vec![f, f], -1.0, 1.0);
    let w = uniform_tensor(&mut rng, vec![pooled * pooled, k], -1.0, 1.0);
    let graph = Graph {
        nodes: vec![
            Node { op: OpKind::Input, inputs: vec![] },
            Node { op: OpKind::Const, inputs: vec![] },
            Node { op: OpKind::Const, inputs: vec![] },
            Node { op: OpKind::Conv2D { stride: 1, padding: Padding::Valid }, inputs: vec![0, 1] },
            Node { op: OpKind::ReLU, inputs: vec![3] },
            Node { op: OpKind::MaxPool { window: 2, stride: 2 }, inputs: vec![4] },
            Node { op: OpKind::Reshape { shape: vec![1, pooled * pooled] }, inputs: vec![5] },
            Node { op: OpKind::MatMul, inputs: vec![6, 2] },
            Node { op: OpKind::ArgMax, inputs: vec![7] },
        ],
        input_spec: InputSpec { shape: vec![m, m], dtype: DType::F32 },
        output: 8,
    };
    let weights = BTreeMap::from([(1usize, filter), (2usize, w)]);
    HlilGraph { graph, weights }
}
