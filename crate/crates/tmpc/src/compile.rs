//! The float-to-fixed lowering pass: quantizes every weight at the global
//! scale s, inserts one ScaleDown(s) after each multiplicative node so all
//! live values keep exactly s fractional bits, and folds BatchNorm into a
//! per-channel multiply-add.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fixed::quantize;
use crate::graph::{Graph, HlilGraph, LlilProgram, Node, NodeId, OpKind};
use crate::shapes::infer_shapes;
use crate::tensor::{DType, Tensor};

/// Lower a validated HLIL graph to an LLIL program at scale s.
pub fn compile_to_llil(model: &HlilGraph, s: u32) -> Result<LlilProgram> {
    model.validate()?;
    infer_shapes(&model.graph, &model.weight_shapes())?;

    // Const nodes consumed only by BatchNorm disappear with the fold.
    let mut non_bn_use = vec![false; model.graph.nodes.len()];
    for node in &model.graph.nodes {
        if matches!(node.op, OpKind::BatchNorm { .. }) {
            non_bn_use[node.inputs[0]] = true;
        } else {
            for &src in &node.inputs {
                non_bn_use[src] = true;
            }
        }
    }
    non_bn_use[model.graph.output] = true;

    let mut nodes: Vec<Node> = Vec::new();
    let mut weights: BTreeMap<NodeId, Tensor<u64>> = BTreeMap::new();
    // Old node id -> id of the node carrying its value in the lowered graph.
    let mut mapped: Vec<Option<NodeId>> = vec![None; model.graph.nodes.len()];

    let push = |nodes: &mut Vec<Node>, op: OpKind, inputs: Vec<NodeId>| -> NodeId {
        nodes.push(Node { op, inputs });
        nodes.len() - 1
    };

    for (old_id, node) in model.graph.nodes.iter().enumerate() {
        let map = |mapped: &[Option<NodeId>], i: usize| -> Result<NodeId> {
            mapped[node.inputs[i]].ok_or_else(|| {
                Error::Validation(format!("node {old_id} consumes a folded-away value"))
            })
        };
        let new_id = match &node.op {
            OpKind::Input => push(&mut nodes, OpKind::Input, vec![]),
            OpKind::Const => {
                if !non_bn_use[old_id] {
                    // Folded into a BatchNorm; drop it.
                    continue;
                }
                let id = push(&mut nodes, OpKind::Const, vec![]);
                weights.insert(id, quantize(&model.weights[&old_id], s)?);
                id
            }
            OpKind::MatMul | OpKind::Conv2D { .. } => {
                let inputs = vec![map(&mapped, 0)?, map(&mapped, 1)?];
                let mul = push(&mut nodes, node.op.clone(), inputs);
                push(&mut nodes, OpKind::ScaleDown { amount: s }, vec![mul])
            }
            OpKind::BatchNorm { epsilon } => {
                let x = map(&mapped, 0)?;
                let params: Vec<&Tensor<f32>> = node.inputs[1..]
                    .iter()
                    .map(|&src| {
                        model.weights.get(&src).ok_or_else(|| {
                            Error::Validation(format!(
                                "BatchNorm node {old_id} requires const parameters"
                            ))
                        })
                    })
                    .collect::<Result<_>>()?;
                let (gamma, beta, mean, var) = (params[0], params[1], params[2], params[3]);
                let n = gamma.len();
                // y = g(x - mu)/sqrt(v + eps) + b  ==  a*x + c
                let mut a = Vec::with_capacity(n);
                let mut c = Vec::with_capacity(n);
                for i in 0..n {
                    let g = gamma.data()[i] as f64;
                    let b = beta.data()[i % beta.len()] as f64;
                    let mu = mean.data()[i % mean.len()] as f64;
                    let v = var.data()[i % var.len()] as f64;
                    let scale = g / (v + *epsilon as f64).sqrt();
                    a.push(scale as f32);
                    c.push((b - mu * scale) as f32);
                }
                let a_t = Tensor::new(vec![1, n], a)?;
                let c_t = Tensor::new(vec![1, n], c)?;
                let a_id = push(&mut nodes, OpKind::Const, vec![]);
                weights.insert(a_id, quantize(&a_t, s)?);
                let mul = push(&mut nodes, OpKind::Mul, vec![x, a_id]);
                let down = push(&mut nodes, OpKind::ScaleDown { amount: s }, vec![mul]);
                let c_id = push(&mut nodes, OpKind::Const, vec![]);
                weights.insert(c_id, quantize(&c_t, s)?);
                push(&mut nodes, OpKind::Add, vec![down, c_id])
            }
            OpKind::Add
            | OpKind::ReLU
            | OpKind::MaxPool { .. }
            | OpKind::AvgPool { .. }
            | OpKind::Reshape { .. }
            | OpKind::ArgMax => {
                let inputs = (0..node.inputs.len())
                    .map(|i| map(&mapped, i))
                    .collect::<Result<Vec<_>>>()?;
                push(&mut nodes, node.op.clone(), inputs)
            }
            OpKind::Mul | OpKind::ScaleDown { .. } => {
                return Err(Error::Validation(format!(
                    "unsupported op-kind {} in HLIL input",
                    node.op.name()
                )))
            }
        };
        mapped[old_id] = Some(new_id);
    }

    let output = mapped[model.graph.output]
        .ok_or_else(|| Error::Validation("output maps to a folded value".into()))?;
    let program = LlilProgram {
        scale: s,
        graph: Graph {
            nodes,
            input_spec: crate::graph::InputSpec {
                shape: model.graph.input_spec.shape.clone(),
                dtype: DType::I64,
            },
            output,
        },
        weights,
    };
    program.validate()?;
    Ok(program)
}
