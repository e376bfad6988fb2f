//! Walks an LLIL program under sharing, dispatching each node to its
//! protocol: MatMul to Beaver triples, Conv2D to the (reshaped) convolution
//! triple, ScaleDown to local truncation, the non-linear ops to the sign-bit
//! pipeline, Add to local share addition. Only the output node is revealed.
//!
//! All three parties walk the same program; the helper holds no shares and
//! follows along serving correlated randomness, which is why the public
//! program (with zeroed weights) is enough for it.

use std::collections::BTreeMap;

use crate::comm::Phase;
use crate::error::{Error, Result};
use crate::graph::{LlilProgram, NodeId, OpKind, Padding};
use crate::interp::{apply_padding, pool_windows};
use crate::protocol::argmax::argmax_protocol;
use crate::protocol::beaver::{beaver_matmul, MatDims};
use crate::protocol::conv::{conv2d_protocol, ConvMode};
use crate::protocol::pool::maxpool_batch;
use crate::protocol::relu::relu;
use crate::protocol::truncate::{div_public, truncate};
use crate::protocol::{PartyContext, PartyId};
use crate::shapes::{infer_shapes, same_padding};
use crate::tensor::{Tensor, TensorData};

/// One holder's share of the model: the query input and every weight,
/// keyed by const node id.
#[derive(Debug, Clone)]
pub struct PartyShares {
    pub input: Tensor<u64>,
    pub weights: BTreeMap<NodeId, Tensor<u64>>,
}

fn broadcast_to(share: &Tensor<u64>, shape: &[usize]) -> Result<Tensor<u64>> {
    if share.shape() == shape {
        return Ok(share.clone());
    }
    // bias row-vector tiled up to (m, n)
    let n = share.len();
    let total: usize = shape.iter().product();
    let data = (0..total).map(|i| share.data()[i % n]).collect();
    Tensor::new(shape.to_vec(), data)
}

/// Execute the program, revealing only the output node: `Some` at the
/// output recipient, `None` at the other two parties.
pub fn run_llil_mpc(
    ctx: &mut PartyContext,
    program: &LlilProgram,
    shares: Option<&PartyShares>,
) -> Result<Option<TensorData>> {
    program.graph.validate(crate::graph::Lang::Llil, |id| program.weights.contains_key(&id))?;
    program.check_scales()?;
    let shapes = infer_shapes(&program.graph, &program.weight_shapes())?;
    if ctx.is_holder() != shares.is_some() {
        return Err(Error::Protocol(
            "exactly the data holders P0/P1 must provide shares".into(),
        ));
    }
    if let Some(s) = shares {
        if s.input.shape() != program.graph.input_spec.shape {
            return Err(Error::Shape(format!(
                "input share shape {:?} does not match spec {:?}",
                s.input.shape(),
                program.graph.input_spec.shape
            )));
        }
    }
    let holder = ctx.id().holder_index();

    let mut values: Vec<Option<Tensor<u64>>> = Vec::with_capacity(program.graph.nodes.len());
    for (id, node) in program.graph.nodes.iter().enumerate() {
        let arg = |i: usize| -> Option<&Tensor<u64>> { values[node.inputs[i]].as_ref() };
        let in_shape = |i: usize| -> &[usize] { &shapes[node.inputs[i]] };
        let out = match &node.op {
            OpKind::Input => shares.map(|s| s.input.clone()),
            OpKind::Const => match shares {
                Some(s) => {
                    let w = s.weights.get(&id).ok_or_else(|| {
                        Error::Protocol(format!("missing weight share for const node {id}"))
                    })?;
                    if w.shape() != shapes[id] {
                        return Err(Error::Shape(format!(
                            "weight share {id} has shape {:?}, program says {:?}",
                            w.shape(),
                            shapes[id]
                        )));
                    }
                    Some(w.clone())
                }
                None => None,
            },
            OpKind::MatMul => {
                let (a, b) = (in_shape(0)[0], in_shape(0)[1]);
                let c = in_shape(1)[1];
                beaver_matmul(ctx, arg(0), arg(1), MatDims { a, b, c })?
            }
            OpKind::Conv2D { stride, padding } => {
                let (f1, f2) = (in_shape(1)[0], in_shape(1)[1]);
                let (m1, m2) = (in_shape(0)[0], in_shape(0)[1]);
                // Zero padding commutes with sharing: both holders pad with
                // zero shares, the helper only needs the padded dims.
                let padded_dims = match padding {
                    Padding::Valid => (m1, m2),
                    Padding::Same => {
                        let (l1, h1) = same_padding(m1, f1, *stride);
                        let (l2, h2) = same_padding(m2, f2, *stride);
                        (m1 + l1 + h1, m2 + l2 + h2)
                    }
                };
                let image = arg(0)
                    .map(|t| apply_padding(t, (f1, f2), *stride, *padding));
                let mode = if ctx.flags.reshaped_conv {
                    ConvMode::Reshaped
                } else {
                    ConvMode::Naive
                };
                let full =
                    conv2d_protocol(ctx, image.as_ref(), arg(1), padded_dims, (f1, f2), mode)?;
                // The protocol runs at stride 1; larger strides subsample locally.
                match full {
                    Some(t) if *stride > 1 => {
                        let (g1, g2) = t.dims2()?;
                        let mut data = Vec::new();
                        for i in (0..g1).step_by(*stride) {
                            for jj in (0..g2).step_by(*stride) {
                                data.push(*t.at2(i, jj));
                            }
                        }
                        Some(Tensor::new(shapes[id].clone(), data)?)
                    }
                    other => other,
                }
            }
            OpKind::Add => match (arg(0), arg(1)) {
                (Some(a), Some(b)) => {
                    let a = broadcast_to(a, &shapes[id])?;
                    let b = broadcast_to(b, &shapes[id])?;
                    let data = a
                        .data()
                        .iter()
                        .zip(b.data())
                        .map(|(&x, &y)| x.wrapping_add(y))
                        .collect();
                    Some(Tensor::new(shapes[id].clone(), data)?)
                }
                _ => None,
            },
            OpKind::Mul => {
                let n: usize = shapes[id].iter().product();
                let (x, y) = match (arg(0), arg(1)) {
                    (Some(a), Some(b)) => (
                        Some(broadcast_to(a, &shapes[id])?),
                        Some(broadcast_to(b, &shapes[id])?),
                    ),
                    _ => (None, None),
                };
                let out = crate::protocol::beaver::beaver_mul(
                    ctx,
                    x.as_ref().map(|t| t.data()),
                    y.as_ref().map(|t| t.data()),
                    n,
                )?;
                out.map(|d| Tensor::new(shapes[id].clone(), d)).transpose()?
            }
            OpKind::ScaleDown { amount } => {
                holder.and_then(|j| arg(0).map(|t| truncate(j, t, *amount)))
            }
            OpKind::ReLU => {
                let n: usize = shapes[id].iter().product();
                let out = relu(ctx, arg(0).map(|t| t.data()), n)?;
                out.map(|d| Tensor::new(shapes[id].clone(), d)).transpose()?
            }
            OpKind::MaxPool { window, stride } => {
                let dims = (in_shape(0)[0], in_shape(0)[1]);
                let (_, _, windows) = pool_windows(dims, *window, *stride)?;
                let k = window * window;
                let gathered: Option<Vec<u64>> = arg(0).map(|t| {
                    windows.iter().flat_map(|w| w.iter().map(|&i| t.data()[i])).collect()
                });
                let out = maxpool_batch(ctx, gathered.as_deref(), windows.len(), k)?;
                out.map(|d| Tensor::new(shapes[id].clone(), d)).transpose()?
            }
            OpKind::AvgPool { window, stride } => match (holder, arg(0)) {
                (Some(j), Some(t)) => {
                    let dims = (in_shape(0)[0], in_shape(0)[1]);
                    let (_, _, windows) = pool_windows(dims, *window, *stride)?;
                    let sums: Vec<u64> = windows
                        .iter()
                        .map(|w| w.iter().fold(0u64, |acc, &i| acc.wrapping_add(t.data()[i])))
                        .collect();
                    let sums = Tensor::new(shapes[id].clone(), sums)?;
                    Some(div_public(j, &sums, (window * window) as u64))
                }
                _ => None,
            },
            OpKind::Reshape { shape } => match arg(0) {
                Some(t) => Some(t.clone().reshape(shape.clone())?),
                None => None,
            },
            OpKind::ArgMax => {
                if id != program.graph.output {
                    return Err(Error::Protocol(
                        "ArgMax reveals its index and is only allowed as the output node".into(),
                    ));
                }
                let n: usize = in_shape(0).iter().product();
                let revealed = argmax_protocol(ctx, arg(0).map(|t| t.data()), n)?;
                return Ok(revealed.map(|idx| TensorData::I64(Tensor::scalar(idx))));
            }
            OpKind::BatchNorm { .. } => {
                return Err(Error::Validation("BatchNorm does not survive lowering".into()))
            }
        };
        values.push(out);
    }

    // Reveal the output tensor to the recipient only.
    let out_share = values.swap_remove(program.graph.output);
    match ctx.id() {
        PartyId::P2 => Ok(None),
        _ => {
            let mine = out_share.ok_or_else(|| Error::Protocol("missing output share".into()))?;
            if ctx.output_recipient() {
                let theirs = ctx.recv_elements(ctx.other_holder(), Phase::RevealOutput)?;
                if theirs.len() != mine.len() {
                    return Err(Error::Protocol("revealed share length mismatch".into()));
                }
                let data = mine
                    .data()
                    .iter()
                    .zip(&theirs)
                    .map(|(&a, &b)| a.wrapping_add(b))
                    .collect();
                Ok(Some(TensorData::I64(Tensor::new(mine.shape().to_vec(), data)?)))
            } else {
                let peer = ctx.other_holder();
                ctx.send_elements(peer, Phase::RevealOutput, mine.data())?;
                Ok(None)
            }
        }
    }
}
