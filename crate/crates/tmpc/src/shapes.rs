//! Shape inference: annotates every node with its output shape and rejects
//! dimension mismatches before any evaluation happens.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId, OpKind, Padding};

/// Output spatial size of a convolution along one axis.
pub fn conv_out_dim(m: usize, f: usize, stride: usize, padding: Padding) -> Result<usize> {
    match padding {
        Padding::Valid => {
            if f > m {
                return Err(Error::Shape(format!("filter {f} larger than input {m}")));
            }
            Ok((m - f) / stride + 1)
        }
        // q = ceil(m / stride)
        Padding::Same => Ok(m.div_ceil(stride)),
    }
}

/// Total zero padding along one axis for SAME convolutions (split low/high,
/// extra pixel on the high side).
pub fn same_padding(m: usize, f: usize, stride: usize) -> (usize, usize) {
    let q = m.div_ceil(stride);
    let total = ((q - 1) * stride + f).saturating_sub(m);
    (total / 2, total - total / 2)
}

fn pool_out_dim(m: usize, window: usize, stride: usize) -> Result<usize> {
    if window > m {
        return Err(Error::Shape(format!("pool window {window} larger than input {m}")));
    }
    Ok((m - window) / stride + 1)
}

fn expect_rank2(shape: &[usize], what: &str) -> Result<(usize, usize)> {
    match shape {
        [r, c] => Ok((*r, *c)),
        other => Err(Error::Shape(format!("{what} must be rank-2, got {other:?}"))),
    }
}

/// Whether `b` may be added to / multiplied into `a` elementwise: identical
/// shapes, or a bias row-vector (1, n) against (m, n).
pub fn infer_binop_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    if a == b {
        return Ok(a.to_vec());
    }
    if let ([m, n], [1, n2]) = (a, b) {
        if n == n2 {
            return Ok(vec![*m, *n]);
        }
    }
    if let ([1, n2], [m, n]) = (a, b) {
        if n == n2 {
            return Ok(vec![*m, *n]);
        }
    }
    Err(Error::Shape(format!(
        "operands {a:?} and {b:?} do not match (broadcast is limited to a bias row-vector)"
    )))
}

fn check_norm_param(param: &[usize], n: usize, what: &str) -> Result<()> {
    let len: usize = param.iter().product();
    let ok = matches!(param, [l] if *l == n) || matches!(param, [1, l] if *l == n);
    if ok && len == n {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "{what} shape {param:?} does not match {n} channels"
        )))
    }
}

/// Per-node output shapes for a validated graph. Works for both languages;
/// weight shapes come from whichever weight map the caller holds.
pub fn infer_shapes(
    graph: &Graph,
    weight_shapes: &BTreeMap<NodeId, Vec<usize>>,
) -> Result<Vec<Vec<usize>>> {
    let mut shapes: Vec<Vec<usize>> = Vec::with_capacity(graph.nodes.len());
    for (id, node) in graph.nodes.iter().enumerate() {
        let input = |i: usize| -> &[usize] { &shapes[node.inputs[i]] };
        let shape = match &node.op {
            OpKind::Input => graph.input_spec.shape.clone(),
            OpKind::Const => weight_shapes
                .get(&id)
                .cloned()
                .ok_or_else(|| Error::Validation(format!("const node {id} has no weight")))?,
            OpKind::MatMul => {
                let (a, b) = (input(0), input(1));
                let (ra, ca) = expect_rank2(a, "MatMul lhs")?;
                let (rb, cb) = expect_rank2(b, "MatMul rhs")?;
                if ca != rb {
                    return Err(Error::Shape(format!(
                        "MatMul inner dimensions mismatch: ({ra}x{ca}) . ({rb}x{cb})"
                    )));
                }
                vec![ra, cb]
            }
            OpKind::Add | OpKind::Mul => infer_binop_shape(input(0), input(1))?,
            OpKind::Conv2D { stride, padding } => {
                let (m1, m2) = expect_rank2(input(0), "Conv2D image")?;
                let (f1, f2) = expect_rank2(input(1), "Conv2D filter")?;
                vec![
                    conv_out_dim(m1, f1, *stride, *padding)?,
                    conv_out_dim(m2, f2, *stride, *padding)?,
                ]
            }
            OpKind::ReLU | OpKind::ScaleDown { .. } => input(0).to_vec(),
            OpKind::MaxPool { window, stride } | OpKind::AvgPool { window, stride } => {
                let (m1, m2) = expect_rank2(input(0), "pool input")?;
                vec![pool_out_dim(m1, *window, *stride)?, pool_out_dim(m2, *window, *stride)?]
            }
            OpKind::BatchNorm { .. } => {
                let x = input(0).to_vec();
                let (_, n) = expect_rank2(&x, "BatchNorm input")?;
                check_norm_param(input(1), n, "gamma")?;
                check_norm_param(input(2), n, "beta")?;
                check_norm_param(input(3), n, "mean")?;
                check_norm_param(input(4), n, "variance")?;
                x
            }
            OpKind::Reshape { shape } => {
                let from: usize = input(0).iter().product();
                let to: usize = shape.iter().product();
                if from != to {
                    return Err(Error::Shape(format!(
                        "reshape {:?} -> {shape:?} changes element count",
                        input(0)
                    )));
                }
                shape.clone()
            }
            OpKind::ArgMax => vec![1],
        };
        shapes.push(shape);
    }
    Ok(shapes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{InputSpec, Node};
    use crate::tensor::DType;

    fn binop_graph(op: OpKind, input_shape: Vec<usize>) -> Graph {
        Graph {
            nodes: vec![
                Node { op: OpKind::Input, inputs: vec![] },
                Node { op: OpKind::Const, inputs: vec![] },
                Node { op, inputs: vec![0, 1] },
            ],
            input_spec: InputSpec { shape: input_shape, dtype: DType::F32 },
            output: 2,
        }
    }

    #[test]
    fn matmul_shapes() {
        let g = binop_graph(OpKind::MatMul, vec![1, 784]);
        let w = BTreeMap::from([(1usize, vec![784usize, 10])]);
        let shapes = infer_shapes(&g, &w).unwrap();
        assert_eq!(shapes[2], vec![1, 10]);
    }

    #[test]
    fn matmul_mismatch() {
        let g = binop_graph(OpKind::MatMul, vec![1, 784]);
        let w = BTreeMap::from([(1usize, vec![10usize, 10])]);
        let err = infer_shapes(&g, &w).unwrap_err();
        assert!(err.to_string().contains("inner dimensions mismatch"));
    }

    #[test]
    fn conv_valid_dim() {
        // m=28, f=5, stride 1, VALID -> q = m - f + 1 = 24
        assert_eq!(conv_out_dim(28, 5, 1, Padding::Valid).unwrap(), 24);
        assert_eq!(conv_out_dim(28, 5, 1, Padding::Same).unwrap(), 28);
        assert_eq!(conv_out_dim(7, 3, 2, Padding::Same).unwrap(), 4);
        assert!(conv_out_dim(3, 5, 1, Padding::Valid).is_err());
    }

    #[test]
    fn same_padding_split() {
        assert_eq!(same_padding(28, 5, 1), (2, 2));
        assert_eq!(same_padding(5, 2, 1), (0, 1));
    }
}
