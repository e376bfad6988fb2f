//! The two model graph languages: HLIL (floating-point op graph) and LLIL
//! (its fixed-point lowering with explicit `ScaleDown` nodes and one global
//! scale).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{DType, Tensor};

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Padding {
    Valid,
    Same,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op")]
pub enum OpKind {
    Input,
    Const,
    MatMul,
    Add,
    /// Elementwise multiply; produced by batch-norm folding, LLIL only.
    Mul,
    Conv2D { stride: usize, padding: Padding },
    ReLU,
    MaxPool { window: usize, stride: usize },
    AvgPool { window: usize, stride: usize },
    BatchNorm { epsilon: f32 },
    Reshape { shape: Vec<usize> },
    ArgMax,
    /// Divide every element by 2^amount (signed); LLIL only.
    ScaleDown { amount: u32 },
}

impl OpKind {
    pub fn name(&self) -> &'static str {
        match self {
            OpKind::Input => "Input",
            OpKind::Const => "Const",
            OpKind::MatMul => "MatMul",
            OpKind::Add => "Add",
            OpKind::Mul => "Mul",
            OpKind::Conv2D { .. } => "Conv2D",
            OpKind::ReLU => "ReLU",
            OpKind::MaxPool { .. } => "MaxPool",
            OpKind::AvgPool { .. } => "AvgPool",
            OpKind::BatchNorm { .. } => "BatchNorm",
            OpKind::Reshape { .. } => "Reshape",
            OpKind::ArgMax => "ArgMax",
            OpKind::ScaleDown { .. } => "ScaleDown",
        }
    }

    fn arity(&self) -> usize {
        match self {
            OpKind::Input | OpKind::Const => 0,
            OpKind::ReLU
            | OpKind::MaxPool { .. }
            | OpKind::AvgPool { .. }
            | OpKind::Reshape { .. }
            | OpKind::ArgMax
            | OpKind::ScaleDown { .. } => 1,
            OpKind::MatMul | OpKind::Add | OpKind::Mul | OpKind::Conv2D { .. } => 2,
            // x, gamma, beta, mean, variance
            OpKind::BatchNorm { .. } => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub op: OpKind,
    /// Indices of earlier nodes feeding this one.
    pub inputs: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub shape: Vec<usize>,
    pub dtype: DType,
}

/// Which language a graph is validated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lang {
    Hlil,
    Llil,
}

/// Shared graph structure: a DAG in topological order over typed op nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub nodes: Vec<Node>,
    pub input_spec: InputSpec,
    pub output: NodeId,
}

impl Graph {
    /// Structural validation common to both languages. `weight_for` reports
    /// whether a const node has a weight tensor attached.
    pub fn validate(&self, lang: Lang, has_weight: impl Fn(NodeId) -> bool) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Validation("empty node list: graph has no output".into()));
        }
        if self.output >= self.nodes.len() {
            return Err(Error::Validation(format!(
                "output id {} out of range ({} nodes)",
                self.output,
                self.nodes.len()
            )));
        }
        let mut inputs_seen = 0usize;
        for (id, node) in self.nodes.iter().enumerate() {
            let op = &node.op;
            if node.inputs.len() != op.arity() {
                return Err(Error::Validation(format!(
                    "node {id} ({}) expects {} inputs, has {}",
                    op.name(),
                    op.arity(),
                    node.inputs.len()
                )));
            }
            for &src in &node.inputs {
                if src >= id {
                    return Err(Error::Validation(format!(
                        "node {id} ({}) references input id {src} not yet defined",
                        op.name()
                    )));
                }
            }
            match op {
                OpKind::Input => inputs_seen += 1,
                OpKind::Const => {
                    if !has_weight(id) {
                        return Err(Error::Validation(format!("const node {id} has no weight")));
                    }
                }
                OpKind::Conv2D { stride, .. } => {
                    if *stride < 1 {
                        return Err(Error::Validation(format!("node {id}: stride must be >= 1")));
                    }
                }
                OpKind::MaxPool { window, stride } | OpKind::AvgPool { window, stride } => {
                    if *window < 1 || *stride < 1 {
                        return Err(Error::Validation(format!(
                            "node {id}: window and stride must be >= 1"
                        )));
                    }
                }
                OpKind::BatchNorm { .. } if lang == Lang::Llil => {
                    return Err(Error::Validation(format!(
                        "node {id}: BatchNorm is folded away and not a valid LLIL op"
                    )));
                }
                OpKind::Mul | OpKind::ScaleDown { .. } if lang == Lang::Hlil => {
                    return Err(Error::Validation(format!(
                        "node {id}: {} is not a valid HLIL op",
                        op.name()
                    )));
                }
                _ => {}
            }
        }
        if inputs_seen != 1 {
            return Err(Error::Validation(format!(
                "graph must have exactly one Input node, found {inputs_seen}"
            )));
        }
        Ok(())
    }

    pub fn input_node(&self) -> NodeId {
        self.nodes.iter().position(|n| n.op == OpKind::Input).expect("validated graph")
    }
}

/// Floating-point model graph.
#[derive(Debug, Clone, PartialEq)]
pub struct HlilGraph {
    pub graph: Graph,
    pub weights: BTreeMap<NodeId, Tensor<f32>>,
}

impl HlilGraph {
    pub fn validate(&self) -> Result<()> {
        if self.graph.input_spec.dtype != DType::F32 {
            return Err(Error::Validation("HLIL input must be f32".into()));
        }
        self.graph.validate(Lang::Hlil, |id| self.weights.contains_key(&id))
    }

    pub fn weight_shapes(&self) -> BTreeMap<NodeId, Vec<usize>> {
        self.weights.iter().map(|(&id, t)| (id, t.shape().to_vec())).collect()
    }
}

/// Fixed-point program: the same graph shape over ring elements, plus the
/// global scale and explicit ScaleDown nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct LlilProgram {
    pub scale: u32,
    pub graph: Graph,
    pub weights: BTreeMap<NodeId, Tensor<u64>>,
}

impl LlilProgram {
    pub fn validate(&self) -> Result<()> {
        if self.graph.input_spec.dtype != DType::I64 {
            return Err(Error::Validation("LLIL input must be i64".into()));
        }
        self.graph.validate(Lang::Llil, |id| self.weights.contains_key(&id))?;
        self.check_scales()
    }

    pub fn weight_shapes(&self) -> BTreeMap<NodeId, Vec<usize>> {
        self.weights.iter().map(|(&id, t)| (id, t.shape().to_vec())).collect()
    }

    /// Static scale walk: every value must carry scale s, with the transient
    /// 2s state after a multiplicative op resolved by exactly one ScaleDown
    /// before any non-linear op (or Add of mismatched scale) consumes it.
    pub fn check_scales(&self) -> Result<()> {
        let s = self.scale;
        // Abstract domain: fractional bits carried by each node's output.
        let mut bits: Vec<u32> = Vec::with_capacity(self.graph.nodes.len());
        for (id, node) in self.graph.nodes.iter().enumerate() {
            let get = |i: usize| bits[node.inputs[i]];
            let out = match &node.op {
                OpKind::Input | OpKind::Const => s,
                OpKind::MatMul | OpKind::Conv2D { .. } | OpKind::Mul => {
                    let (a, b) = (get(0), get(1));
                    if a != s || b != s {
                        return Err(Error::Validation(format!(
                            "node {id} ({}) consumes un-rescaled operands (scales {a}, {b})",
                            node.op.name()
                        )));
                    }
                    2 * s
                }
                OpKind::ScaleDown { amount } => {
                    let a = get(0);
                    if a < *amount {
                        return Err(Error::Validation(format!(
                            "node {id}: ScaleDown({amount}) underflows operand scale {a}"
                        )));
                    }
                    a - amount
                }
                OpKind::Add => {
                    let (a, b) = (get(0), get(1));
                    if a != b {
                        return Err(Error::Validation(format!(
                            "node {id}: scale mismatch between Add operands ({a} vs {b})"
                        )));
                    }
                    a
                }
                OpKind::ReLU
                | OpKind::MaxPool { .. }
                | OpKind::AvgPool { .. }
                | OpKind::ArgMax => {
                    let a = get(0);
                    if a != s {
                        return Err(Error::Validation(format!(
                            "node {id} ({}) consumes scale {a}, expected {s}",
                            node.op.name()
                        )));
                    }
                    a
                }
                OpKind::Reshape { .. } => get(0),
                OpKind::BatchNorm { .. } => unreachable!("rejected by validate()"),
            };
            bits.push(out);
        }
        let out_bits = bits[self.graph.output];
        if out_bits != s {
            return Err(Error::Validation(format!(
                "program output carries scale {out_bits}, expected {s}"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(op: OpKind, inputs: Vec<NodeId>) -> Node {
        Node { op, inputs }
    }

    fn spec(shape: Vec<usize>, dtype: DType) -> InputSpec {
        InputSpec { shape, dtype }
    }

    #[test]
    fn empty_graph_rejected() {
        let g = Graph {
            nodes: vec![],
            input_spec: spec(vec![1, 4], DType::F32),
            output: 0,
        };
        assert!(matches!(g.validate(Lang::Hlil, |_| false), Err(Error::Validation(_))));
    }

    #[test]
    fn dangling_input_rejected() {
        let g = Graph {
            nodes: vec![node(OpKind::Input, vec![]), node(OpKind::ReLU, vec![5])],
            input_spec: spec(vec![1, 4], DType::F32),
            output: 1,
        };
        let err = g.validate(Lang::Hlil, |_| false).unwrap_err();
        assert!(err.to_string().contains("not yet defined"));
    }

    #[test]
    fn hlil_rejects_llil_ops() {
        let g = Graph {
            nodes: vec![node(OpKind::Input, vec![]), node(OpKind::ScaleDown { amount: 15 }, vec![0])],
            input_spec: spec(vec![1, 4], DType::F32),
            output: 1,
        };
        assert!(g.validate(Lang::Hlil, |_| false).is_err());
        assert!(g.validate(Lang::Llil, |_| false).is_ok());
    }

    #[test]
    fn scale_walk_accepts_canonical_form() {
        // MatMul; ScaleDown; Add; ArgMax over scale-15 values.
        let graph = Graph {
            nodes: vec![
                node(OpKind::Input, vec![]),
                node(OpKind::Const, vec![]),
                node(OpKind::Const, vec![]),
                node(OpKind::MatMul, vec![0, 1]),
                node(OpKind::ScaleDown { amount: 15 }, vec![3]),
                node(OpKind::Add, vec![4, 2]),
                node(OpKind::ArgMax, vec![5]),
            ],
            input_spec: spec(vec![1, 4], DType::I64),
            output: 6,
        };
        let mut weights = BTreeMap::new();
        weights.insert(1, Tensor::filled(vec![4, 3], 0u64));
        weights.insert(2, Tensor::filled(vec![1, 3], 0u64));
        let prog = LlilProgram { scale: 15, graph, weights };
        prog.validate().unwrap();
    }

    #[test]
    fn scale_walk_rejects_missing_scaledown() {
        let graph = Graph {
            nodes: vec![
                node(OpKind::Input, vec![]),
                node(OpKind::Const, vec![]),
                node(OpKind::MatMul, vec![0, 1]),
                node(OpKind::ReLU, vec![2]),
            ],
            input_spec: spec(vec![1, 4], DType::I64),
            output: 3,
        };
        let mut weights = BTreeMap::new();
        weights.insert(1, Tensor::filled(vec![4, 3], 0u64));
        let prog = LlilProgram { scale: 15, graph, weights };
        assert!(prog.validate().is_err());
    }

    #[test]
    fn scale_walk_rejects_add_mismatch() {
        let graph = Graph {
            nodes: vec![
                node(OpKind::Input, vec![]),
                node(OpKind::Const, vec![]),
                node(OpKind::MatMul, vec![0, 1]),
                // Add of a 2s value and an s value.
                node(OpKind::Add, vec![2, 0]),
                node(OpKind::ScaleDown { amount: 15 }, vec![3]),
            ],
            input_spec: spec(vec![4, 4], DType::I64),
            output: 4,
        };
        let mut weights = BTreeMap::new();
        weights.insert(1, Tensor::filled(vec![4, 4], 0u64));
        let prog = LlilProgram { scale: 15, graph, weights };
        let err = prog.validate().unwrap_err();
        assert!(err.to_string().contains("scale mismatch"), "{err}");
    }
}
