//! On-disk formats.
//!
//! Model container: 8-byte magic `TMPC0001`, u32 little-endian JSON length,
//! JSON header (node list, attrs, shapes, weight offsets), then the weight
//! blob as little-endian IEEE-754 f32 (HLIL) or little-endian i64 (LLIL; the
//! header additionally carries the global `scale`).
//!
//! Tensor file: magic `TMPT`, u8 dtype (0 = f32, 1 = i64), u8 rank,
//! rank x u32 little-endian dims, then the payload little-endian.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, HlilGraph, InputSpec, LlilProgram, Node, OpKind};
use crate::tensor::{DType, Tensor, TensorData};

pub const MODEL_MAGIC: &[u8; 8] = b"TMPC0001";
pub const TENSOR_MAGIC: &[u8; 4] = b"TMPT";

#[derive(Debug, Serialize, Deserialize)]
struct ModelHeader {
    version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    scale: Option<u32>,
    input: InputSpec,
    output: u64,
    nodes: Vec<NodeEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeEntry {
    id: u64,
    #[serde(flatten)]
    op: OpKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    inputs: Vec<u64>,
    /// Const nodes: tensor shape and byte offset into the weight blob.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shape: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    offset: Option<u64>,
}

fn err(msg: impl Into<String>) -> Error {
    Error::Container(msg.into())
}

struct RawModel {
    header: ModelHeader,
    graph: Graph,
    /// (node index, shape, byte offset) for each const node.
    consts: Vec<(usize, Vec<usize>, u64)>,
    blob: Vec<u8>,
}

fn parse_raw(bytes: &[u8]) -> Result<RawModel> {
    if bytes.len() < MODEL_MAGIC.len() + 4 {
        return Err(err("file shorter than container header"));
    }
    if &bytes[..8] != MODEL_MAGIC {
        return Err(err("bad model magic (expected TMPC0001)"));
    }
    let json_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let json_end = 12 + json_len;
    if bytes.len() < json_end {
        return Err(err("declared JSON length exceeds file size"));
    }
    let header: ModelHeader = serde_json::from_slice(&bytes[12..json_end])
        .map_err(|e| err(format!("malformed JSON header: {e}")))?;
    if header.version != 1 {
        return Err(err(format!("unsupported container version {}", header.version)));
    }
    if header.nodes.is_empty() {
        return Err(err("empty node list: model has no output"));
    }

    // Map container ids to topological indices; references must point back.
    let mut index_of: HashMap<u64, usize> = HashMap::new();
    let mut nodes = Vec::with_capacity(header.nodes.len());
    let mut consts = Vec::new();
    for (idx, entry) in header.nodes.iter().enumerate() {
        if index_of.insert(entry.id, idx).is_some() {
            return Err(err(format!("duplicate node id {}", entry.id)));
        }
        let mut inputs = Vec::with_capacity(entry.inputs.len());
        for &src in &entry.inputs {
            match index_of.get(&src) {
                Some(&i) if i < idx => inputs.push(i),
                _ => {
                    return Err(err(format!(
                        "node {} references input id {src} not yet defined",
                        entry.id
                    )))
                }
            }
        }
        if entry.op == OpKind::Const {
            let shape = entry
                .shape
                .clone()
                .ok_or_else(|| err(format!("const node {} missing shape", entry.id)))?;
            let offset = entry
                .offset
                .ok_or_else(|| err(format!("const node {} missing offset", entry.id)))?;
            consts.push((idx, shape, offset));
        }
        nodes.push(Node { op: entry.op.clone(), inputs });
    }
    let output = *index_of
        .get(&header.output)
        .ok_or_else(|| err(format!("output id {} not defined", header.output)))?;

    let graph = Graph { nodes, input_spec: header.input.clone(), output };
    let blob = bytes[json_end..].to_vec();
    Ok(RawModel { header, graph, consts, blob })
}

fn read_weight<T: Clone>(
    blob: &[u8],
    shape: &[usize],
    offset: u64,
    width: usize,
    decode: impl Fn(&[u8]) -> T,
) -> Result<Tensor<T>> {
    let count: usize = shape.iter().product();
    let start = offset as usize;
    let end = start
        .checked_add(count * width)
        .ok_or_else(|| err("weight offset overflow"))?;
    if end > blob.len() {
        return Err(err(format!(
            "weight blob too short: shape {shape:?} at offset {offset} needs {} bytes, blob has {}",
            count * width,
            blob.len()
        )));
    }
    let data = blob[start..end].chunks_exact(width).map(decode).collect();
    Tensor::new(shape.to_vec(), data)
}

/// Parse and validate an HLIL model container.
pub fn parse_model(bytes: &[u8]) -> Result<HlilGraph> {
    let raw = parse_raw(bytes)?;
    if raw.header.scale.is_some() {
        return Err(err("HLIL container must not carry a scale field"));
    }
    let mut weights = BTreeMap::new();
    for (idx, shape, offset) in &raw.consts {
        let t = read_weight(&raw.blob, shape, *offset, 4, |b| {
            f32::from_le_bytes(b.try_into().unwrap())
        })?;
        weights.insert(*idx, t);
    }
    let model = HlilGraph { graph: raw.graph, weights };
    model.validate()?;
    Ok(model)
}

/// Parse and validate an LLIL container (fixed-point program).
pub fn parse_llil(bytes: &[u8]) -> Result<LlilProgram> {
    let raw = parse_raw(bytes)?;
    let scale = raw.header.scale.ok_or_else(|| err("LLIL container missing scale field"))?;
    let mut weights = BTreeMap::new();
    for (idx, shape, offset) in &raw.consts {
        let t = read_weight(&raw.blob, shape, *offset, 8, |b| {
            u64::from_le_bytes(b.try_into().unwrap())
        })?;
        weights.insert(*idx, t);
    }
    let program = LlilProgram { scale, graph: raw.graph, weights };
    program.validate()?;
    Ok(program)
}

fn encode_header(
    scale: Option<u32>,
    graph: &Graph,
    mut const_entry: impl FnMut(usize, &mut Vec<u8>) -> (Vec<usize>, u64),
) -> Result<Vec<u8>> {
    let mut blob = Vec::new();
    let nodes = graph
        .nodes
        .iter()
        .enumerate()
        .map(|(idx, node)| {
            let (shape, offset) = if node.op == OpKind::Const {
                let (s, o) = const_entry(idx, &mut blob);
                (Some(s), Some(o))
            } else {
                (None, None)
            };
            NodeEntry {
                id: idx as u64,
                op: node.op.clone(),
                inputs: node.inputs.iter().map(|&i| i as u64).collect(),
                shape,
                offset,
            }
        })
        .collect();
    let header = ModelHeader {
        version: 1,
        scale,
        input: graph.input_spec.clone(),
        output: graph.output as u64,
        nodes,
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(12 + json.len() + blob.len());
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&blob);
    Ok(out)
}

/// Serialize an HLIL model to container bytes.
pub fn write_model(model: &HlilGraph) -> Result<Vec<u8>> {
    model.validate()?;
    encode_header(None, &model.graph, |idx, blob| {
        let t = &model.weights[&idx];
        let offset = blob.len() as u64;
        for v in t.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
        (t.shape().to_vec(), offset)
    })
}

/// Serialize an LLIL program to container bytes.
pub fn write_llil(program: &LlilProgram) -> Result<Vec<u8>> {
    program.validate()?;
    encode_header(Some(program.scale), &program.graph, |idx, blob| {
        let t = &program.weights[&idx];
        let offset = blob.len() as u64;
        for v in t.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
        (t.shape().to_vec(), offset)
    })
}

/// Serialize a tensor to TMPT bytes.
pub fn write_tensor(t: &TensorData) -> Vec<u8> {
    let shape = t.shape();
    let mut out = Vec::new();
    out.extend_from_slice(TENSOR_MAGIC);
    out.push(match t.dtype() {
        DType::F32 => 0,
        DType::I64 => 1,
    });
    out.push(shape.len() as u8);
    for &d in shape {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    match t {
        TensorData::F32(t) => {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        TensorData::I64(t) => {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

/// Parse a TMPT tensor file.
pub fn parse_tensor(bytes: &[u8]) -> Result<TensorData> {
    if bytes.len() < 6 {
        return Err(err("tensor file shorter than header"));
    }
    if &bytes[..4] != TENSOR_MAGIC {
        return Err(err("bad tensor magic (expected TMPT)"));
    }
    let dtype = match bytes[4] {
        0 => DType::F32,
        1 => DType::I64,
        other => return Err(err(format!("unknown tensor dtype byte {other}"))),
    };
    let rank = bytes[5] as usize;
    let dims_end = 6 + rank * 4;
    if bytes.len() < dims_end {
        return Err(err("tensor file truncated in dims"));
    }
    let shape: Vec<usize> = bytes[6..dims_end]
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()) as usize)
        .collect();
    let count: usize = shape.iter().product();
    let payload = &bytes[dims_end..];
    match dtype {
        DType::F32 => {
            if payload.len() != count * 4 {
                return Err(err("tensor payload length does not match shape"));
            }
            let data = payload
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            Ok(TensorData::F32(Tensor::new(shape, data)?))
        }
        DType::I64 => {
            if payload.len() != count * 8 {
                return Err(err("tensor payload length does not match shape"));
            }
            let data = payload
                .chunks_exact(8)
                .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
                .collect();
            Ok(TensorData::I64(Tensor::new(shape, data)?))
        }
    }
}

pub fn read_model_file(path: &Path) -> Result<HlilGraph> {
    parse_model(&fs::read(path)?)
}

pub fn read_llil_file(path: &Path) -> Result<LlilProgram> {
    parse_llil(&fs::read(path)?)
}

pub fn read_tensor_file(path: &Path) -> Result<TensorData> {
    parse_tensor(&fs::read(path)?)
}

pub fn write_tensor_file(path: &Path, t: &TensorData) -> Result<()> {
    fs::write(path, write_tensor(t))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use proptest::prelude::*;

    #[test]
    fn logistic_regression_roundtrip() {
        // MatMul, Add, ArgMax over a 1x784 input: 4-node graph.
        let model = models::logistic_regression(784, 10, 7);
        let bytes = write_model(&model).unwrap();
        let parsed = parse_model(&bytes).unwrap();
        assert_eq!(parsed.graph.nodes.len(), model.graph.nodes.len());
        assert_eq!(parsed, model);
        let names: Vec<_> = parsed.graph.nodes.iter().map(|n| n.op.name()).collect();
        assert_eq!(names, ["Input", "Const", "Const", "MatMul", "Add", "ArgMax"]);
    }

    #[test]
    fn dangling_reference_rejected() {
        let model = models::logistic_regression(4, 3, 1);
        let mut bytes = write_model(&model).unwrap();
        // Rewrite the MatMul's weight input (id 1) to an undefined id.
        let json_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let json = String::from_utf8(bytes[12..12 + json_len].to_vec()).unwrap();
        let patched = json.replacen("\"inputs\":[0,1]", "\"inputs\":[0,9]", 1);
        assert_ne!(json, patched);
        bytes.splice(12..12 + json_len, patched.bytes());
        bytes[8..12].copy_from_slice(&(patched.len() as u32).to_le_bytes());
        let e = parse_model(&bytes).unwrap_err();
        assert!(e.to_string().contains("not yet defined"), "{e}");
    }

    #[test]
    fn empty_node_list_rejected() {
        let json = br#"{"version":1,"input":{"shape":[1],"dtype":"f32"},"output":0,"nodes":[]}"#;
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MODEL_MAGIC);
        bytes.extend_from_slice(&(json.len() as u32).to_le_bytes());
        bytes.extend_from_slice(json);
        let e = parse_model(&bytes).unwrap_err();
        assert!(e.to_string().contains("no output"), "{e}");
    }

    #[test]
    fn blob_shorter_than_shape_rejected() {
        let model = models::logistic_regression(4, 3, 1);
        let mut bytes = write_model(&model).unwrap();
        bytes.truncate(bytes.len() - 4);
        let e = parse_model(&bytes).unwrap_err();
        assert!(e.to_string().contains("blob too short"), "{e}");
    }

    proptest! {
        #[test]
        fn tensor_file_roundtrip(shape in prop::collection::vec(1usize..5, 1..4), float in any::<bool>()) {
            let count: usize = shape.iter().product();
            let t = if float {
                TensorData::F32(Tensor::new(shape, (0..count).map(|i| i as f32 * 0.5 - 1.0).collect()).unwrap())
            } else {
                TensorData::I64(Tensor::new(shape, (0..count).map(|i| u64::MAX - i as u64).collect()).unwrap())
            };
            let bytes = write_tensor(&t);
            prop_assert_eq!(parse_tensor(&bytes).unwrap(), t);
        }
    }
}
