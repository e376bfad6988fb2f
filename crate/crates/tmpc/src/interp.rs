//! Reference interpreters for both languages. `eval_float` defines the
//! floating-point semantics; `eval_fixed` defines the ring semantics that the
//! 3-party protocols must reproduce bit-for-bit (up to the documented
//! truncation slack). Accumulation order is row-major and fixed so oracle
//! outputs are bit-stable.

use crate::error::{Error, Result};
use crate::graph::{HlilGraph, LlilProgram, NodeId, OpKind, Padding};
use crate::ring;
use crate::shapes::{self, infer_shapes};
use crate::tensor::{argmax_by, DType, Tensor};

/// Zero-pad a rank-2 tensor for SAME convolutions.
fn pad2<T: Copy + Default>(
    t: &Tensor<T>,
    (pl1, ph1): (usize, usize),
    (pl2, ph2): (usize, usize),
) -> Tensor<T> {
    let (m1, m2) = (t.shape()[0], t.shape()[1]);
    let (n1, n2) = (m1 + pl1 + ph1, m2 + pl2 + ph2);
    let mut out = vec![T::default(); n1 * n2];
    for i in 0..m1 {
        for j in 0..m2 {
            out[(i + pl1) * n2 + (j + pl2)] = *t.at2(i, j);
        }
    }
    Tensor::new(vec![n1, n2], out).expect("padded shape")
}

/// Apply SAME padding if requested; VALID is the identity.
pub fn apply_padding<T: Copy + Default>(
    image: &Tensor<T>,
    (f1, f2): (usize, usize),
    stride: usize,
    padding: Padding,
) -> Tensor<T> {
    match padding {
        Padding::Valid => image.clone(),
        Padding::Same => {
            let (m1, m2) = (image.shape()[0], image.shape()[1]);
            pad2(image, shapes::same_padding(m1, f1, stride), shapes::same_padding(m2, f2, stride))
        }
    }
}

/// Rearrange image patches into matrix rows: one row per output position,
/// f1*f2 columns. Linear in the image, which is what lets the reshaped
/// convolution protocol im2col a public masked difference.
pub fn im2col<T: Copy + Default>(
    image: &Tensor<T>,
    (f1, f2): (usize, usize),
    stride: usize,
) -> Tensor<T> {
    let (m1, m2) = (image.shape()[0], image.shape()[1]);
    let q1 = (m1 - f1) / stride + 1;
    let q2 = (m2 - f2) / stride + 1;
    let mut rows = Vec::with_capacity(q1 * q2 * f1 * f2);
    for i in 0..q1 {
        for j in 0..q2 {
            for a in 0..f1 {
                for b in 0..f2 {
                    rows.push(*image.at2(i * stride + a, j * stride + b));
                }
            }
        }
    }
    Tensor::new(vec![q1 * q2, f1 * f2], rows).expect("im2col shape")
}

/// Cross-correlation over Z_2^64, direct nested-loop form. Equals the
/// im2col . vec(filter) route exactly; that equality is the oracle for the
/// MPC convolution.
pub fn conv2d_ref(
    image: &Tensor<u64>,
    filter: &Tensor<u64>,
    stride: usize,
    padding: Padding,
) -> Result<Tensor<u64>> {
    let (f1, f2) = filter.dims2()?;
    let (m1, m2) = image.dims2()?;
    if padding == Padding::Valid && (f1 > m1 || f2 > m2) {
        return Err(Error::Shape(format!(
            "filter ({f1}x{f2}) larger than image ({m1}x{m2})"
        )));
    }
    let padded = apply_padding(image, (f1, f2), stride, padding);
    let (p1, p2) = padded.dims2()?;
    let q1 = (p1 - f1) / stride + 1;
    let q2 = (p2 - f2) / stride + 1;
    let mut out = Vec::with_capacity(q1 * q2);
    for i in 0..q1 {
        for j in 0..q2 {
            let mut acc = 0u64;
            for a in 0..f1 {
                for b in 0..f2 {
                    acc = acc.wrapping_add(
                        padded.at2(i * stride + a, j * stride + b).wrapping_mul(*filter.at2(a, b)),
                    );
                }
            }
            out.push(acc);
        }
    }
    Tensor::new(vec![q1, q2], out)
}

/// The same convolution through the im2col route (the independent oracle
/// path used by tests and by the naive protocol mode).
pub fn conv2d_im2col(
    image: &Tensor<u64>,
    filter: &Tensor<u64>,
    stride: usize,
    padding: Padding,
) -> Result<Tensor<u64>> {
    let (f1, f2) = filter.dims2()?;
    let (m1, m2) = image.dims2()?;
    if padding == Padding::Valid && (f1 > m1 || f2 > m2) {
        return Err(Error::Shape(format!(
            "filter ({f1}x{f2}) larger than image ({m1}x{m2})"
        )));
    }
    let padded = apply_padding(image, (f1, f2), stride, padding);
    let patches = im2col(&padded, (f1, f2), stride);
    let (rows, cols) = patches.dims2()?;
    let prod = ring::mat_mul(patches.data(), filter.data(), rows, cols, 1);
    let (p1, p2) = padded.dims2()?;
    let q1 = (p1 - f1) / stride + 1;
    let q2 = (p2 - f2) / stride + 1;
    Tensor::new(vec![q1, q2], prod)
}

/// Window index lists for pooling: returns (q1, q2, windows) where each
/// window lists the flat input indices it covers, in row-major order.
pub fn pool_windows(
    (m1, m2): (usize, usize),
    window: usize,
    stride: usize,
) -> Result<(usize, usize, Vec<Vec<usize>>)> {
    if window > m1 || window > m2 {
        return Err(Error::Shape(format!(
            "pool window {window} larger than input ({m1}x{m2})"
        )));
    }
    let q1 = (m1 - window) / stride + 1;
    let q2 = (m2 - window) / stride + 1;
    let mut windows = Vec::with_capacity(q1 * q2);
    for i in 0..q1 {
        for j in 0..q2 {
            let mut idx = Vec::with_capacity(window * window);
            for a in 0..window {
                for b in 0..window {
                    idx.push((i * stride + a) * m2 + (j * stride + b));
                }
            }
            windows.push(idx);
        }
    }
    Ok((q1, q2, windows))
}

fn broadcast_pairs<'a, T>(
    a: &'a Tensor<T>,
    b: &'a Tensor<T>,
) -> Result<Box<dyn Iterator<Item = (&'a T, &'a T)> + 'a>> {
    if a.shape() == b.shape() {
        return Ok(Box::new(a.data().iter().zip(b.data().iter())));
    }
    // One side is a (1, n) bias against (m, n).
    let (big, small, swap) = if a.shape().first() != Some(&1) || a.rank() != 2 {
        (a, b, false)
    } else {
        (b, a, true)
    };
    let n = small.len();
    let it = big.data().iter().enumerate().map(move |(i, x)| {
        let y = &small.data()[i % n];
        if swap {
            (y, x)
        } else {
            (x, y)
        }
    });
    Ok(Box::new(it))
}

fn bias_binop<T: Copy + Default>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    out_shape: Vec<usize>,
    f: impl Fn(T, T) -> T,
) -> Result<Tensor<T>> {
    let data = broadcast_pairs(a, b)?.map(|(x, y)| f(*x, *y)).collect();
    Tensor::new(out_shape, data)
}

fn norm_param(t: &Tensor<f32>, col: usize) -> f32 {
    t.data()[col % t.len()]
}

/// Evaluate an HLIL graph on a float input under the reference semantics.
pub fn eval_float(model: &HlilGraph, input: &Tensor<f32>) -> Result<Tensor<f32>> {
    model.validate()?;
    let shapes = infer_shapes(&model.graph, &model.weight_shapes())?;
    if input.shape() != model.graph.input_spec.shape || model.graph.input_spec.dtype != DType::F32
    {
        return Err(Error::Shape(format!(
            "input shape {:?} does not match spec {:?}",
            input.shape(),
            model.graph.input_spec.shape
        )));
    }

    let mut values: Vec<Tensor<f32>> = Vec::with_capacity(model.graph.nodes.len());
    for (id, node) in model.graph.nodes.iter().enumerate() {
        let arg = |i: usize| -> &Tensor<f32> { &values[node.inputs[i]] };
        let out = match &node.op {
            OpKind::Input => input.clone(),
            OpKind::Const => model.weights[&id].clone(),
            OpKind::MatMul => {
                let (a, b) = (arg(0), arg(1));
                let (m, k) = a.dims2()?;
                let (_, n) = b.dims2()?;
                let mut out = Vec::with_capacity(m * n);
                for i in 0..m {
                    for j in 0..n {
                        // IEEE-754 single operands accumulated in double.
                        let mut acc = 0f64;
                        for l in 0..k {
                            acc += (*a.at2(i, l) as f64) * (*b.at2(l, j) as f64);
                        }
                        out.push(acc as f32);
                    }
                }
                Tensor::new(vec![m, n], out)?
            }
            OpKind::Add => bias_binop(arg(0), arg(1), shapes[id].clone(), |x, y| x + y)?,
            OpKind::Mul | OpKind::ScaleDown { .. } => {
                return Err(Error::Validation(format!(
                    "{} is not a floating-point op",
                    node.op.name()
                )))
            }
            OpKind::Conv2D { stride, padding } => {
                let (image, filter) = (arg(0), arg(1));
                let (f1, f2) = filter.dims2()?;
                let padded = apply_padding(image, (f1, f2), *stride, *padding);
                let (p1, p2) = padded.dims2()?;
                let q1 = (p1 - f1) / stride + 1;
                let q2 = (p2 - f2) / stride + 1;
                let mut out = Vec::with_capacity(q1 * q2);
                for i in 0..q1 {
                    for j in 0..q2 {
                        let mut acc = 0f64;
                        for a in 0..f1 {
                            for b in 0..f2 {
                                acc += (*padded.at2(i * stride + a, j * stride + b) as f64)
                                    * (*filter.at2(a, b) as f64);
                            }
                        }
                        out.push(acc as f32);
                    }
                }
                Tensor::new(vec![q1, q2], out)?
            }
            OpKind::ReLU => arg(0).map(|&x| if x > 0.0 { x } else { 0.0 }),
            OpKind::MaxPool { window, stride } => {
                let x = arg(0);
                let (m1, m2) = x.dims2()?;
                let (q1, q2, windows) = pool_windows((m1, m2), *window, *stride)?;
                let data = windows
                    .iter()
                    .map(|w| w.iter().map(|&i| x.data()[i]).fold(f32::NEG_INFINITY, f32::max))
                    .collect();
                Tensor::new(vec![q1, q2], data)?
            }
            OpKind::AvgPool { window, stride } => {
                let x = arg(0);
                let (m1, m2) = x.dims2()?;
                let (q1, q2, windows) = pool_windows((m1, m2), *window, *stride)?;
                let d = (window * window) as f64;
                let data = windows
                    .iter()
                    .map(|w| (w.iter().map(|&i| x.data()[i] as f64).sum::<f64>() / d) as f32)
                    .collect();
                Tensor::new(vec![q1, q2], data)?
            }
            OpKind::BatchNorm { epsilon } => {
                let x = arg(0);
                let (gamma, beta, mean, var) = (arg(1), arg(2), arg(3), arg(4));
                let (_, n) = x.dims2()?;
                let data = x
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        let c = i % n;
                        let g = norm_param(gamma, c) as f64;
                        let b = norm_param(beta, c) as f64;
                        let mu = norm_param(mean, c) as f64;
                        let s2 = norm_param(var, c) as f64;
                        (g * (v as f64 - mu) / (s2 + *epsilon as f64).sqrt() + b) as f32
                    })
                    .collect();
                Tensor::new(x.shape().to_vec(), data)?
            }
            OpKind::Reshape { shape } => arg(0).clone().reshape(shape.clone())?,
            OpKind::ArgMax => {
                let x = arg(0);
                Tensor::scalar(argmax_by(x.data(), |v| *v) as f32)
            }
        };
        values.push(out);
    }
    Ok(values.swap_remove(model.graph.output))
}

/// Evaluate an LLIL program on a pre-quantized input. All arithmetic wraps
/// mod 2^64; comparisons use the signed interpretation; nothing traps.
pub fn eval_fixed(program: &LlilProgram, input: &Tensor<u64>) -> Result<Tensor<u64>> {
    Ok(eval_fixed_checked(program, input)?.0)
}

/// Like [`eval_fixed`] but also reports whether any intermediate value left
/// the 2^62 guard band — the saturation sentinel the precision sweep uses to
/// flag overflow without trapping.
pub fn eval_fixed_checked(
    program: &LlilProgram,
    input: &Tensor<u64>,
) -> Result<(Tensor<u64>, bool)> {
    program.validate()?;
    if input.shape() != program.graph.input_spec.shape {
        return Err(Error::Shape(format!(
            "input shape {:?} does not match spec {:?}",
            input.shape(),
            program.graph.input_spec.shape
        )));
    }

    let guard = 1i64 << ring::GUARD_BITS;
    let mut overflow = false;
    let mut values: Vec<Tensor<u64>> = Vec::with_capacity(program.graph.nodes.len());
    for (id, node) in program.graph.nodes.iter().enumerate() {
        let arg = |i: usize| -> &Tensor<u64> { &values[node.inputs[i]] };
        let out = eval_fixed_node(program, id, node, arg, input)?;
        // ArgMax emits a plain index, which never signals saturation.
        if node.op != OpKind::ArgMax {
            overflow |= out.data().iter().any(|&x| ring::to_signed(x).unsigned_abs() >= guard as u64);
        }
        values.push(out);
    }
    Ok((values.swap_remove(program.graph.output), overflow))
}

fn eval_fixed_node<'a>(
    program: &LlilProgram,
    id: NodeId,
    node: &crate::graph::Node,
    arg: impl Fn(usize) -> &'a Tensor<u64>,
    input: &Tensor<u64>,
) -> Result<Tensor<u64>> {
    let signed_max = |w: &[usize], x: &Tensor<u64>| -> Vec<u64> {
        let mut best = x.data()[w[0]];
        for &i in &w[1..] {
            if ring::to_signed(x.data()[i]) > ring::to_signed(best) {
                best = x.data()[i];
            }
        }
        vec![best]
    };
    match &node.op {
        OpKind::Input => Ok(input.clone()),
        OpKind::Const => Ok(program.weights[&id].clone()),
        OpKind::MatMul => {
            let (a, b) = (arg(0), arg(1));
            let (m, k) = a.dims2()?;
            let (_, n) = b.dims2()?;
            Tensor::new(vec![m, n], ring::mat_mul(a.data(), b.data(), m, k, n))
        }
        OpKind::Add => {
            let shape = shapes::infer_binop_shape(arg(0).shape(), arg(1).shape())?;
            bias_binop(arg(0), arg(1), shape, |x: u64, y| x.wrapping_add(y))
        }
        OpKind::Mul => {
            let shape = shapes::infer_binop_shape(arg(0).shape(), arg(1).shape())?;
            bias_binop(arg(0), arg(1), shape, |x: u64, y| x.wrapping_mul(y))
        }
        OpKind::Conv2D { stride, padding } => conv2d_ref(arg(0), arg(1), *stride, *padding),
        OpKind::ScaleDown { amount } => Ok(arg(0).map(|&x| ring::shift_down(x, *amount))),
        OpKind::ReLU => Ok(arg(0).map(|&x| if ring::to_signed(x) >= 0 { x } else { 0 })),
        OpKind::MaxPool { window, stride } => {
            let x = arg(0);
            let (q1, q2, windows) = pool_windows(x.dims2()?, *window, *stride)?;
            let data = windows.iter().flat_map(|w| signed_max(w, x)).collect();
            Tensor::new(vec![q1, q2], data)
        }
        OpKind::AvgPool { window, stride } => {
            let x = arg(0);
            let (q1, q2, windows) = pool_windows(x.dims2()?, *window, *stride)?;
            let d = (window * window) as i64;
            let data = windows
                .iter()
                .map(|w| {
                    let sum = w.iter().fold(0u64, |acc, &i| acc.wrapping_add(x.data()[i]));
                    ring::from_signed(ring::to_signed(sum).div_euclid(d))
                })
                .collect();
            Tensor::new(vec![q1, q2], data)
        }
        OpKind::Reshape { shape } => arg(0).clone().reshape(shape.clone()),
        OpKind::ArgMax => {
            let x = arg(0);
            Ok(Tensor::scalar(argmax_by(x.data(), |&v| ring::to_signed(v)) as u64))
        }
        OpKind::BatchNorm { .. } => {
            Err(Error::Validation("BatchNorm does not survive lowering".into()))
        }
    }
}
