use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Element type of a tensor: 32-bit floats before quantization, 64-bit ring
/// elements after.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    F32,
    I64,
}

/// Rank-annotated dense array in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Shape(format!("zero dimension in shape {shape:?}")));
        }
        let count: usize = shape.iter().product();
        if count != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} implies {count} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn scalar(value: T) -> Self {
        Tensor { shape: vec![1], data: vec![value] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Reinterpret the buffer under a new shape of equal element count.
    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Tensor::new(shape, self.data)
    }

    /// The (rows, cols) of a rank-2 tensor.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            [r, c] => Ok((*r, *c)),
            other => Err(Error::Shape(format!("expected rank-2 tensor, got {other:?}"))),
        }
    }

    pub fn at2(&self, row: usize, col: usize) -> &T {
        let (_, cols) = (self.shape[0], self.shape[1]);
        &self.data[row * cols + col]
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Tensor<U> {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(f).collect() }
    }
}

impl<T: Clone> Tensor<T> {
    pub fn filled(shape: Vec<usize>, value: T) -> Self {
        let count = shape.iter().product();
        Tensor { shape, data: vec![value; count] }
    }
}

/// A tensor of either element type, as stored in tensor container files.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Tensor<f32>),
    I64(Tensor<u64>),
}

impl TensorData {
    pub fn dtype(&self) -> DType {
        match self {
            TensorData::F32(_) => DType::F32,
            TensorData::I64(_) => DType::I64,
        }
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            TensorData::F32(t) => t.shape(),
            TensorData::I64(t) => t.shape(),
        }
    }

    pub fn as_f32(&self) -> Result<&Tensor<f32>> {
        match self {
            TensorData::F32(t) => Ok(t),
            TensorData::I64(_) => Err(Error::Validation("expected f32 tensor, got i64".into())),
        }
    }

    pub fn as_i64(&self) -> Result<&Tensor<u64>> {
        match self {
            TensorData::I64(t) => Ok(t),
            TensorData::F32(_) => Err(Error::Validation("expected i64 tensor, got f32".into())),
        }
    }
}

/// Index of the first maximal element under the given ordering key.
pub fn argmax_by<T, K: PartialOrd>(data: &[T], key: impl Fn(&T) -> K) -> usize {
    let mut best = 0;
    for i in 1..data.len() {
        if key(&data[i]) > key(&data[best]) {
            best = i;
        }
    }
    best
}
