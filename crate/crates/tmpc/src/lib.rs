//! End-to-end private inference toolchain: compile a floating-point model
//! graph to fixed-point integer code over Z_2^64, then execute it in
//! cleartext or as a semi-honest 3-party secure computation with exact
//! communication accounting.
//!
//! The pipeline has three stages:
//!
//! 1. **Model IR** ([`graph`], [`interp`], [`container`]) — the HLIL
//!    floating-point graph language, its fixed-point LLIL lowering, and
//!    reference interpreters for both. The interpreters are the correctness
//!    oracle for everything else.
//! 2. **Compiler** ([`compile`], [`sweep`], [`fixed`]) — quantizes weights
//!    at a global scale s, inserts explicit `ScaleDown` nodes after every
//!    multiplication, and selects s by sweeping a calibration set.
//! 3. **Protocol runtime** ([`protocol`], [`net`]) — parties P0 and P1 hold
//!    additive shares of all live data, P2 deals correlated randomness.
//!    Convolution triples are reshaped at image granularity and helper
//!    egress is halved by deriving one share of every dealt pair from a
//!    pairwise PRF tape.
//!
//! See the crate examples for one runnable program per capability.

pub mod cli;
pub mod comm;
pub mod compile;
pub mod container;
pub mod dealer;
pub mod error;
pub mod fixed;
pub mod graph;
pub mod interp;
pub mod models;
pub mod net;
pub mod prf;
pub mod protocol;
pub mod ring;
pub mod shapes;
pub mod sweep;
pub mod tensor;

pub use error::{Error, Result};
pub use graph::{HlilGraph, LlilProgram};
pub use tensor::{DType, Tensor, TensorData};
