//! Test-mode trusted dealer: splits a program's weights and a query input
//! into additive shares and lays them out on disk, one directory per party.
//! The helper gets no data shares. Deterministic under the seed.
//!
//! Layout under the output directory:
//!   program.llil       public program structure with zeroed weights
//!   p0/input.tmpt, p0/w<id>.tmpt   P0's shares (tensor container format)
//!   p1/...                          P1's shares
//!   p2/                             empty (keys live in the party config)

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::container::{read_tensor_file, write_llil, write_tensor_file};
use crate::error::{Error, Result};
use crate::graph::LlilProgram;
use crate::protocol::exec::PartyShares;
use crate::protocol::share_tensor;
use crate::tensor::{Tensor, TensorData};

/// In-memory share split of one program run.
#[derive(Debug, Clone)]
pub struct DealtShares {
    pub p0: PartyShares,
    pub p1: PartyShares,
}

pub fn deal_shares(program: &LlilProgram, input: &Tensor<u64>, seed: u64) -> Result<DealtShares> {
    if input.shape() != program.graph.input_spec.shape {
        return Err(Error::Shape(format!(
            "input shape {:?} does not match program spec {:?}",
            input.shape(),
            program.graph.input_spec.shape
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (i0, i1) = share_tensor(input, &mut rng);
    let mut w0 = BTreeMap::new();
    let mut w1 = BTreeMap::new();
    for (&id, w) in &program.weights {
        let (a, b) = share_tensor(w, &mut rng);
        w0.insert(id, a);
        w1.insert(id, b);
    }
    Ok(DealtShares {
        p0: PartyShares { input: i0, weights: w0 },
        p1: PartyShares { input: i1, weights: w1 },
    })
}

/// The program with its weight values zeroed: structure and shapes are
/// public, values are not.
pub fn public_program(program: &LlilProgram) -> LlilProgram {
    let mut public = program.clone();
    for w in public.weights.values_mut() {
        *w = Tensor::filled(w.shape().to_vec(), 0);
    }
    public
}

/// Deal to disk: program.llil plus per-party share directories.
pub fn write_dealt(
    dir: &Path,
    program: &LlilProgram,
    input: &Tensor<u64>,
    seed: u64,
) -> Result<DealtShares> {
    let dealt = deal_shares(program, input, seed)?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("program.llil"), write_llil(&public_program(program))?)?;
    for (party, shares) in [(0u8, &dealt.p0), (1u8, &dealt.p1)] {
        let pdir = dir.join(format!("p{party}"));
        fs::create_dir_all(&pdir)?;
        write_tensor_file(&pdir.join("input.tmpt"), &TensorData::I64(shares.input.clone()))?;
        for (&id, w) in &shares.weights {
            write_tensor_file(&pdir.join(format!("w{id}.tmpt")), &TensorData::I64(w.clone()))?;
        }
    }
    fs::create_dir_all(dir.join("p2"))?;
    Ok(dealt)
}

/// Read one holder's share files back.
pub fn read_party_shares(dir: &Path, party: u8, program: &LlilProgram) -> Result<PartyShares> {
    let pdir = dir.join(format!("p{party}"));
    let input = read_tensor_file(&pdir.join("input.tmpt"))?.as_i64()?.clone();
    let mut weights = BTreeMap::new();
    for &id in program.weights.keys() {
        let w = read_tensor_file(&pdir.join(format!("w{id}.tmpt")))?.as_i64()?.clone();
        weights.insert(id, w);
    }
    Ok(PartyShares { input, weights })
}
