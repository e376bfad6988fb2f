//! Pairwise PRF tapes: deterministic streams of ring elements derived from a
//! shared 128-bit key, so two parties can hold identical "random" values
//! without communicating. Tapes are AES-128 in counter mode over
//! (stream-id, counter); a stream-id is never reissued.

use std::collections::{HashMap, HashSet};

use aes::cipher::{generic_array::GenericArray, BlockEncrypt, KeyInit};
use aes::Aes128;

use crate::error::{Error, Result};
use crate::ring::{fp67, odd};

/// A 128-bit pairwise key (k01, k02 or k12).
#[derive(Clone, PartialEq, Eq)]
pub struct PrfKey(pub [u8; 16]);

impl PrfKey {
    pub fn from_hex(hex: &str) -> Result<Self> {
        let hex = hex.trim();
        if hex.len() != 32 || !hex.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(Error::Validation(format!(
                "key must be 32 hex chars, got {:?}",
                hex
            )));
        }
        let mut out = [0u8; 16];
        for (i, b) in out.iter_mut().enumerate() {
            *b = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16).unwrap();
        }
        Ok(PrfKey(out))
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl std::fmt::Debug for PrfKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PrfKey(..)")
    }
}

/// Purpose half of a stream-id. Both holders of a key open streams of the
/// same purpose in the same protocol order, which keeps their per-purpose
/// sequence counters aligned without communication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum TapePurpose {
    /// Beaver mask over the left operand.
    BeaverA = 1,
    /// Beaver mask over the right operand.
    BeaverB = 2,
    /// The helper-derived share of the triple product.
    BeaverC = 3,
    /// P0/P1 common randomness for share conversion (r splits and the blind bit).
    ScCommon = 4,
    /// P0/P1 common blinding and permutation for private compare.
    PcMask = 5,
    /// P0/P1 common blind bit for the msb step.
    MsbCommon = 6,
    /// P1's tape-derived half of every helper-dealt share pair.
    Deal = 7,
}

/// One pseudorandom element stream.
#[derive(Clone)]
pub struct PrfTape {
    cipher: Aes128,
    stream_id: u64,
    counter: u64,
}

impl PrfTape {
    pub fn new(key: &PrfKey, stream_id: u64) -> Self {
        PrfTape { cipher: Aes128::new(GenericArray::from_slice(&key.0)), stream_id, counter: 0 }
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    fn block(&self, index: u64) -> u64 {
        let mut block = [0u8; 16];
        block[..8].copy_from_slice(&self.stream_id.to_le_bytes());
        block[8..].copy_from_slice(&index.to_le_bytes());
        let mut ga = GenericArray::clone_from_slice(&block);
        self.cipher.encrypt_block(&mut ga);
        u64::from_le_bytes(ga[..8].try_into().unwrap())
    }

    /// Expand the next n ring elements.
    pub fn expand(&mut self, n: usize) -> Result<Vec<u64>> {
        self.counter
            .checked_add(n as u64)
            .ok_or_else(|| Error::Protocol(format!("stream {} exhausted", self.stream_id)))?;
        Ok((0..n).map(|_| self.next_u64()).collect())
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = self.block(self.counter);
        self.counter += 1;
        v
    }

    /// Uniform draw below `bound` by rejection sampling.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        let zone = u64::MAX - u64::MAX % bound;
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % bound;
            }
        }
    }

    /// Uniform element of the odd ring Z_(2^64 - 1).
    pub fn next_odd(&mut self) -> u64 {
        self.next_below(odd::MAX + 1)
    }

    pub fn next_fp67(&mut self) -> u64 {
        self.next_below(fp67::P)
    }

    pub fn next_nonzero_fp67(&mut self) -> u64 {
        self.next_below(fp67::P - 1) + 1
    }

    pub fn next_bit(&mut self) -> u64 {
        self.next_u64() & 1
    }

    /// A uniform permutation of 0..n (Fisher-Yates on tape draws).
    pub fn next_permutation(&mut self, n: usize) -> Vec<usize> {
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            perm.swap(i, j);
        }
        perm
    }
}

/// Stream allocator for one pairwise key: hands out fresh stream-ids,
/// refusing to reissue one.
pub struct TapeSource {
    key: PrfKey,
    used: HashSet<u64>,
    next_seq: HashMap<TapePurpose, u64>,
}

impl TapeSource {
    pub fn new(key: PrfKey) -> Self {
        TapeSource { key, used: HashSet::new(), next_seq: HashMap::new() }
    }

    /// Open the next stream for a purpose; the id is (purpose << 56) | seq.
    pub fn open(&mut self, purpose: TapePurpose) -> Result<PrfTape> {
        let seq = self.next_seq.entry(purpose).or_insert(0);
        debug_assert!(*seq < (1 << 56));
        let id = ((purpose as u64) << 56) | *seq;
        *seq += 1;
        self.open_stream(id)
    }

    /// Open an explicit stream-id; reissuing one is a hard error.
    pub fn open_stream(&mut self, stream_id: u64) -> Result<PrfTape> {
        if !self.used.insert(stream_id) {
            return Err(Error::Protocol(format!("stream-id {stream_id:#x} reissued")));
        }
        Ok(PrfTape::new(&self.key, stream_id))
    }
}
