//! Per-party JSON configuration: identity, mesh addresses, the two pairwise
//! keys this party holds, and protocol flags.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prf::PrfKey;

fn default_true() -> bool {
    true
}

fn default_timeout_ms() -> u64 {
    10_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartyConfig {
    pub party_id: u8,
    /// Address this party listens on for lower-id peers.
    pub listen: String,
    /// Peer id -> address, for the peers this party dials.
    pub peers: BTreeMap<u8, String>,
    /// Pairwise keys, hex-encoded: each party holds exactly the two keys
    /// naming it (e.g. P0 holds k01 and k02).
    pub keys: BTreeMap<String, String>,
    /// Whether the final output is revealed to this party (P0 or P1 only).
    #[serde(default)]
    pub output_recipient: bool,
    /// Convolution triples reshaped at image granularity (on by default).
    #[serde(default = "default_true")]
    pub reshaped_conv: bool,
    /// Helper sends one share of every dealt pair, the other comes off the
    /// k12 tape (on by default).
    #[serde(default = "default_true")]
    pub prf_opt: bool,
    /// Seed for the helper's correlated-randomness sampling; fixed seeds and
    /// keys make the whole transcript reproducible.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

impl PartyConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: PartyConfig = serde_json::from_slice(&std::fs::read(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.party_id > 2 {
            return Err(Error::Validation(format!("party_id {} out of range", self.party_id)));
        }
        if self.output_recipient && self.party_id == 2 {
            return Err(Error::Validation(
                "the helper cannot be the output recipient".into(),
            ));
        }
        let expected: Vec<u8> = (0..3).filter(|&p| p != self.party_id).collect();
        let have: Vec<u8> = self.peers.keys().copied().collect();
        if have != expected {
            return Err(Error::Validation(format!(
                "party {} must list peers {expected:?}, got {have:?}",
                self.party_id
            )));
        }
        for name in self.key_names() {
            let hex = self
                .keys
                .get(name)
                .ok_or_else(|| Error::Validation(format!("missing key {name}")))?;
            PrfKey::from_hex(hex)?;
        }
        if self.keys.len() != 2 {
            return Err(Error::Validation(format!(
                "party {} must hold exactly its two pairwise keys",
                self.party_id
            )));
        }
        Ok(())
    }

    fn key_names(&self) -> [&'static str; 2] {
        match self.party_id {
            0 => ["k01", "k02"],
            1 => ["k01", "k12"],
            _ => ["k02", "k12"],
        }
    }

    /// The key shared with `peer`.
    pub fn key_with(&self, peer: u8) -> Result<PrfKey> {
        let name = pair_key_name(self.party_id, peer);
        let hex = self
            .keys
            .get(name)
            .ok_or_else(|| Error::Validation(format!("missing key {name}")))?;
        PrfKey::from_hex(hex)
    }
}

pub fn pair_key_name(a: u8, b: u8) -> &'static str {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    match (lo, hi) {
        (0, 1) => "k01",
        (0, 2) => "k02",
        _ => "k12",
    }
}
