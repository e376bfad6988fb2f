//! The semi-honest 3-party protocol engine over Z_2^64. Parties P0 and P1
//! hold 2-out-of-2 additive shares of all live data; P2 is a helper that
//! deals correlated randomness and never holds data shares.
//!
//! Helper egress has one shape everywhere: P2 needs P0 and P1 to hold an
//! additive sharing of some value it computed. P1's share is read off the
//! k12 tape (P2 holds that key too), so only P0's share crosses the wire.
//! With `prf_opt` off, both shares are sent; that is the entire difference
//! the halving measurement sees.

pub mod argmax;
pub mod beaver;
pub mod compare;
pub mod conv;
pub mod convert;
pub mod exec;
pub mod pool;
pub mod relu;
pub mod truncate;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::comm::{CommEntry, CommReport, Phase, TranscriptDigest};
use crate::error::{Error, Result};
use crate::net::channel::Link;
use crate::prf::{PrfKey, PrfTape, TapePurpose, TapeSource};
use crate::ring::{fp67, odd};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartyId {
    P0 = 0,
    P1 = 1,
    P2 = 2,
}

impl PartyId {
    pub fn from_u8(id: u8) -> Result<PartyId> {
        match id {
            0 => Ok(PartyId::P0),
            1 => Ok(PartyId::P1),
            2 => Ok(PartyId::P2),
            other => Err(Error::Validation(format!("party id {other} out of range"))),
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn is_helper(self) -> bool {
        self == PartyId::P2
    }

    /// 0 for P0, 1 for P1; the helper has no holder index.
    pub fn holder_index(self) -> Option<u64> {
        match self {
            PartyId::P0 => Some(0),
            PartyId::P1 => Some(1),
            PartyId::P2 => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ProtocolFlags {
    pub reshaped_conv: bool,
    pub prf_opt: bool,
}

impl Default for ProtocolFlags {
    fn default() -> Self {
        ProtocolFlags { reshaped_conv: true, prf_opt: true }
    }
}

/// Everything one party needs to run protocols: identity, channels to the
/// other two parties, pairwise tape sources, counters (inside the links) and
/// flags. Confined to its protocol thread.
pub struct PartyContext {
    id: PartyId,
    links: BTreeMap<u8, Link>,
    tapes: BTreeMap<u8, TapeSource>,
    pub flags: ProtocolFlags,
    output_recipient: bool,
    helper_rng: ChaCha20Rng,
}

impl PartyContext {
    pub fn new(
        id: PartyId,
        links: Vec<Link>,
        keys: BTreeMap<u8, PrfKey>,
        flags: ProtocolFlags,
        output_recipient: bool,
        seed: u64,
    ) -> Result<Self> {
        let links: BTreeMap<u8, Link> = links.into_iter().map(|l| (l.peer, l)).collect();
        let expected: Vec<u8> = (0..3).filter(|&p| p != id.as_u8()).collect();
        let have: Vec<u8> = links.keys().copied().collect();
        if have != expected {
            return Err(Error::Protocol(format!(
                "party {} needs links to {expected:?}, has {have:?}",
                id.as_u8()
            )));
        }
        if keys.keys().copied().collect::<Vec<_>>() != expected {
            return Err(Error::Protocol("pairwise keys do not match peers".into()));
        }
        let tapes = keys.into_iter().map(|(p, k)| (p, TapeSource::new(k))).collect();
        Ok(PartyContext {
            id,
            links,
            tapes,
            flags,
            output_recipient,
            helper_rng: ChaCha20Rng::seed_from_u64(seed),
        })
    }

    pub fn id(&self) -> PartyId {
        self.id
    }

    pub fn is_holder(&self) -> bool {
        !self.id.is_helper()
    }

    pub fn output_recipient(&self) -> bool {
        self.output_recipient
    }

    /// The other data-holding party (valid for P0/P1 only).
    pub fn other_holder(&self) -> u8 {
        match self.id {
            PartyId::P0 => 1,
            PartyId::P1 => 0,
            PartyId::P2 => unreachable!("helper has no counterpart holder"),
        }
    }

    fn link_mut(&mut self, peer: u8) -> Result<&mut Link> {
        self.links
            .get_mut(&peer)
            .ok_or_else(|| Error::Protocol(format!("no link to party {peer}")))
    }

    /// Open a fresh tape stream on the key shared with `peer`.
    pub fn open_tape(&mut self, peer: u8, purpose: TapePurpose) -> Result<PrfTape> {
        self.tapes
            .get_mut(&peer)
            .ok_or_else(|| Error::Protocol(format!("no pairwise key with party {peer}")))?
            .open(purpose)
    }

    pub fn send_elements(&mut self, peer: u8, phase: Phase, elements: &[u64]) -> Result<()> {
        self.link_mut(peer)?.send_elements(phase, elements)
    }

    pub fn recv_elements(&mut self, peer: u8, phase: Phase) -> Result<Vec<u64>> {
        self.link_mut(peer)?.recv_elements(phase)
    }

    /// Symmetric reveal between the two holders: send mine, receive theirs.
    pub fn exchange_with_holder(&mut self, phase: Phase, mine: &[u64]) -> Result<Vec<u64>> {
        let peer = self.other_holder();
        self.send_elements(peer, phase, mine)?;
        self.recv_elements(peer, phase)
    }

    pub(crate) fn helper_rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.helper_rng
    }

    /// Per-phase, per-direction counts from both of this party's channels.
    pub fn comm_report(&self) -> CommReport {
        let mut entries = Vec::new();
        let mut transcripts = Vec::new();
        let me = self.id.as_u8();
        for (&peer, link) in &self.links {
            let snap = link.counters.snapshot();
            for (tag, c) in &snap.sent {
                entries.push(CommEntry {
                    from: me,
                    to: peer,
                    phase: Phase::from_tag(*tag).map(|p| p.name()).unwrap_or("?").to_string(),
                    tag: *tag,
                    elements: c.elements,
                    bytes: c.bytes,
                });
            }
            for (tag, c) in &snap.recvd {
                entries.push(CommEntry {
                    from: peer,
                    to: me,
                    phase: Phase::from_tag(*tag).map(|p| p.name()).unwrap_or("?").to_string(),
                    tag: *tag,
                    elements: c.elements,
                    bytes: c.bytes,
                });
            }
            transcripts.push(TranscriptDigest { from: me, to: peer, sha256: snap.sent_sha256 });
            transcripts.push(TranscriptDigest { from: peer, to: me, sha256: snap.recvd_sha256 });
        }
        CommReport { party: me, entries, transcripts }
    }

    pub fn reset_counters(&mut self) {
        for link in self.links.values_mut() {
            link.counters.reset();
        }
    }

    /// Record outgoing payloads for traffic-content inspection (tests).
    pub fn enable_capture(&mut self) {
        for link in self.links.values_mut() {
            link.counters.enable_capture();
        }
    }

    /// Everything this party sent under the given phases since capture was
    /// enabled, concatenated.
    pub fn captured_payloads(&self, phases: &[Phase]) -> Vec<u8> {
        let tags: Vec<u16> = phases.iter().map(|p| p.tag()).collect();
        let mut out = Vec::new();
        for link in self.links.values() {
            out.extend(link.counters.captured_payloads(&tags));
        }
        out
    }
}

/// Which algebraic structure a dealt value lives in; fixes both the tape
/// sampling and the share arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DealRing {
    Z64,
    Odd,
    Fp67,
}

impl DealRing {
    fn sample(self, tape: &mut PrfTape) -> u64 {
        match self {
            DealRing::Z64 => tape.next_u64(),
            DealRing::Odd => tape.next_odd(),
            DealRing::Fp67 => tape.next_fp67(),
        }
    }

    fn sub(self, a: u64, b: u64) -> u64 {
        match self {
            DealRing::Z64 => a.wrapping_sub(b),
            DealRing::Odd => odd::sub(a, b),
            DealRing::Fp67 => fp67::sub(a, b),
        }
    }
}

/// Helper side of a dealt share pair: P1's share comes off the k12 tape and
/// only P0's travels; with `prf_opt` off both travel.
pub(crate) fn deal_from_helper(
    ctx: &mut PartyContext,
    phase: Phase,
    ring: DealRing,
    values: &[u64],
) -> Result<()> {
    debug_assert!(ctx.id().is_helper());
    let mut tape = ctx.open_tape(1, TapePurpose::Deal)?;
    let s1: Vec<u64> = values.iter().map(|_| ring.sample(&mut tape)).collect();
    let s0: Vec<u64> = values.iter().zip(&s1).map(|(&v, &t)| ring.sub(v, t)).collect();
    ctx.send_elements(0, phase, &s0)?;
    if !ctx.flags.prf_opt {
        ctx.send_elements(1, phase, &s1)?;
    }
    Ok(())
}

/// Holder side of a dealt share pair.
pub(crate) fn receive_dealt(
    ctx: &mut PartyContext,
    phase: Phase,
    ring: DealRing,
    n: usize,
) -> Result<Vec<u64>> {
    match ctx.id() {
        PartyId::P0 => {
            let s0 = ctx.recv_elements(2, phase)?;
            if s0.len() != n {
                return Err(Error::Protocol(format!(
                    "dealt share count {} != expected {n}",
                    s0.len()
                )));
            }
            Ok(s0)
        }
        PartyId::P1 => {
            if ctx.flags.prf_opt {
                let mut tape = ctx.open_tape(2, TapePurpose::Deal)?;
                Ok((0..n).map(|_| ring.sample(&mut tape)).collect())
            } else {
                ctx.recv_elements(2, phase)
            }
        }
        PartyId::P2 => Err(Error::Protocol("helper cannot receive dealt shares".into())),
    }
}

/// Split a ring element: x0 uniform, x1 = x - x0 mod 2^64.
pub fn share_value(x: u64, rng: &mut impl Rng) -> (u64, u64) {
    let x0: u64 = rng.gen();
    (x0, x.wrapping_sub(x0))
}

pub fn reconstruct_value(x0: u64, x1: u64) -> u64 {
    x0.wrapping_add(x1)
}

pub fn share_tensor(t: &Tensor<u64>, rng: &mut impl Rng) -> (Tensor<u64>, Tensor<u64>) {
    let mut s0 = Vec::with_capacity(t.len());
    let mut s1 = Vec::with_capacity(t.len());
    for &x in t.data() {
        let (a, b) = share_value(x, rng);
        s0.push(a);
        s1.push(b);
    }
    (
        Tensor::new(t.shape().to_vec(), s0).expect("share shape"),
        Tensor::new(t.shape().to_vec(), s1).expect("share shape"),
    )
}

pub fn reconstruct_tensor(a: &Tensor<u64>, b: &Tensor<u64>) -> Tensor<u64> {
    debug_assert_eq!(a.shape(), b.shape());
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| reconstruct_value(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("reconstruct shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn share_identities() {
        // x=42, x0=7 -> x1=35
        assert_eq!(42u64.wrapping_sub(7), 35);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let x: u64 = rng.gen();
            let (a, b) = share_value(x, &mut rng);
            assert_eq!(reconstruct_value(a, b), x);
        }
        // x=0 -> x1 = -x0 mod 2^64
        let (a, b) = share_value(0, &mut rng);
        assert_eq!(b, a.wrapping_neg());
    }
}
