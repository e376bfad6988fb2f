//! Communication accounting: every frame is tagged with a phase from a fixed
//! registry, and each channel direction keeps byte counts, ring-element
//! counts and a running transcript digest per phase. These counters back
//! every traffic assertion in the test suite.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Fixed phase-tag registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[repr(u16)]
pub enum Phase {
    Handshake = 1,
    /// Masked reveals of left Beaver operands (X - A), including the masked
    /// r-exchange of the msb step.
    BeaverE = 2,
    /// Masked reveals of right Beaver operands (Y - B).
    BeaverF = 3,
    /// Helper egress of triple-product shares.
    BeaverC = 4,
    /// Comparison inputs flowing to the helper: masked sums and blinded,
    /// permuted bit vectors.
    PcMsg = 5,
    /// Correlated randomness the helper deals inside the sign-bit pipeline.
    MsbDeal = 6,
    RevealOutput = 7,
    Control = 8,
}

impl Phase {
    pub const ALL: [Phase; 8] = [
        Phase::Handshake,
        Phase::BeaverE,
        Phase::BeaverF,
        Phase::BeaverC,
        Phase::PcMsg,
        Phase::MsbDeal,
        Phase::RevealOutput,
        Phase::Control,
    ];

    /// The tags that make up a protocol's reveal traffic.
    pub const REVEAL: [Phase; 3] = [Phase::BeaverE, Phase::BeaverF, Phase::BeaverC];

    pub fn tag(self) -> u16 {
        self as u16
    }

    pub fn from_tag(tag: u16) -> Option<Phase> {
        Phase::ALL.into_iter().find(|p| p.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::Handshake => "handshake",
            Phase::BeaverE => "beaver-E",
            Phase::BeaverF => "beaver-F",
            Phase::BeaverC => "beaver-C",
            Phase::PcMsg => "pc-msg",
            Phase::MsbDeal => "msb-deal",
            Phase::RevealOutput => "reveal-output",
            Phase::Control => "control",
        }
    }

    /// Frames of these phases carry little-endian u64 ring elements.
    pub fn carries_elements(self) -> bool {
        !matches!(self, Phase::Handshake | Phase::Control)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCount {
    pub elements: u64,
    pub bytes: u64,
}

#[derive(Default)]
struct DirectionState {
    counts: BTreeMap<u16, PhaseCount>,
    digest: Sha256,
}

impl DirectionState {
    fn record(&mut self, tag: u16, elements: u64, frame: &[u8]) {
        let c = self.counts.entry(tag).or_default();
        c.elements += elements;
        c.bytes += frame.len() as u64;
        self.digest.update(frame);
    }
}

#[derive(Default)]
struct CountersInner {
    sent: DirectionState,
    recvd: DirectionState,
    /// (tag, payload) capture of sent frames, for traffic-content tests.
    captured: Option<Vec<(u16, Vec<u8>)>>,
}

/// Shared counters for one channel; safe to update from whichever thread
/// services the channel.
#[derive(Clone, Default)]
pub struct ChannelCounters(Arc<Mutex<CountersInner>>);

impl ChannelCounters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_sent(&self, tag: u16, elements: u64, frame: &[u8]) {
        let mut inner = self.0.lock().unwrap();
        inner.sent.record(tag, elements, frame);
        if let Some(cap) = inner.captured.as_mut() {
            cap.push((tag, frame[6..].to_vec()));
        }
    }

    pub fn record_recvd(&self, tag: u16, elements: u64, frame: &[u8]) {
        self.0.lock().unwrap().recvd.record(tag, elements, frame);
    }

    pub fn enable_capture(&self) {
        self.0.lock().unwrap().captured = Some(Vec::new());
    }

    /// Captured sent payloads under the given tags, concatenated.
    pub fn captured_payloads(&self, tags: &[u16]) -> Vec<u8> {
        let inner = self.0.lock().unwrap();
        let mut out = Vec::new();
        if let Some(cap) = &inner.captured {
            for (tag, payload) in cap {
                if tags.contains(tag) {
                    out.extend_from_slice(payload);
                }
            }
        }
        out
    }

    pub fn reset(&self) {
        *self.0.lock().unwrap() = CountersInner::default();
    }

    pub fn snapshot(&self) -> ChannelSnapshot {
        let inner = self.0.lock().unwrap();
        ChannelSnapshot {
            sent: inner.sent.counts.clone(),
            recvd: inner.recvd.counts.clone(),
            sent_sha256: hex(&inner.sent.digest.clone().finalize()),
            recvd_sha256: hex(&inner.recvd.digest.clone().finalize()),
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub struct ChannelSnapshot {
    pub sent: BTreeMap<u16, PhaseCount>,
    pub recvd: BTreeMap<u16, PhaseCount>,
    pub sent_sha256: String,
    pub recvd_sha256: String,
}

/// One (sender, receiver, phase) row of a communication report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommEntry {
    pub from: u8,
    pub to: u8,
    pub phase: String,
    pub tag: u16,
    pub elements: u64,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptDigest {
    pub from: u8,
    pub to: u8,
    pub sha256: String,
}

/// Per-party communication report: every row this party observed, from both
/// ends of its two channels, plus per-direction transcript digests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommReport {
    pub party: u8,
    pub entries: Vec<CommEntry>,
    pub transcripts: Vec<TranscriptDigest>,
}

impl CommReport {
    /// Total elements this party sent under the given phases.
    pub fn sent_elements(&self, phases: &[Phase]) -> u64 {
        self.entries
            .iter()
            .filter(|e| e.from == self.party && phases.iter().any(|p| p.tag() == e.tag))
            .map(|e| e.elements)
            .sum()
    }

    /// Total bytes this party sent under the given phases.
    pub fn sent_bytes(&self, phases: &[Phase]) -> u64 {
        self.entries
            .iter()
            .filter(|e| e.from == self.party && phases.iter().any(|p| p.tag() == e.tag))
            .map(|e| e.bytes)
            .sum()
    }

    pub fn transcript(&self, from: u8, to: u8) -> Option<&str> {
        self.transcripts
            .iter()
            .find(|t| t.from == from && t.to == to)
            .map(|t| t.sha256.as_str())
    }
}

/// Total elements sent across all parties under the given phases
/// (sender-side rows only, so nothing is double counted).
pub fn total_elements(reports: &[CommReport], phases: &[Phase]) -> u64 {
    reports.iter().map(|r| r.sent_elements(phases)).sum()
}

/// Bytes sent by X to Y must equal bytes received by Y from X, for every
/// pair and phase; same for element counts.
pub fn check_symmetry(reports: &[CommReport]) -> Result<()> {
    for sender in reports {
        for entry in sender.entries.iter().filter(|e| e.from == sender.party) {
            let receiver = reports
                .iter()
                .find(|r| r.party == entry.to)
                .ok_or_else(|| Error::Protocol(format!("no report for party {}", entry.to)))?;
            let seen = receiver
                .entries
                .iter()
                .find(|e| e.from == entry.from && e.to == entry.to && e.tag == entry.tag);
            match seen {
                Some(e) if e.elements == entry.elements && e.bytes == entry.bytes => {}
                other => {
                    return Err(Error::Protocol(format!(
                        "counter asymmetry {}->{} phase {}: sender saw {:?} elements/{} bytes, receiver saw {:?}",
                        entry.from, entry.to, entry.phase, entry.elements, entry.bytes, other
                    )))
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_registry_tags() {
        assert_eq!(Phase::Handshake.tag(), 1);
        assert_eq!(Phase::BeaverE.tag(), 2);
        assert_eq!(Phase::BeaverF.tag(), 3);
        assert_eq!(Phase::BeaverC.tag(), 4);
        assert_eq!(Phase::PcMsg.tag(), 5);
        assert_eq!(Phase::MsbDeal.tag(), 6);
        assert_eq!(Phase::RevealOutput.tag(), 7);
        assert_eq!(Phase::Control.tag(), 8);
        assert_eq!(Phase::from_tag(5), Some(Phase::PcMsg));
        assert_eq!(Phase::from_tag(99), None);
    }

    #[test]
    fn counters_accumulate_and_reset() {
        let c = ChannelCounters::new();
        c.record_sent(2, 100, &[0u8; 806]);
        c.record_sent(2, 4, &[0u8; 38]);
        let snap = c.snapshot();
        let pc = snap.sent[&2];
        assert_eq!(pc.elements, 104);
        assert_eq!(pc.bytes, 844);
        // element count x 8 <= byte count (framing overhead excluded from elements)
        assert!(pc.elements * 8 <= pc.bytes);
        c.reset();
        assert!(c.snapshot().sent.is_empty());
    }

    #[test]
    fn symmetry_check_catches_mismatch() {
        let sent = CommEntry {
            from: 0,
            to: 1,
            phase: "beaver-E".into(),
            tag: 2,
            elements: 10,
            bytes: 86,
        };
        let mut recvd = sent.clone();
        let r0 = CommReport { party: 0, entries: vec![sent.clone()], transcripts: vec![] };
        let r1_ok = CommReport { party: 1, entries: vec![recvd.clone()], transcripts: vec![] };
        check_symmetry(&[r0.clone(), r1_ok]).unwrap();
        recvd.elements = 9;
        let r1_bad = CommReport { party: 1, entries: vec![recvd], transcripts: vec![] };
        assert!(check_symmetry(&[r0, r1_bad]).is_err());
    }
}
