//! One peer-to-peer channel with framed, counted, digest-tracked traffic.
//!
//! Frame layout: phase-tag u16 LE, payload-length u32 LE, then the payload
//! (little-endian u64 ring elements for element phases, raw bytes for
//! control). Sends never block the protocol thread: the TCP transport hands
//! encoded frames to a per-channel writer thread, so symmetric exchanges of
//! large reveals cannot deadlock.

use std::io::{BufReader, Read, Write};
use std::net::TcpStream;
use std::sync::mpsc::{self, Receiver, Sender};
use std::thread::JoinHandle;
use std::time::Duration;

use crate::comm::{ChannelCounters, Phase};
use crate::error::{Error, Result};

pub const WIRE_MAGIC: &[u8; 4] = b"TMPW";
pub const WIRE_VERSION: u8 = 1;
/// Phase tag (2) + payload length (4).
pub const FRAME_HEADER_BYTES: u64 = 6;

pub fn encode_frame(tag: u16, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(6 + payload.len());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(payload);
    out
}

pub fn elements_to_bytes(elements: &[u64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(elements.len() * 8);
    for e in elements {
        out.extend_from_slice(&e.to_le_bytes());
    }
    out
}

pub fn bytes_to_elements(bytes: &[u8]) -> Result<Vec<u64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::Protocol(format!(
            "element payload length {} not a multiple of 8",
            bytes.len()
        )));
    }
    Ok(bytes.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect())
}

enum Transport {
    /// In-memory duplex queue carrying encoded frame bytes.
    Local { tx: Sender<Vec<u8>>, rx: Receiver<Vec<u8>>, timeout: Duration },
    /// TCP with a dedicated writer thread.
    Tcp { queue: Sender<Vec<u8>>, writer: Option<JoinHandle<()>>, reader: BufReader<TcpStream> },
}

pub struct Link {
    pub local_party: u8,
    pub peer: u8,
    transport: Transport,
    pub counters: ChannelCounters,
}

impl Link {
    pub fn local(local_party: u8, peer: u8, tx: Sender<Vec<u8>>, rx: Receiver<Vec<u8>>, timeout: Duration) -> Self {
        Link {
            local_party,
            peer,
            transport: Transport::Local { tx, rx, timeout },
            counters: ChannelCounters::new(),
        }
    }

    pub fn tcp(local_party: u8, peer: u8, stream: TcpStream, timeout: Duration) -> Result<Self> {
        stream
            .set_read_timeout(Some(timeout))
            .map_err(|e| Error::Network(format!("set_read_timeout: {e}")))?;
        stream.set_nodelay(true).ok();
        let write_half = stream
            .try_clone()
            .map_err(|e| Error::Network(format!("clone stream: {e}")))?;
        let (queue, rx) = mpsc::channel::<Vec<u8>>();
        let writer = std::thread::spawn(move || {
            let mut w = write_half;
            for buf in rx {
                if w.write_all(&buf).and_then(|_| w.flush()).is_err() {
                    // Reads on the other side will surface the failure.
                    break;
                }
            }
        });
        Ok(Link {
            local_party,
            peer,
            transport: Transport::Tcp { queue, writer: Some(writer), reader: BufReader::new(stream) },
            counters: ChannelCounters::new(),
        })
    }

    pub fn send_frame(&mut self, phase: Phase, payload: &[u8]) -> Result<()> {
        let frame = encode_frame(phase.tag(), payload);
        // Element counts are derived from the payload the same way on both
        // ends, which is what makes the counter-symmetry invariant hold.
        let elements =
            if phase.carries_elements() { payload.len() as u64 / 8 } else { 0 };
        self.counters.record_sent(phase.tag(), elements, &frame);
        match &mut self.transport {
            Transport::Local { tx, .. } => tx
                .send(frame)
                .map_err(|_| Error::Network(format!("peer {} hung up", self.peer))),
            Transport::Tcp { queue, .. } => queue
                .send(frame)
                .map_err(|_| Error::Network(format!("writer for peer {} gone", self.peer))),
        }
    }

    /// Receive the next frame, which must carry the expected phase tag; a
    /// mismatch means the two parties disagree about where they are in the
    /// protocol, which is fatal.
    pub fn recv_frame(&mut self, expect: Phase) -> Result<Vec<u8>> {
        let (tag, frame) = match &mut self.transport {
            Transport::Local { rx, timeout, .. } => {
                let frame = rx.recv_timeout(*timeout).map_err(|_| {
                    Error::Network(format!("timeout waiting for party {}", self.peer))
                })?;
                if frame.len() < 6 {
                    return Err(Error::Protocol("short frame".into()));
                }
                let tag = u16::from_le_bytes(frame[..2].try_into().unwrap());
                (tag, frame)
            }
            Transport::Tcp { reader, .. } => {
                let mut header = [0u8; 6];
                read_exact(reader, &mut header, self.peer)?;
                let tag = u16::from_le_bytes(header[..2].try_into().unwrap());
                let len = u32::from_le_bytes(header[2..6].try_into().unwrap()) as usize;
                let mut frame = Vec::with_capacity(6 + len);
                frame.extend_from_slice(&header);
                frame.resize(6 + len, 0);
                read_exact(reader, &mut frame[6..], self.peer)?;
                (tag, frame)
            }
        };
        let payload = frame[6..].to_vec();
        let phase = Phase::from_tag(tag)
            .ok_or_else(|| Error::Protocol(format!("unknown phase tag {tag}")))?;
        let elements =
            if phase.carries_elements() { payload.len() as u64 / 8 } else { 0 };
        self.counters.record_recvd(tag, elements, &frame);
        if phase != expect {
            return Err(Error::Protocol(format!(
                "protocol desync with party {}: expected phase {}, got {}",
                self.peer,
                expect.name(),
                phase.name()
            )));
        }
        Ok(payload)
    }

    pub fn send_elements(&mut self, phase: Phase, elements: &[u64]) -> Result<()> {
        self.send_frame(phase, &elements_to_bytes(elements))
    }

    pub fn recv_elements(&mut self, phase: Phase) -> Result<Vec<u64>> {
        bytes_to_elements(&self.recv_frame(phase)?)
    }
}

impl Drop for Link {
    fn drop(&mut self) {
        if let Transport::Tcp { queue, writer, .. } = &mut self.transport {
            // Close the queue so the writer drains and exits.
            let (dead, _) = mpsc::channel();
            *queue = dead;
            if let Some(h) = writer.take() {
                h.join().ok();
            }
        }
    }
}

fn read_exact(reader: &mut BufReader<TcpStream>, buf: &mut [u8], peer: u8) -> Result<()> {
    reader.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut => {
            Error::Network(format!("timeout waiting for party {peer}"))
        }
        _ => Error::Network(format!("connection to party {peer} reset: {e}")),
    })
}

/// An in-memory duplex channel pair for two co-located parties.
pub fn local_pair(a: u8, b: u8, timeout: Duration) -> (Link, Link) {
    let (tx_ab, rx_ab) = mpsc::channel();
    let (tx_ba, rx_ba) = mpsc::channel();
    (Link::local(a, b, tx_ab, rx_ba, timeout), Link::local(b, a, tx_ba, rx_ab, timeout))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elements_roundtrip_with_counts() {
        let (mut a, mut b) = local_pair(0, 1, Duration::from_secs(2));
        let xs: Vec<u64> = (0..100).collect();
        a.send_elements(Phase::BeaverE, &xs).unwrap();
        let got = b.recv_elements(Phase::BeaverE).unwrap();
        assert_eq!(got, xs);

        let sent = a.counters.snapshot().sent[&Phase::BeaverE.tag()];
        assert_eq!(sent.elements, 100);
        assert_eq!(sent.bytes, 100 * 8 + FRAME_HEADER_BYTES);
        let recvd = b.counters.snapshot().recvd[&Phase::BeaverE.tag()];
        assert_eq!(recvd, sent);
    }

    #[test]
    fn zero_length_payload_is_legal() {
        let (mut a, mut b) = local_pair(0, 1, Duration::from_secs(2));
        a.send_elements(Phase::Control, &[]).unwrap();
        let got = b.recv_frame(Phase::Control).unwrap();
        assert!(got.is_empty());
        assert_eq!(b.counters.snapshot().recvd[&Phase::Control.tag()].elements, 0);
    }

    #[test]
    fn tag_mismatch_is_fatal_desync() {
        let (mut a, mut b) = local_pair(0, 1, Duration::from_secs(2));
        a.send_elements(Phase::BeaverE, &[1]).unwrap();
        let e = b.recv_elements(Phase::BeaverF).unwrap_err();
        assert!(e.to_string().contains("desync"), "{e}");
    }

    #[test]
    fn recv_times_out() {
        let (_a, mut b) = local_pair(0, 1, Duration::from_millis(50));
        let e = b.recv_frame(Phase::BeaverE).unwrap_err();
        assert!(e.to_string().contains("timeout waiting for party 0"), "{e}");
    }
}
