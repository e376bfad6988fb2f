//! Mesh formation. The TCP path builds the full P0-P1-P2 triangle with a
//! magic/version/party-id handshake; the local path wires three contexts
//! through in-memory channels for single-process runs, tests and benches.
//!
//! Convention: party i accepts connections from higher-id peers and dials
//! lower-id ones.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::net::channel::{local_pair, Link, WIRE_MAGIC, WIRE_VERSION};
use crate::net::config::PartyConfig;
use crate::prf::PrfKey;
use crate::protocol::{PartyContext, PartyId, ProtocolFlags};

/// The three pairwise keys of a mesh (a test/deal convenience; deployments
/// place each key in exactly the two party configs that name it).
#[derive(Clone)]
pub struct MeshKeys {
    pub k01: PrfKey,
    pub k02: PrfKey,
    pub k12: PrfKey,
}

impl MeshKeys {
    pub fn from_seed(seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut gen = || {
            let mut k = [0u8; 16];
            rng.fill(&mut k);
            PrfKey(k)
        };
        MeshKeys { k01: gen(), k02: gen(), k12: gen() }
    }

    pub fn key_for(&self, a: u8, b: u8) -> &PrfKey {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        match (lo, hi) {
            (0, 1) => &self.k01,
            (0, 2) => &self.k02,
            _ => &self.k12,
        }
    }

    /// Keys held by one party, keyed by peer id.
    pub fn for_party(&self, party: u8) -> BTreeMap<u8, PrfKey> {
        (0..3u8)
            .filter(|&p| p != party)
            .map(|p| (p, self.key_for(party, p).clone()))
            .collect()
    }
}

/// Build three in-memory contexts. P0 is the output recipient; the helper
/// samples its correlated randomness from `helper_seed`.
pub fn local_mesh(
    keys: &MeshKeys,
    flags: ProtocolFlags,
    helper_seed: u64,
) -> [PartyContext; 3] {
    let timeout = Duration::from_secs(10);
    let (l01, l10) = local_pair(0, 1, timeout);
    let (l02, l20) = local_pair(0, 2, timeout);
    let (l12, l21) = local_pair(1, 2, timeout);
    let mk = |id: PartyId, links: Vec<Link>| {
        PartyContext::new(
            id,
            links,
            keys.for_party(id.as_u8()),
            flags,
            id == PartyId::P0,
            helper_seed,
        )
        .expect("local mesh wiring")
    };
    [
        mk(PartyId::P0, vec![l01, l02]),
        mk(PartyId::P1, vec![l10, l12]),
        mk(PartyId::P2, vec![l20, l21]),
    ]
}

/// Run one closure per party on its own thread and collect the results
/// together with the contexts (for counter inspection).
pub fn run_parties<R, F>(ctxs: [PartyContext; 3], f: F) -> Result<([R; 3], [PartyContext; 3])>
where
    R: Send,
    F: Fn(&mut PartyContext) -> Result<R> + Send + Sync,
{
    let [c0, c1, c2] = ctxs;
    let run = |mut ctx: PartyContext| -> Result<(R, PartyContext)> {
        let r = f(&mut ctx)?;
        Ok((r, ctx))
    };
    let ((r0, r1), r2) = std::thread::scope(|s| {
        let h0 = s.spawn(|| run(c0));
        let h1 = s.spawn(|| run(c1));
        let r2 = run(c2);
        ((h0.join().expect("party 0 panicked"), h1.join().expect("party 1 panicked")), r2)
    });
    let (r0, c0) = r0?;
    let (r1, c1) = r1?;
    let (r2, c2) = r2?;
    Ok(([r0, r1, r2], [c0, c1, c2]))
}

fn handshake_hello(party_id: u8) -> [u8; 6] {
    let mut hello = [0u8; 6];
    hello[..4].copy_from_slice(WIRE_MAGIC);
    hello[4] = WIRE_VERSION;
    hello[5] = party_id;
    hello
}

fn read_hello(stream: &mut TcpStream) -> Result<u8> {
    let mut buf = [0u8; 6];
    stream
        .read_exact(&mut buf)
        .map_err(|e| Error::Network(format!("handshake read failed: {e}")))?;
    if &buf[..4] != WIRE_MAGIC {
        return Err(Error::Protocol("handshake error: bad wire magic".into()));
    }
    if buf[4] != WIRE_VERSION {
        return Err(Error::Protocol(format!(
            "handshake error: version mismatch (peer {}, ours {WIRE_VERSION})",
            buf[4]
        )));
    }
    Ok(buf[5])
}

fn dial(addr: &str, me: u8, peer: u8, deadline: Instant) -> Result<TcpStream> {
    loop {
        match TcpStream::connect(addr) {
            Ok(mut stream) => {
                stream
                    .write_all(&handshake_hello(me))
                    .map_err(|e| Error::Network(format!("handshake write: {e}")))?;
                stream.set_read_timeout(Some(Duration::from_secs(10))).ok();
                let got = read_hello(&mut stream)?;
                if got != peer {
                    return Err(Error::Protocol(format!(
                        "handshake error: expected party {peer} at {addr}, got {got}"
                    )));
                }
                return Ok(stream);
            }
            Err(_) if Instant::now() < deadline => {
                std::thread::sleep(Duration::from_millis(50));
            }
            Err(e) => {
                return Err(Error::Network(format!(
                    "timeout dialing party {peer} at {addr}: {e}"
                )))
            }
        }
    }
}

fn accept_peers(
    listener: &TcpListener,
    me: u8,
    mut expected: Vec<u8>,
    deadline: Instant,
) -> Result<Vec<(u8, TcpStream)>> {
    listener.set_nonblocking(true).map_err(|e| Error::Network(e.to_string()))?;
    let mut accepted = Vec::new();
    while !expected.is_empty() {
        match listener.accept() {
            Ok((mut stream, _)) => {
                stream.set_nonblocking(false).ok();
                stream.set_read_timeout(Some(Duration::from_secs(10))).ok();
                let got = read_hello(&mut stream)?;
                match expected.iter().position(|&p| p == got) {
                    Some(i) => expected.remove(i),
                    None => {
                        return Err(Error::Protocol(format!(
                            "handshake error: duplicate or unexpected party id {got}"
                        )))
                    }
                };
                stream
                    .write_all(&handshake_hello(me))
                    .map_err(|e| Error::Network(format!("handshake write: {e}")))?;
                accepted.push((got, stream));
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                if Instant::now() >= deadline {
                    return Err(Error::Network(format!(
                        "timeout waiting for parties {expected:?} to connect"
                    )));
                }
                std::thread::sleep(Duration::from_millis(20));
            }
            Err(e) => return Err(Error::Network(format!("accept failed: {e}"))),
        }
    }
    Ok(accepted)
}

/// Establish the full TCP mesh for one party: dial lower ids, accept higher
/// ids, verify the handshake on every edge, zero the counters.
pub fn connect_mesh(cfg: &PartyConfig) -> Result<PartyContext> {
    cfg.validate()?;
    let me = cfg.party_id;
    let timeout = Duration::from_millis(cfg.timeout_ms);
    let deadline = Instant::now() + timeout;

    let higher: Vec<u8> = (me + 1..3).collect();
    let listener = if higher.is_empty() {
        None
    } else {
        Some(
            TcpListener::bind(&cfg.listen)
                .map_err(|e| Error::Network(format!("bind {}: {e}", cfg.listen)))?,
        )
    };

    let mut streams: Vec<(u8, TcpStream)> = Vec::new();
    for peer in 0..me {
        let addr = &cfg.peers[&peer];
        streams.push((peer, dial(addr, me, peer, deadline)?));
    }
    if let Some(listener) = &listener {
        streams.extend(accept_peers(listener, me, higher, deadline)?);
    }

    let mut links = Vec::new();
    let mut keys = BTreeMap::new();
    for (peer, stream) in streams {
        links.push(Link::tcp(me, peer, stream, timeout)?);
        keys.insert(peer, cfg.key_with(peer)?);
    }
    // The handshake ran on the raw streams, so the per-phase counters of the
    // fresh links start out zeroed, as required once the mesh is up.
    PartyContext::new(
        PartyId::from_u8(me)?,
        links,
        keys,
        ProtocolFlags { reshaped_conv: cfg.reshaped_conv, prf_opt: cfg.prf_opt },
        cfg.output_recipient,
        cfg.seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_keys_deterministic() {
        let a = MeshKeys::from_seed(7);
        let b = MeshKeys::from_seed(7);
        assert_eq!(a.k01.to_hex(), b.k01.to_hex());
        assert_ne!(a.k01.to_hex(), a.k12.to_hex());
        assert_eq!(a.key_for(1, 0).to_hex(), a.k01.to_hex());
        assert_eq!(a.key_for(2, 1).to_hex(), a.k12.to_hex());
    }

    #[test]
    fn local_mesh_basic_exchange() {
        let keys = MeshKeys::from_seed(1);
        let ctxs = local_mesh(&keys, ProtocolFlags::default(), 0);
        let (results, ctxs) = run_parties(ctxs, |ctx| match ctx.id() {
            PartyId::P0 => {
                ctx.send_elements(1, crate::comm::Phase::Control, &[1, 2, 3])?;
                Ok(0u64)
            }
            PartyId::P1 => {
                let got = ctx.recv_elements(0, crate::comm::Phase::Control)?;
                Ok(got.iter().sum())
            }
            PartyId::P2 => Ok(0),
        })
        .unwrap();
        assert_eq!(results[1], 6);
        let reports: Vec<_> = ctxs.iter().map(|c| c.comm_report()).collect();
        crate::comm::check_symmetry(&reports).unwrap();
    }
}
