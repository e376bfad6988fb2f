//! Shared argmax: a linear scan holding (max, index) shares. A candidate
//! replaces the running pair only on strict improvement, so ties keep the
//! earlier index, matching the cleartext interpreters.

use crate::comm::Phase;
use crate::error::{Error, Result};
use crate::protocol::relu::{drelu, select_share};
use crate::protocol::{PartyContext, PartyId};

/// Scan n shared values and reveal the winning index to the output
/// recipient (`Some(index)` there, `None` elsewhere).
pub fn argmax_protocol(
    ctx: &mut PartyContext,
    x: Option<&[u64]>,
    n: usize,
) -> Result<Option<u64>> {
    if n == 0 {
        return Err(Error::Shape("argmax over an empty vector".into()));
    }
    if let Some(xs) = x {
        if xs.len() != n {
            return Err(Error::Shape(format!("argmax over {n} elements got {}", xs.len())));
        }
    }
    let j = ctx.id().holder_index();

    let mut running: Option<(u64, u64)> = x.map(|xs| (xs[0], 0u64));
    for i in 1..n {
        // switch = 1 - DReLU(max - cand): 1 only when cand > max.
        let diff: Option<Vec<u64>> =
            running.map(|(mx, _)| vec![mx.wrapping_sub(x.unwrap()[i])]);
        let keep = drelu(ctx, diff.as_deref(), 1)?;
        let switch: Option<Vec<u64>> = keep.map(|d| {
            let one = if j == Some(0) { 1u64 } else { 0 };
            // broadcast the bit over both selected lanes
            vec![one.wrapping_sub(d[0]); 2]
        });
        let current: Option<Vec<u64>> = running.map(|(mx, idx)| vec![mx, idx]);
        let candidate: Option<Vec<u64>> = x.map(|xs| {
            let idx_const = if j == Some(0) { i as u64 } else { 0 };
            vec![xs[i], idx_const]
        });
        let picked =
            select_share(ctx, switch.as_deref(), current.as_deref(), candidate.as_deref(), 2)?;
        running = picked.map(|p| (p[0], p[1]));
    }

    reveal_to_recipient(ctx, running.map(|(_, idx)| idx))
}

/// Reveal one shared value to the flagged output recipient.
pub fn reveal_to_recipient(ctx: &mut PartyContext, share: Option<u64>) -> Result<Option<u64>> {
    match ctx.id() {
        PartyId::P2 => Ok(None),
        _ => {
            let mine = share.ok_or_else(|| Error::Protocol("holder missing share".into()))?;
            if ctx.output_recipient() {
                let theirs = ctx.recv_elements(ctx.other_holder(), Phase::RevealOutput)?;
                if theirs.len() != 1 {
                    return Err(Error::Protocol("expected one revealed share".into()));
                }
                Ok(Some(mine.wrapping_add(theirs[0])))
            } else {
                let peer = ctx.other_holder();
                ctx.send_elements(peer, Phase::RevealOutput, &[mine])?;
                Ok(None)
            }
        }
    }
}
