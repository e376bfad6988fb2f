//! DReLU, the shared multiplexer, and ReLU itself.

use crate::error::{Error, Result};
use crate::protocol::beaver::beaver_mul;
use crate::protocol::convert::{compute_msb, share_convert};
use crate::protocol::PartyContext;

/// Shares of DReLU(x) = 1 if signed(x) >= 0 else 0, for |signed(x)| < 2^62.
///
/// The input is doubled locally before the odd-ring conversion: 2x is even,
/// so it can never hit the excluded value 2^64 - 1, and for in-range x the
/// sign bit of 2x equals the sign bit of x. DReLU(0) = 1.
pub fn drelu(ctx: &mut PartyContext, x: Option<&[u64]>, n: usize) -> Result<Option<Vec<u64>>> {
    let doubled: Option<Vec<u64>> =
        x.map(|s| s.iter().map(|&v| v.wrapping_mul(2)).collect());
    let odd_shares = share_convert(ctx, doubled.as_deref(), n)?;
    let msb = compute_msb(ctx, odd_shares.as_deref(), n)?;
    Ok(msb.map(|m| {
        let j = ctx.id().holder_index().expect("holder");
        m.iter()
            .map(|&b| (if j == 0 { 1u64 } else { 0 }).wrapping_sub(b))
            .collect()
    }))
}

/// Shares of (b ? y : x) elementwise: x + b * (y - x), one Beaver
/// multiplication. b must reconstruct to 0 or 1 per element.
pub fn select_share(
    ctx: &mut PartyContext,
    b: Option<&[u64]>,
    x: Option<&[u64]>,
    y: Option<&[u64]>,
    n: usize,
) -> Result<Option<Vec<u64>>> {
    let diff: Option<Vec<u64>> = match (x, y) {
        (Some(xs), Some(ys)) => {
            if xs.len() != n || ys.len() != n {
                return Err(Error::Shape(format!(
                    "select over {n} elements got {} and {}",
                    xs.len(),
                    ys.len()
                )));
            }
            Some(ys.iter().zip(xs).map(|(&yv, &xv)| yv.wrapping_sub(xv)).collect())
        }
        (None, None) => None,
        _ => return Err(Error::Protocol("select branches must both be present".into())),
    };
    let picked = beaver_mul(ctx, b, diff.as_deref(), n)?;
    Ok(picked.map(|p| {
        let xs = x.expect("holder branch");
        p.iter().zip(xs).map(|(&d, &xv)| xv.wrapping_add(d)).collect()
    }))
}

/// Shares of max(signed(x), 0): DReLU then a select between 0 and x.
pub fn relu(ctx: &mut PartyContext, x: Option<&[u64]>, n: usize) -> Result<Option<Vec<u64>>> {
    let d = drelu(ctx, x, n)?;
    let zeros: Option<Vec<u64>> = x.map(|_| vec![0u64; n]);
    select_share(ctx, d.as_deref(), zeros.as_deref(), x, n)
}
