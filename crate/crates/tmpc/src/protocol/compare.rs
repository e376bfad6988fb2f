//! Bitwise private comparison. P0 and P1 hold additive shares mod 67 of the
//! bits of a 64-bit x and both know a public threshold r and a common blind
//! bit beta; P2 learns exactly beta XOR (x > r) and nothing else.
//!
//! Per bit position i (msb down): c_i = r[i] - x[i] + 1 + sum_{k>i} (x[k]
//! XOR r[k]); x > r iff some c_i is zero, and every c_i stays below 67 over
//! the integers, so the field never wraps a nonzero sum to zero. With beta =
//! 1 the comparison runs against r + 1 with the roles of x and r swapped
//! (yielding the complement); for the wrap-around threshold r = 2^64 - 1 the
//! complement is constant 1 and the parties send a fixed vector with exactly
//! one zero. Shares are blinded by common nonzero scalars and a common
//! permutation before P2 sees them.

use crate::comm::Phase;
use crate::error::{Error, Result};
use crate::prf::{PrfTape, TapePurpose};
use crate::protocol::PartyContext;
use crate::ring::fp67;

pub const BITS: usize = 64;

fn bit(v: u64, i: usize) -> u64 {
    (v >> i) & 1
}

/// One element's 64 masked field values, blinded and permuted.
fn compare_vector(
    holder: u64,
    bit_shares: &[u64],
    r: u64,
    beta: u64,
    tape: &mut PrfTape,
) -> Vec<u64> {
    debug_assert_eq!(bit_shares.len(), BITS);
    let public = |v: u64| if holder == 0 { v % fp67::P } else { 0 };

    let mut c = vec![0u64; BITS];
    if beta == 1 && r == u64::MAX {
        // x > r is impossible and the blinded output must read "true":
        // a fixed vector with exactly one zero.
        for (i, ci) in c.iter_mut().enumerate() {
            *ci = public(i as u64);
        }
    } else {
        // beta = 0 compares x > r; beta = 1 compares (r+1) > x, whose result
        // is the complement of x > r.
        let threshold = if beta == 0 { r } else { r + 1 };
        let mut suffix = 0u64; // sum of x[k] XOR t[k] for k above i
        for i in (0..BITS).rev() {
            let t_i = bit(threshold, i);
            let x_i = bit_shares[i];
            let xor_share = if t_i == 0 { x_i } else { fp67::sub(public(1), x_i) };
            c[i] = if beta == 0 {
                // t[i] - x[i] + 1 + suffix
                fp67::add(fp67::sub(public(t_i + 1), x_i), suffix)
            } else {
                // x[i] - t[i] + 1 + suffix
                fp67::add(fp67::add(x_i, public(1 + fp67::P - t_i)), suffix)
            };
            suffix = fp67::add(suffix, xor_share);
        }
    }

    // Common multiplicative blinds and permutation; shared zeros survive,
    // everything else is uniform nonzero.
    let blinds: Vec<u64> = (0..BITS).map(|_| tape.next_nonzero_fp67()).collect();
    let perm = tape.next_permutation(BITS);
    (0..BITS).map(|i| fp67::mul(blinds[i], c[perm[i]])).collect()
}

/// Batched private compare over n elements. Holders pass `bit_shares`
/// (n x 64, element-major, lsb-first), the public thresholds and the common
/// beta bits; the helper passes `None`s and returns the n result bits.
pub fn private_compare(
    ctx: &mut PartyContext,
    bit_shares: Option<&[u64]>,
    r_public: Option<&[u64]>,
    beta: Option<&[u64]>,
    n: usize,
) -> Result<Option<Vec<u64>>> {
    match ctx.id().holder_index() {
        Some(j) => {
            let bits = bit_shares
                .ok_or_else(|| Error::Protocol("holder missing bit shares".into()))?;
            let rs = r_public.ok_or_else(|| Error::Protocol("holder missing thresholds".into()))?;
            let betas = beta.ok_or_else(|| Error::Protocol("holder missing beta bits".into()))?;
            if bits.len() != n * BITS || rs.len() != n || betas.len() != n {
                return Err(Error::Shape(format!(
                    "private compare over {n} elements got {} bit shares, {} thresholds, {} betas",
                    bits.len(),
                    rs.len(),
                    betas.len()
                )));
            }
            let mut tape = ctx.open_tape(ctx.other_holder(), TapePurpose::PcMask)?;
            let mut out = Vec::with_capacity(n * BITS);
            for e in 0..n {
                out.extend(compare_vector(
                    j,
                    &bits[e * BITS..(e + 1) * BITS],
                    rs[e],
                    betas[e],
                    &mut tape,
                ));
            }
            ctx.send_elements(2, Phase::PcMsg, &out)?;
            Ok(None)
        }
        None => {
            let d0 = ctx.recv_elements(0, Phase::PcMsg)?;
            let d1 = ctx.recv_elements(1, Phase::PcMsg)?;
            if d0.len() != n * BITS || d1.len() != n * BITS {
                return Err(Error::Protocol(format!(
                    "private compare expected {} masked values, got {}/{}",
                    n * BITS,
                    d0.len(),
                    d1.len()
                )));
            }
            let result = (0..n)
                .map(|e| {
                    let zero = (0..BITS)
                        .any(|i| fp67::add(d0[e * BITS + i], d1[e * BITS + i]) == 0);
                    u64::from(zero)
                })
                .collect();
            Ok(Some(result))
        }
    }
}

/// Split the 64 bits of each value into additive shares mod 67
/// (element-major, lsb-first); used by the helper when dealing
/// bit-decompositions.
pub fn bits_of(values: &[u64]) -> Vec<u64> {
    let mut out = Vec::with_capacity(values.len() * BITS);
    for &v in values {
        for i in 0..BITS {
            out.push(bit(v, i));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bits_layout_lsb_first() {
        let b = bits_of(&[0b101]);
        assert_eq!(&b[..4], &[1, 0, 1, 0]);
        assert_eq!(b.len(), 64);
    }
}
