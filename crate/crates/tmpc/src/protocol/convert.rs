//! The sign-bit pipeline: convert shares from Z_2^64 to the odd ring
//! Z_(2^64 - 1), then read the top bit there. Over an odd modulus the msb of
//! a equals the lsb of 2a, and the lsb of a masked difference is an XOR the
//! parties can afford.

use crate::comm::Phase;
use crate::error::{Error, Result};
use crate::prf::TapePurpose;
use crate::protocol::beaver::beaver_mul;
use crate::protocol::compare::{bits_of, private_compare, BITS};
use crate::protocol::{deal_from_helper, receive_dealt, DealRing, PartyContext};
use crate::ring::{odd, wraps};

/// Convert additive shares of a over Z_2^64 into shares of a over
/// Z_(2^64 - 1). Requires a != 2^64 - 1 (callers keep values in range; the
/// sign pipeline doubles its input first, which makes it even and safe).
///
/// Write a = a0 + a1 - beta * 2^64 and mask with a common random r = r0 + r1:
/// the wrap count of a + r observed by P2 (delta), the local carries beta_j,
/// and the comparison x > r - 1 recover beta as
///   beta = beta0 + beta1 + delta - alpha - 1 + (x > r - 1),
/// and over the odd ring a = a0 + a1 - beta.
pub fn share_convert(
    ctx: &mut PartyContext,
    a: Option<&[u64]>,
    n: usize,
) -> Result<Option<Vec<u64>>> {
    match ctx.id().holder_index() {
        Some(j) => {
            let a = a.ok_or_else(|| Error::Protocol("holder missing shares".into()))?;
            if a.len() != n {
                return Err(Error::Shape(format!("expected {n} shares, got {}", a.len())));
            }
            // Common randomness: both holders know r and its split.
            let mut tape = ctx.open_tape(ctx.other_holder(), TapePurpose::ScCommon)?;
            let mut r_full = Vec::with_capacity(n);
            let mut r_mine = Vec::with_capacity(n);
            let mut alpha = Vec::with_capacity(n);
            let mut eta2 = Vec::with_capacity(n);
            for _ in 0..n {
                let r0 = tape.next_u64();
                let r1 = tape.next_u64();
                r_full.push(r0.wrapping_add(r1));
                r_mine.push(if j == 0 { r0 } else { r1 });
                alpha.push(wraps(r0, r1));
                eta2.push(tape.next_bit());
            }

            let mut a_hat = Vec::with_capacity(n);
            let mut beta_local = Vec::with_capacity(n);
            for i in 0..n {
                a_hat.push(a[i].wrapping_add(r_mine[i]));
                beta_local.push(wraps(a[i], r_mine[i]));
            }
            ctx.send_elements(2, Phase::PcMsg, &a_hat)?;

            let x_bits = receive_dealt(ctx, Phase::MsbDeal, DealRing::Fp67, n * BITS)?;
            let delta = receive_dealt(ctx, Phase::MsbDeal, DealRing::Odd, n)?;

            // Compare x > r - 1; for r = 0 that is always true, so flip the
            // blind bit and run against the never-true threshold instead.
            let mut thresholds = Vec::with_capacity(n);
            let mut betas = Vec::with_capacity(n);
            for i in 0..n {
                if r_full[i] == 0 {
                    thresholds.push(u64::MAX);
                    betas.push(eta2[i] ^ 1);
                } else {
                    thresholds.push(r_full[i] - 1);
                    betas.push(eta2[i]);
                }
            }
            private_compare(ctx, Some(&x_bits), Some(&thresholds), Some(&betas), n)?;
            let eta_prime = receive_dealt(ctx, Phase::MsbDeal, DealRing::Odd, n)?;

            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                // eta = eta' XOR eta'' over the odd ring, eta'' public to holders.
                let eta = if eta2[i] == 0 {
                    eta_prime[i]
                } else {
                    odd::sub(if j == 0 { 1 } else { 0 }, eta_prime[i])
                };
                let mut theta = odd::add(beta_local[i], delta[i]);
                theta = odd::add(theta, eta);
                if j == 0 {
                    theta = odd::sub(theta, alpha[i] + 1);
                }
                out.push(odd::sub(odd::reduce(a[i]), theta));
            }
            Ok(Some(out))
        }
        None => {
            let a_hat0 = ctx.recv_elements(0, Phase::PcMsg)?;
            let a_hat1 = ctx.recv_elements(1, Phase::PcMsg)?;
            if a_hat0.len() != n || a_hat1.len() != n {
                return Err(Error::Protocol("masked sum length mismatch".into()));
            }
            let x: Vec<u64> =
                a_hat0.iter().zip(&a_hat1).map(|(&p, &q)| p.wrapping_add(q)).collect();
            let delta: Vec<u64> = a_hat0.iter().zip(&a_hat1).map(|(&p, &q)| wraps(p, q)).collect();
            deal_from_helper(ctx, Phase::MsbDeal, DealRing::Fp67, &bits_of(&x))?;
            deal_from_helper(ctx, Phase::MsbDeal, DealRing::Odd, &delta)?;
            let eta_prime = private_compare(ctx, None, None, None, n)?.expect("helper pc output");
            deal_from_helper(ctx, Phase::MsbDeal, DealRing::Odd, &eta_prime)?;
            Ok(None)
        }
    }
}

/// Shares (over Z_2^64) of the most significant bit of a value shared over
/// the odd ring: msb(a) = lsb(2a mod (2^64 - 1)).
///
/// P2 deals a random odd-ring mask with its bit decomposition and lsb; the
/// holders reveal r = 2a + mask to each other, compare mask > r privately,
/// and recover lsb(2a) = r[0] XOR mask[0] XOR (mask > r) with one Beaver
/// multiplication for the shared XOR.
pub fn compute_msb(
    ctx: &mut PartyContext,
    a: Option<&[u64]>,
    n: usize,
) -> Result<Option<Vec<u64>>> {
    match ctx.id().holder_index() {
        Some(j) => {
            let a = a.ok_or_else(|| Error::Protocol("holder missing shares".into()))?;
            if a.len() != n {
                return Err(Error::Shape(format!("expected {n} shares, got {}", a.len())));
            }
            let mask = receive_dealt(ctx, Phase::MsbDeal, DealRing::Odd, n)?;
            let mask_bits = receive_dealt(ctx, Phase::MsbDeal, DealRing::Fp67, n * BITS)?;
            let mask_lsb = receive_dealt(ctx, Phase::MsbDeal, DealRing::Z64, n)?;

            let r_mine: Vec<u64> =
                a.iter().zip(&mask).map(|(&y, &m)| odd::add(odd::double(y), m)).collect();
            let r_theirs = ctx.exchange_with_holder(Phase::BeaverE, &r_mine)?;
            let r: Vec<u64> =
                r_mine.iter().zip(&r_theirs).map(|(&p, &q)| odd::add(p, q)).collect();

            let mut tape = ctx.open_tape(ctx.other_holder(), TapePurpose::MsbCommon)?;
            let blinds: Vec<u64> = (0..n).map(|_| tape.next_bit()).collect();
            private_compare(ctx, Some(&mask_bits), Some(&r), Some(&blinds), n)?;
            let eta_prime = receive_dealt(ctx, Phase::MsbDeal, DealRing::Z64, n)?;

            // xor of the two shared bits needs their product
            let prod = beaver_mul(ctx, Some(&mask_lsb), Some(&eta_prime), n)?
                .expect("holder product");
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                let xored = mask_lsb[i]
                    .wrapping_add(eta_prime[i])
                    .wrapping_sub(prod[i].wrapping_mul(2));
                let public = (r[i] & 1) ^ blinds[i];
                out.push(if public == 0 {
                    xored
                } else {
                    (if j == 0 { 1u64 } else { 0 }).wrapping_sub(xored)
                });
            }
            Ok(Some(out))
        }
        None => {
            let masks: Vec<u64> = (0..n)
                .map(|_| loop {
                    let v: u64 = rand::Rng::gen(ctx.helper_rng());
                    if v != u64::MAX {
                        break v;
                    }
                })
                .collect();
            let lsbs: Vec<u64> = masks.iter().map(|&m| m & 1).collect();
            deal_from_helper(ctx, Phase::MsbDeal, DealRing::Odd, &masks)?;
            deal_from_helper(ctx, Phase::MsbDeal, DealRing::Fp67, &bits_of(&masks))?;
            deal_from_helper(ctx, Phase::MsbDeal, DealRing::Z64, &lsbs)?;
            let eta_prime = private_compare(ctx, None, None, None, n)?.expect("helper pc output");
            deal_from_helper(ctx, Phase::MsbDeal, DealRing::Z64, &eta_prime)?;
            beaver_mul(ctx, None, None, n)?;
            Ok(None)
        }
    }
}
