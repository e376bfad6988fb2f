//! Local (zero-communication) share truncation, realizing ScaleDown under
//! sharing. P0 shifts its share as the positive summand; P1 negates, shifts,
//! negates back. The reconstruction lands in {t-1, t, t+1} around the true
//! floor shift, except with probability about |x| / 2^63 of a large error,
//! which the 2^62 guard band keeps out of reach.

use crate::tensor::Tensor;

pub fn truncate_value(holder: u64, share: u64, s: u32) -> u64 {
    if holder == 0 {
        share >> s
    } else {
        (share.wrapping_neg() >> s).wrapping_neg()
    }
}

/// Shift every element of a share tensor down by s bits.
pub fn truncate(holder: u64, share: &Tensor<u64>, s: u32) -> Tensor<u64> {
    share.map(|&x| truncate_value(holder, x, s))
}

/// Division of shares by a public divisor, same local contract (exact when d
/// is a power of two and the share splits cleanly; within one unit
/// otherwise).
pub fn div_public(holder: u64, share: &Tensor<u64>, d: u64) -> Tensor<u64> {
    share.map(|&x| {
        if holder == 0 {
            x / d
        } else {
            (x.wrapping_neg() / d).wrapping_neg()
        }
    })
}
