//! Arithmetic helpers for the three algebraic structures the protocols run in:
//! the ring Z_2^64 (plain wrapping u64), the odd ring Z_(2^64 - 1) used by the
//! sign-bit pipeline, and the prime field Z_67 used by bitwise comparison.

/// Quantized magnitudes must stay below 2^62 so one multiplication (scale 2s)
/// plus accumulation cannot wrap.
pub const GUARD_BITS: u32 = 62;

/// Reinterpret a ring element as a two's-complement signed value.
#[inline]
pub fn to_signed(x: u64) -> i64 {
    x as i64
}

/// Embed a signed value into the ring.
#[inline]
pub fn from_signed(x: i64) -> u64 {
    x as u64
}

/// Signed arithmetic shift right: floor(signed(x) / 2^s) as a ring element.
#[inline]
pub fn shift_down(x: u64, s: u32) -> u64 {
    ((x as i64) >> s) as u64
}

/// Carry bit of `a + b` over Z_2^64: 1 iff the sum wrapped.
#[inline]
pub fn wraps(a: u64, b: u64) -> u64 {
    u64::from(a.checked_add(b).is_none())
}

/// Dense row-major matrix product mod 2^64: (m x k) * (k x n) -> (m x n).
pub fn mat_mul(a: &[u64], b: &[u64], m: usize, k: usize, n: usize) -> Vec<u64> {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    let mut out = vec![0u64; m * n];
    for i in 0..m {
        for l in 0..k {
            let av = a[i * k + l];
            if av == 0 {
                continue;
            }
            let row = &b[l * n..(l + 1) * n];
            let dst = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in dst.iter_mut().zip(row) {
                *o = o.wrapping_add(av.wrapping_mul(bv));
            }
        }
    }
    out
}

/// The odd ring Z_(2^64 - 1). Canonical representatives live in [0, 2^64 - 2].
pub mod odd {
    /// Modulus 2^64 - 1.
    pub const MODULUS: u128 = (1u128 << 64) - 1;

    /// Largest canonical representative.
    pub const MAX: u64 = u64::MAX - 1;

    /// Reduce an arbitrary u64 into the odd ring.
    #[inline]
    pub fn reduce(x: u64) -> u64 {
        if x == u64::MAX {
            0
        } else {
            x
        }
    }

    #[inline]
    pub fn add(a: u64, b: u64) -> u64 {
        ((a as u128 + b as u128) % MODULUS) as u64
    }

    #[inline]
    pub fn sub(a: u64, b: u64) -> u64 {
        add(a, neg(b))
    }

    #[inline]
    pub fn neg(a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            (MODULUS as u64).wrapping_sub(a)
        }
    }

    /// Double a value (2a mod 2^64-1); the basis of the msb-to-lsb reduction.
    #[inline]
    pub fn double(a: u64) -> u64 {
        add(a, a)
    }
}

/// The prime field Z_67. Comparison bit sums stay strictly below 67, so a
/// zero over the integers is a zero mod p and vice versa.
pub mod fp67 {
    pub const P: u64 = 67;

    #[inline]
    pub fn add(a: u64, b: u64) -> u64 {
        (a + b) % P
    }

    #[inline]
    pub fn sub(a: u64, b: u64) -> u64 {
        (a + P - b % P) % P
    }

    #[inline]
    pub fn mul(a: u64, b: u64) -> u64 {
        (a * b) % P
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signed_roundtrip() {
        assert_eq!(to_signed(u64::MAX), -1);
        assert_eq!(from_signed(-20), u64::MAX - 19);
        assert_eq!(to_signed(from_signed(i64::MIN)), i64::MIN);
    }

    #[test]
    fn shift_is_floor_division() {
        // ScaleDown([-32768], 15) -> [-1]
        assert_eq!(to_signed(shift_down(from_signed(-32768), 15)), -1);
        assert_eq!(to_signed(shift_down(from_signed(-32769), 15)), -2);
        assert_eq!(shift_down(16384 * 16384, 15), 8192);
    }

    #[test]
    fn mat_mul_wraps() {
        let a = vec![u64::MAX, 1, 0, 1];
        let b = vec![2, 0, 0, 2];
        let c = mat_mul(&a, &b, 2, 2, 2);
        assert_eq!(c, vec![u64::MAX - 1, 2, 0, 2]);
    }

    #[test]
    fn odd_ring_identities() {
        assert_eq!(odd::add(odd::MAX, 1), 0);
        assert_eq!(odd::sub(0, 1), odd::MAX);
        assert_eq!(odd::reduce(u64::MAX), 0);
        assert_eq!(odd::double(1u64 << 63), 1);
    }

    #[test]
    fn fp67_ops() {
        assert_eq!(fp67::add(66, 1), 0);
        assert_eq!(fp67::sub(0, 1), 66);
        assert_eq!(fp67::mul(33, 2), 66);
    }
}
