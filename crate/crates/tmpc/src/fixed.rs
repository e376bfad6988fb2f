//! Fixed-point encoding: a real r becomes the 64-bit integer floor(r * 2^s)
//! for a global scale of s fractional bits.

use crate::error::{Error, Result};
use crate::ring;
use crate::tensor::Tensor;

/// Largest usable scale; one extra bit is reserved below the sign.
pub const MAX_SCALE: u32 = 62;

fn check_scale(s: u32) -> Result<()> {
    if s > MAX_SCALE {
        return Err(Error::Validation(format!("scale {s} out of range [0, {MAX_SCALE}]")));
    }
    Ok(())
}

/// Encode one real value at scale s, enforcing the 2^62 guard band.
pub fn quantize_value(r: f32, s: u32) -> Result<u64> {
    check_scale(s)?;
    let scaled = (r as f64) * (s as f64).exp2();
    if !scaled.is_finite() || scaled.abs() >= (ring::GUARD_BITS as f64).exp2() {
        return Err(Error::Overflow(format!(
            "|{r} * 2^{s}| = {} exceeds the 2^{} guard band",
            scaled.abs(),
            ring::GUARD_BITS
        )));
    }
    Ok(ring::from_signed(scaled.floor() as i64))
}

/// Encode a float tensor at scale s.
pub fn quantize(t: &Tensor<f32>, s: u32) -> Result<Tensor<u64>> {
    let data = t.data().iter().map(|&r| quantize_value(r, s)).collect::<Result<Vec<_>>>()?;
    Tensor::new(t.shape().to_vec(), data)
}

/// Decode one ring element at scale s.
pub fn dequantize_value(x: u64, s: u32) -> f32 {
    (ring::to_signed(x) as f64 / (s as f64).exp2()) as f32
}

/// Decode a ring tensor at scale s.
pub fn dequantize(t: &Tensor<u64>, s: u32) -> Result<Tensor<f32>> {
    check_scale(s)?;
    Ok(t.map(|&x| dequantize_value(x, s)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize_value(0.5, 15).unwrap(), 16384);
        // floor(-1.25 * 2^4) = -20, i.e. ring value 2^64 - 20
        assert_eq!(quantize_value(-1.25, 4).unwrap(), u64::MAX - 19);
        // floor(0.1 * 2^15) = floor(3276.8...) = 3276
        assert_eq!(quantize_value(0.1, 15).unwrap(), 3276);
    }

    #[test]
    fn quantize_guard_band() {
        assert!(matches!(quantize_value(1.0, 62), Err(Error::Overflow(_))));
        assert!(quantize_value(0.9, 62).is_ok());
        assert!(matches!(quantize_value(f32::NAN, 10), Err(Error::Overflow(_))));
        assert!(matches!(quantize_value(1.0, 63), Err(Error::Validation(_))));
    }

    #[test]
    fn dequantize_examples() {
        assert_eq!(dequantize_value(16384, 15), 0.5);
        assert_eq!(dequantize_value(u64::MAX - 19, 4), -1.25);
    }

    #[test]
    fn multiplication_simulation() {
        // 0.5 * 0.5 at s=15: (16384 * 16384) >> 15 = 8192 = quantize(0.25, 15)
        let a = quantize_value(0.5, 15).unwrap();
        let prod = ring::shift_down(a.wrapping_mul(a), 15);
        assert_eq!(prod, quantize_value(0.25, 15).unwrap());
    }

    proptest! {
        #[test]
        fn roundtrip_within_ulp(r in -1000.0f32..1000.0, s in 0u32..=20) {
            let q = quantize_value(r, s).unwrap();
            let back = dequantize_value(q, s);
            prop_assert!((back - r).abs() <= (-(s as f64)).exp2() as f32);
        }
    }
}
