//! Beaver-triple multiplication of shared tensors. The triple's A and B
//! masks come straight off the P2<->P0 and P2<->P1 tapes, so only the
//! product share costs helper egress; the two holders then reveal the masked
//! differences E = X - A and F = Y - B to each other and finish locally:
//!
//!   Z_j = j*E*F + E*B_j + A_j*F + C_j
//!
//! Communication: 2(ab + bc) elements between P0<->P1 plus ac elements of
//! helper egress (2ac with prf_opt off).

use crate::comm::Phase;
use crate::error::{Error, Result};
use crate::prf::TapePurpose;
use crate::protocol::{deal_from_helper, receive_dealt, DealRing, PartyContext};
use crate::ring::mat_mul;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy)]
pub struct MatDims {
    pub a: usize,
    pub b: usize,
    pub c: usize,
}

fn add_vec(x: &[u64], y: &[u64]) -> Vec<u64> {
    x.iter().zip(y).map(|(&a, &b)| a.wrapping_add(b)).collect()
}

fn sub_vec(x: &[u64], y: &[u64]) -> Vec<u64> {
    x.iter().zip(y).map(|(&a, &b)| a.wrapping_sub(b)).collect()
}

fn check_holder_input(
    x: Option<&Tensor<u64>>,
    len: usize,
    what: &str,
) -> Result<Vec<u64>> {
    let t = x.ok_or_else(|| Error::Protocol(format!("holder missing {what} share")))?;
    if t.len() != len {
        return Err(Error::Shape(format!(
            "{what} share has {} elements, protocol expects {len}",
            t.len()
        )));
    }
    Ok(t.data().to_vec())
}

/// Shared matrix product: reconstruct(Z) = reconstruct(X) . reconstruct(Y)
/// mod 2^64, X: a x b, Y: b x c. Holders pass their shares; the helper
/// passes `None` and serves the triple.
pub fn beaver_matmul(
    ctx: &mut PartyContext,
    x: Option<&Tensor<u64>>,
    y: Option<&Tensor<u64>>,
    dims: MatDims,
) -> Result<Option<Tensor<u64>>> {
    let MatDims { a, b, c } = dims;
    match ctx.id().holder_index() {
        None => {
            let mut t02a = ctx.open_tape(0, TapePurpose::BeaverA)?;
            let mut t12a = ctx.open_tape(1, TapePurpose::BeaverA)?;
            let mut t02b = ctx.open_tape(0, TapePurpose::BeaverB)?;
            let mut t12b = ctx.open_tape(1, TapePurpose::BeaverB)?;
            let a_full = add_vec(&t02a.expand(a * b)?, &t12a.expand(a * b)?);
            let b_full = add_vec(&t02b.expand(b * c)?, &t12b.expand(b * c)?);
            let product = mat_mul(&a_full, &b_full, a, b, c);
            deal_from_helper(ctx, Phase::BeaverC, DealRing::Z64, &product)?;
            Ok(None)
        }
        Some(j) => {
            let xs = check_holder_input(x, a * b, "left")?;
            let ys = check_holder_input(y, b * c, "right")?;
            let mut ta = ctx.open_tape(2, TapePurpose::BeaverA)?;
            let mut tb = ctx.open_tape(2, TapePurpose::BeaverB)?;
            let a_mask = ta.expand(a * b)?;
            let b_mask = tb.expand(b * c)?;

            let e_mine = sub_vec(&xs, &a_mask);
            let e_theirs = ctx.exchange_with_holder(Phase::BeaverE, &e_mine)?;
            let e = add_vec(&e_mine, &e_theirs);
            let f_mine = sub_vec(&ys, &b_mask);
            let f_theirs = ctx.exchange_with_holder(Phase::BeaverF, &f_mine)?;
            let f = add_vec(&f_mine, &f_theirs);

            let c_share = receive_dealt(ctx, Phase::BeaverC, DealRing::Z64, a * c)?;

            let mut z = mat_mul(&e, &b_mask, a, b, c);
            let af = mat_mul(&a_mask, &f, a, b, c);
            for (zi, v) in z.iter_mut().zip(af) {
                *zi = zi.wrapping_add(v);
            }
            if j == 1 {
                let ef = mat_mul(&e, &f, a, b, c);
                for (zi, v) in z.iter_mut().zip(ef) {
                    *zi = zi.wrapping_add(v);
                }
            }
            for (zi, v) in z.iter_mut().zip(c_share) {
                *zi = zi.wrapping_add(v);
            }
            Ok(Some(Tensor::new(vec![a, c], z)?))
        }
    }
}

/// Elementwise (Hadamard) variant over n-element vectors; same triple
/// structure with A, B, C all of length n.
pub fn beaver_mul(
    ctx: &mut PartyContext,
    x: Option<&[u64]>,
    y: Option<&[u64]>,
    n: usize,
) -> Result<Option<Vec<u64>>> {
    let hadamard =
        |a: &[u64], b: &[u64]| -> Vec<u64> { a.iter().zip(b).map(|(&x, &y)| x.wrapping_mul(y)).collect() };
    match ctx.id().holder_index() {
        None => {
            let mut t02a = ctx.open_tape(0, TapePurpose::BeaverA)?;
            let mut t12a = ctx.open_tape(1, TapePurpose::BeaverA)?;
            let mut t02b = ctx.open_tape(0, TapePurpose::BeaverB)?;
            let mut t12b = ctx.open_tape(1, TapePurpose::BeaverB)?;
            let a_full = add_vec(&t02a.expand(n)?, &t12a.expand(n)?);
            let b_full = add_vec(&t02b.expand(n)?, &t12b.expand(n)?);
            let product = hadamard(&a_full, &b_full);
            deal_from_helper(ctx, Phase::BeaverC, DealRing::Z64, &product)?;
            Ok(None)
        }
        Some(j) => {
            let xs = x.ok_or_else(|| Error::Protocol("holder missing left share".into()))?;
            let ys = y.ok_or_else(|| Error::Protocol("holder missing right share".into()))?;
            if xs.len() != n || ys.len() != n {
                return Err(Error::Shape(format!(
                    "elementwise mul over {n} elements, got {} and {}",
                    xs.len(),
                    ys.len()
                )));
            }
            let mut ta = ctx.open_tape(2, TapePurpose::BeaverA)?;
            let mut tb = ctx.open_tape(2, TapePurpose::BeaverB)?;
            let a_mask = ta.expand(n)?;
            let b_mask = tb.expand(n)?;

            let e_mine = sub_vec(xs, &a_mask);
            let e_theirs = ctx.exchange_with_holder(Phase::BeaverE, &e_mine)?;
            let e = add_vec(&e_mine, &e_theirs);
            let f_mine = sub_vec(ys, &b_mask);
            let f_theirs = ctx.exchange_with_holder(Phase::BeaverF, &f_mine)?;
            let f = add_vec(&f_mine, &f_theirs);

            let c_share = receive_dealt(ctx, Phase::BeaverC, DealRing::Z64, n)?;

            let z: Vec<u64> = (0..n)
                .map(|i| {
                    let mut v = e[i]
                        .wrapping_mul(b_mask[i])
                        .wrapping_add(a_mask[i].wrapping_mul(f[i]))
                        .wrapping_add(c_share[i]);
                    if j == 1 {
                        v = v.wrapping_add(e[i].wrapping_mul(f[i]));
                    }
                    v
                })
                .collect();
            Ok(Some(z))
        }
    }
}
