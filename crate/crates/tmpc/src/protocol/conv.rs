//! Shared 2D convolution (VALID padding, stride 1 at the protocol level).
//!
//! Naive mode im2cols both shares and runs the matrix triple on
//! (q^2 x f^2) . (f^2 x 1): roughly 2q^2f^2 + 2f^2 + q^2 revealed ring
//! elements. Reshaped mode masks at image granularity instead: the triple's
//! A is a random m x m image mask and only E = image - A is revealed, so the
//! cost drops to 2m^2 + 2f^2 + q^2. im2col is linear, so the parties im2col
//! the public E locally and the Beaver identity still holds.

use crate::comm::Phase;
use crate::error::{Error, Result};
use crate::graph::Padding;
use crate::interp::{conv2d_im2col, conv2d_ref, im2col};
use crate::prf::TapePurpose;
use crate::protocol::beaver::{beaver_matmul, MatDims};
use crate::protocol::{deal_from_helper, receive_dealt, DealRing, PartyContext};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvMode {
    Naive,
    Reshaped,
}

fn conv_valid(image: &Tensor<u64>, filter: &Tensor<u64>) -> Result<Tensor<u64>> {
    conv2d_ref(image, filter, 1, Padding::Valid)
}

/// reconstruct(output) = conv2d_ref(image, filter) for f <= m shares held by
/// P0/P1; the helper passes `None` for both.
pub fn conv2d_protocol(
    ctx: &mut PartyContext,
    image: Option<&Tensor<u64>>,
    filter: Option<&Tensor<u64>>,
    m: (usize, usize),
    f: (usize, usize),
    mode: ConvMode,
) -> Result<Option<Tensor<u64>>> {
    let (m1, m2) = m;
    let (f1, f2) = f;
    if f1 > m1 || f2 > m2 {
        return Err(Error::Shape(format!(
            "filter ({f1}x{f2}) larger than image ({m1}x{m2})"
        )));
    }
    let (q1, q2) = (m1 - f1 + 1, m2 - f2 + 1);

    match mode {
        ConvMode::Naive => {
            let dims = MatDims { a: q1 * q2, b: f1 * f2, c: 1 };
            let (patches, filter_vec) = match (image, filter) {
                (Some(img), Some(flt)) => {
                    let patches = im2col(img, (f1, f2), 1);
                    let filter_vec = flt.clone().reshape(vec![f1 * f2, 1])?;
                    (Some(patches), Some(filter_vec))
                }
                _ => (None, None),
            };
            let out = beaver_matmul(ctx, patches.as_ref(), filter_vec.as_ref(), dims)?;
            out.map(|t| t.reshape(vec![q1, q2])).transpose()
        }
        ConvMode::Reshaped => match ctx.id().holder_index() {
            None => {
                let mut t02a = ctx.open_tape(0, TapePurpose::BeaverA)?;
                let mut t12a = ctx.open_tape(1, TapePurpose::BeaverA)?;
                let mut t02b = ctx.open_tape(0, TapePurpose::BeaverB)?;
                let mut t12b = ctx.open_tape(1, TapePurpose::BeaverB)?;
                let add = |x: Vec<u64>, y: Vec<u64>| -> Vec<u64> {
                    x.iter().zip(&y).map(|(&a, &b)| a.wrapping_add(b)).collect()
                };
                let a_full = Tensor::new(
                    vec![m1, m2],
                    add(t02a.expand(m1 * m2)?, t12a.expand(m1 * m2)?),
                )?;
                let b_full = Tensor::new(
                    vec![f1, f2],
                    add(t02b.expand(f1 * f2)?, t12b.expand(f1 * f2)?),
                )?;
                let product = conv2d_im2col(&a_full, &b_full, 1, Padding::Valid)?;
                deal_from_helper(ctx, Phase::BeaverC, DealRing::Z64, product.data())?;
                Ok(None)
            }
            Some(j) => {
                let img = image
                    .ok_or_else(|| Error::Protocol("holder missing image share".into()))?;
                let flt = filter
                    .ok_or_else(|| Error::Protocol("holder missing filter share".into()))?;
                if img.shape() != [m1, m2] || flt.shape() != [f1, f2] {
                    return Err(Error::Shape(format!(
                        "conv shares {:?}/{:?} do not match dims ({m1}x{m2})/({f1}x{f2})",
                        img.shape(),
                        flt.shape()
                    )));
                }
                let mut ta = ctx.open_tape(2, TapePurpose::BeaverA)?;
                let mut tb = ctx.open_tape(2, TapePurpose::BeaverB)?;
                let a_mask = Tensor::new(vec![m1, m2], ta.expand(m1 * m2)?)?;
                let b_mask = Tensor::new(vec![f1, f2], tb.expand(f1 * f2)?)?;

                let e_mine: Vec<u64> =
                    img.data().iter().zip(a_mask.data()).map(|(&x, &a)| x.wrapping_sub(a)).collect();
                let e_theirs = ctx.exchange_with_holder(Phase::BeaverE, &e_mine)?;
                let e = Tensor::new(
                    vec![m1, m2],
                    e_mine.iter().zip(&e_theirs).map(|(&a, &b)| a.wrapping_add(b)).collect(),
                )?;
                let f_mine: Vec<u64> =
                    flt.data().iter().zip(b_mask.data()).map(|(&x, &b)| x.wrapping_sub(b)).collect();
                let f_theirs = ctx.exchange_with_holder(Phase::BeaverF, &f_mine)?;
                let f_pub = Tensor::new(
                    vec![f1, f2],
                    f_mine.iter().zip(&f_theirs).map(|(&a, &b)| a.wrapping_add(b)).collect(),
                )?;

                let c_share = receive_dealt(ctx, Phase::BeaverC, DealRing::Z64, q1 * q2)?;

                let mut z = conv_valid(&e, &b_mask)?.into_data();
                for (zi, v) in z.iter_mut().zip(conv_valid(&a_mask, &f_pub)?.into_data()) {
                    *zi = zi.wrapping_add(v);
                }
                if j == 1 {
                    for (zi, v) in z.iter_mut().zip(conv_valid(&e, &f_pub)?.into_data()) {
                        *zi = zi.wrapping_add(v);
                    }
                }
                for (zi, v) in z.iter_mut().zip(c_share) {
                    *zi = zi.wrapping_add(v);
                }
                Ok(Some(Tensor::new(vec![q1, q2], z)?))
            }
        },
    }
}

/// Analytic reveal cost (ring elements) of one convolution in each mode;
/// the counters must match these exactly.
pub fn conv_cost_elements(m: usize, f: usize, mode: ConvMode) -> u64 {
    let q = (m - f + 1) as u64;
    let (m, f) = (m as u64, f as u64);
    match mode {
        ConvMode::Naive => 2 * q * q * f * f + 2 * f * f + q * q,
        ConvMode::Reshaped => 2 * m * m + 2 * f * f + q * q,
    }
}
