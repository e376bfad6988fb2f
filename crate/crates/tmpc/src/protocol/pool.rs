//! Shared max pooling: sequential pairwise max over each window, with all
//! windows of a layer batched through one ReLU per step.
//! max(u, v) = v + ReLU(u - v).

use crate::error::{Error, Result};
use crate::protocol::relu::relu;
use crate::protocol::PartyContext;

/// `windows` holds `count` windows of `k` elements each, window-major.
/// Returns one share per window.
pub fn maxpool_batch(
    ctx: &mut PartyContext,
    windows: Option<&[u64]>,
    count: usize,
    k: usize,
) -> Result<Option<Vec<u64>>> {
    if k == 0 {
        return Err(Error::Shape("empty pooling window".into()));
    }
    if let Some(w) = windows {
        if w.len() != count * k {
            return Err(Error::Shape(format!(
                "{count} windows of {k} need {} shares, got {}",
                count * k,
                w.len()
            )));
        }
    }
    let column = |step: usize| -> Option<Vec<u64>> {
        windows.map(|w| (0..count).map(|i| w[i * k + step]).collect())
    };
    let mut running = column(0);
    for step in 1..k {
        let cand = column(step);
        let diff: Option<Vec<u64>> = running.as_ref().map(|r| {
            r.iter()
                .zip(cand.as_ref().unwrap())
                .map(|(&u, &v)| u.wrapping_sub(v))
                .collect()
        });
        let gain = relu(ctx, diff.as_deref(), count)?;
        running = match (cand, gain) {
            (Some(c), Some(g)) => {
                Some(c.iter().zip(&g).map(|(&v, &r)| v.wrapping_add(r)).collect())
            }
            _ => None,
        };
    }
    Ok(running)
}

/// Single-window max of k shared values.
pub fn maxpool(ctx: &mut PartyContext, window: Option<&[u64]>, k: usize) -> Result<Option<Vec<u64>>> {
    maxpool_batch(ctx, window, 1, k)
}
