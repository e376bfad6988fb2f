//! Precision selection: compile the model at every scale in a range, replay a
//! calibration set through the fixed-point interpreter, and pick the scale
//! whose outputs best match the floating-point references. Large scales
//! overflow, small ones lose accuracy; the sweep finds the window between.

use serde::{Deserialize, Serialize};

use crate::compile::compile_to_llil;
use crate::error::{Error, Result};
use crate::fixed::{dequantize, quantize};
use crate::graph::{HlilGraph, OpKind};
use crate::interp::eval_fixed_checked;
use crate::ring;
use crate::tensor::{argmax_by, Tensor};

/// Default sweep range when the caller does not narrow it.
pub const DEFAULT_S_MIN: u32 = 8;
pub const DEFAULT_S_MAX: u32 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMetric {
    /// Fraction of calibration inputs whose argmax matches the float
    /// reference. Higher is better; the classification default.
    ArgmaxAgreement,
    /// Largest absolute elementwise deviation. Lower is better.
    MaxAbsError,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub s_min: u32,
    pub s_max: u32,
    /// (input, float reference output) pairs.
    pub calibration: Vec<(Tensor<f32>, Tensor<f32>)>,
    pub metric: SweepMetric,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.s_min == 0 || self.s_min > self.s_max || self.s_max > 30 {
            return Err(Error::Validation(format!(
                "scale bounds must satisfy 0 < s_min <= s_max <= 30, got [{}, {}]",
                self.s_min, self.s_max
            )));
        }
        if self.calibration.is_empty() {
            return Err(Error::Validation("calibration set is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepEntry {
    pub scale: u32,
    pub metric: f64,
    pub overflow: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub metric: SweepMetric,
    pub entries: Vec<SweepEntry>,
    pub chosen: u32,
}

impl SweepReport {
    pub fn entry(&self, scale: u32) -> Option<&SweepEntry> {
        self.entries.iter().find(|e| e.scale == scale)
    }
}

fn better(metric: SweepMetric, candidate: f64, best: f64) -> bool {
    match metric {
        SweepMetric::ArgmaxAgreement => candidate > best,
        SweepMetric::MaxAbsError => candidate < best,
    }
}

fn worst(metric: SweepMetric) -> f64 {
    match metric {
        SweepMetric::ArgmaxAgreement => 0.0,
        SweepMetric::MaxAbsError => f64::INFINITY,
    }
}

/// Sweep scales in [s_min, s_max] and report the best. Overflow at a given
/// scale is recorded in the report, never raised; flagged scales lose to any
/// clean one.
pub fn sweep_scale(model: &HlilGraph, cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    model.validate()?;
    let index_output =
        matches!(model.graph.nodes[model.graph.output].op, OpKind::ArgMax);

    let mut entries = Vec::with_capacity((cfg.s_max - cfg.s_min + 1) as usize);
    for s in cfg.s_min..=cfg.s_max {
        entries.push(evaluate_scale(model, cfg, s, index_output)?);
    }

    // Ties break to the smaller s for overflow headroom; flagged entries are
    // eligible only when every scale overflowed.
    let pick = |pool: &[&SweepEntry]| -> Option<u32> {
        let mut best: Option<&SweepEntry> = None;
        for e in pool {
            match best {
                None => best = Some(e),
                Some(b) if better(cfg.metric, e.metric, b.metric) => best = Some(e),
                _ => {}
            }
        }
        best.map(|e| e.scale)
    };
    let clean: Vec<&SweepEntry> = entries.iter().filter(|e| !e.overflow).collect();
    let chosen = pick(&clean)
        .or_else(|| pick(&entries.iter().collect::<Vec<_>>()))
        .expect("non-empty sweep range");

    Ok(SweepReport { metric: cfg.metric, entries, chosen })
}

fn evaluate_scale(
    model: &HlilGraph,
    cfg: &SweepConfig,
    s: u32,
    index_output: bool,
) -> Result<SweepEntry> {
    let program = match compile_to_llil(model, s) {
        Ok(p) => p,
        // Weight quantization left the guard band: the whole scale is out.
        Err(Error::Overflow(_)) => {
            return Ok(SweepEntry { scale: s, metric: worst(cfg.metric), overflow: true })
        }
        Err(e) => return Err(e),
    };

    let mut overflow = false;
    let mut agree = 0usize;
    let mut max_err = 0f64;
    for (input, reference) in &cfg.calibration {
        let q = match quantize(input, s) {
            Ok(q) => q,
            Err(Error::Overflow(_)) => {
                overflow = true;
                max_err = f64::INFINITY;
                continue;
            }
            Err(e) => return Err(e),
        };
        let (out, ovf) = eval_fixed_checked(&program, &q)?;
        overflow |= ovf;
        if index_output {
            let fixed_idx = out.data()[0];
            let ref_idx = reference.data()[0] as u64;
            if fixed_idx == ref_idx {
                agree += 1;
            }
            max_err = max_err.max((fixed_idx as f64 - ref_idx as f64).abs());
        } else {
            let deq = dequantize(&out, s)?;
            let fixed_idx = argmax_by(out.data(), |&v| ring::to_signed(v));
            let ref_idx = argmax_by(reference.data(), |v| *v);
            if fixed_idx == ref_idx {
                agree += 1;
            }
            for (a, b) in deq.data().iter().zip(reference.data()) {
                max_err = max_err.max((*a as f64 - *b as f64).abs());
            }
        }
    }
    let metric = match cfg.metric {
        SweepMetric::ArgmaxAgreement => agree as f64 / cfg.calibration.len() as f64,
        SweepMetric::MaxAbsError => max_err,
    };
    Ok(SweepEntry { scale: s, metric, overflow })
}
