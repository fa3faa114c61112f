//! Per-box detector loss (cross-entropy + smooth-L1), the foreground-matched
//! scale-quality metric, and optimal-scale selection.
//!
//! The metric makes scales comparable despite differing foreground counts:
//! every scale sums only its `n_min` smallest foreground per-box losses,
//! where `n_min` is the minimum foreground count across scales.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::detcore::{Annotation, Assignment, Detection, BACKGROUND_CLASS};
use crate::geometry::BoundingBox;

/// Floor applied to probabilities before the logarithm.
const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("non-finite class score in detection {0}")]
    NonFiniteScore(usize),
    #[error("assignment references annotation {0} but only {1} exist")]
    BadAnnotationIndex(usize, usize),
    #[error("no scales provided")]
    NoScales,
}

#[derive(Debug, Clone, Copy)]
pub struct LossConfig {
    /// Balance term between classification and regression loss.
    pub lambda_reg: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { lambda_reg: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerBoxLoss {
    pub detection_index: usize,
    pub total: f64,
    pub cls_part: f64,
    pub reg_part: f64,
    pub is_foreground: bool,
}

/// Smooth-L1 of a single residual.
pub fn smooth_l1(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        0.5 * x * x
    } else {
        a - 0.5
    }
}

/// Standard center-offset / log-size box-coding residuals of `pred`
/// relative to `gt`. Scale-invariant by construction.
pub fn box_residuals(pred: &BoundingBox, gt: &BoundingBox) -> [f64; 4] {
    let (pcx, pcy) = pred.center();
    let (gcx, gcy) = gt.center();
    let gw = gt.width().max(PROB_FLOOR);
    let gh = gt.height().max(PROB_FLOOR);
    let pw = pred.width().max(PROB_FLOOR);
    let ph = pred.height().max(PROB_FLOOR);
    [
        (pcx - gcx) / gw,
        (pcy - gcy) / gh,
        (pw / gw).ln(),
        (ph / gh).ln(),
    ]
}

/// Eq.-1-style per-box loss: cross-entropy on the assigned class plus
/// lambda-weighted smooth-L1 on the box-coding residuals (foreground only).
pub fn box_loss(
    det: &Detection,
    assignment: &Assignment,
    gts: &[Annotation],
    cfg: &LossConfig,
) -> Result<PerBoxLoss, LossError> {
    if det.class_scores.iter().any(|s| !s.is_finite()) {
        return Err(LossError::NonFiniteScore(assignment.detection_index));
    }
    let (label, reg_part) = match assignment.annotation {
        Some(gi) => {
            let gt = gts
                .get(gi)
                .ok_or(LossError::BadAnnotationIndex(gi, gts.len()))?;
            let reg = box_residuals(&det.bbox, &gt.bbox)
                .iter()
                .map(|&r| smooth_l1(r))
                .sum();
            (gt.class_label, reg)
        }
        None => (BACKGROUND_CLASS, 0.0),
    };
    let p = det
        .class_scores
        .get(label)
        .copied()
        .unwrap_or(0.0)
        .max(PROB_FLOOR);
    let cls_part = -p.ln();
    Ok(PerBoxLoss {
        detection_index: assignment.detection_index,
        total: cls_part + cfg.lambda_reg * reg_part,
        cls_part,
        reg_part,
        is_foreground: assignment.annotation.is_some(),
    })
}

/// What the metric saw at one scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleEntry {
    pub foreground_count: usize,
    /// Sum of the `n_min` smallest foreground losses; `None` when this scale
    /// was excluded (zero foregrounds).
    pub metric: Option<f64>,
    /// Detection indices whose losses were summed (`|selected| = n_min`).
    pub selected: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleMetricReport {
    pub per_scale: BTreeMap<u32, ScaleEntry>,
    pub n_min: usize,
    pub m_opt: u32,
    /// True when every scale had zero foregrounds and `m_opt` defaulted to
    /// the largest scale.
    pub degenerate: bool,
}

/// Computes the foreground-matched metric over detections gathered at every
/// scale (all in a common coordinate frame with `gts`), and selects the
/// optimal scale. Scales with zero foregrounds are excluded from the `n_min`
/// computation; when all scales are empty the report is degenerate and
/// `m_opt` defaults to the largest scale.
pub fn compute_scale_metric(
    per_scale: &BTreeMap<u32, (Vec<Detection>, Vec<Assignment>)>,
    gts: &[Annotation],
    cfg: &LossConfig,
) -> Result<ScaleMetricReport, LossError> {
    if per_scale.is_empty() {
        return Err(LossError::NoScales);
    }

    // Foreground per-box losses per scale, sorted ascending (ties by index).
    let mut fg_losses: BTreeMap<u32, Vec<(f64, usize)>> = BTreeMap::new();
    for (&scale, (dets, assigns)) in per_scale {
        let mut losses = Vec::new();
        for a in assigns {
            if a.is_foreground() {
                let l = box_loss(&dets[a.detection_index], a, gts, cfg)?;
                losses.push((l.total, l.detection_index));
            }
        }
        losses.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        fg_losses.insert(scale, losses);
    }

    let n_min = fg_losses
        .values()
        .map(|v| v.len())
        .filter(|&n| n > 0)
        .min()
        .unwrap_or(0);

    let mut per_scale_out = BTreeMap::new();
    for (&scale, losses) in &fg_losses {
        let entry = if losses.is_empty() || n_min == 0 {
            ScaleEntry {
                foreground_count: losses.len(),
                metric: None,
                selected: Vec::new(),
            }
        } else {
            let picked = &losses[..n_min];
            ScaleEntry {
                foreground_count: losses.len(),
                metric: Some(picked.iter().map(|(l, _)| l).sum()),
                selected: picked.iter().map(|&(_, i)| i).collect(),
            }
        };
        per_scale_out.insert(scale, entry);
    }

    let degenerate = n_min == 0;
    let report = ScaleMetricReport {
        m_opt: 0,
        per_scale: per_scale_out,
        n_min,
        degenerate,
    };
    let m_opt = optimal_scale(&report);
    Ok(ScaleMetricReport { m_opt, ..report })
}

/// Argmin of the metric over scales; ties break toward the smaller scale.
/// Degenerate reports default to the largest scale.
pub fn optimal_scale(report: &ScaleMetricReport) -> u32 {
    if report.degenerate {
        return *report.per_scale.keys().max().expect("non-empty report");
    }
    let mut best: Option<(u32, f64)> = None;
    // ascending scale order, strict improvement only: smallest tied scale wins
    for (&scale, entry) in &report.per_scale {
        if let Some(m) = entry.metric {
            match best {
                Some((_, bm)) if m >= bm => {}
                _ => best = Some((scale, m)),
            }
        }
    }
    best.expect("at least one defined metric").0
}
