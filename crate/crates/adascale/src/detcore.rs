//! Detection / annotation model, per-class greedy NMS with top-K filtering,
//! and loss-side foreground assignment.

use serde::{Deserialize, Serialize};

use crate::geometry::{iou, BoundingBox};

/// Class index reserved for background in score vectors and labels.
pub const BACKGROUND_CLASS: usize = 0;

/// Foreground assignment cutoff: a detection is foreground when some ground
/// truth overlaps it with IoU strictly greater than this.
pub const FOREGROUND_IOU: f64 = 0.5;

/// A predicted box with a probability vector over background + K classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BoundingBox,
    /// Index 0 is background; indices 1..=K are object classes.
    pub class_scores: Vec<f64>,
    pub predicted_class: usize,
    pub confidence: f64,
}

impl Detection {
    /// Builds a detection from a score vector, deriving the predicted class
    /// as the argmax (ties broken toward the lower index).
    pub fn from_scores(bbox: BoundingBox, class_scores: Vec<f64>) -> Self {
        assert!(!class_scores.is_empty());
        let (predicted_class, confidence) = class_scores
            .iter()
            .copied()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |(bi, bv), (i, v)| {
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            });
        Self {
            bbox,
            class_scores,
            predicted_class,
            confidence,
        }
    }
}

/// A ground-truth box. Background annotations are never stored, so
/// `class_label >= 1` always.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub bbox: BoundingBox,
    pub class_label: usize,
}

impl Annotation {
    pub fn new(bbox: BoundingBox, class_label: usize) -> Self {
        assert!(class_label >= 1, "background annotations are not stored");
        Self { bbox, class_label }
    }
}

/// Loss-side detection-to-annotation match. Many detections may match the
/// same annotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    pub detection_index: usize,
    /// Matched annotation index, or `None` for background.
    pub annotation: Option<usize>,
    /// Max IoU over all annotations (0 when there are none).
    pub overlap: f64,
}

impl Assignment {
    pub fn is_foreground(&self) -> bool {
        self.annotation.is_some()
    }
}

/// Per-class greedy NMS followed by global top-K truncation.
///
/// Within each predicted class, detections are visited by descending
/// confidence (ties by lower original index) and suppressed when their IoU
/// with an already-kept detection of the same class exceeds `threshold`.
/// Survivors are returned across classes in descending confidence order,
/// truncated to `top_k`.
pub fn nms(dets: &[Detection], threshold: f64, top_k: usize) -> Vec<Detection> {
    assert!(threshold > 0.0 && threshold <= 1.0);
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| {
        dets[j]
            .confidence
            .partial_cmp(&dets[i].confidence)
            .unwrap()
            .then(i.cmp(&j))
    });

    let mut kept: Vec<usize> = Vec::new();
    for &i in &order {
        let suppressed = kept.iter().any(|&k| {
            dets[k].predicted_class == dets[i].predicted_class
                && iou(&dets[k].bbox, &dets[i].bbox) > threshold
        });
        if !suppressed {
            kept.push(i);
        }
    }
    kept.truncate(top_k);
    kept.into_iter().map(|i| dets[i].clone()).collect()
}

/// Assigns each detection to the annotation of maximal IoU when that IoU is
/// strictly above [`FOREGROUND_IOU`]; otherwise marks it background.
pub fn assign_foreground(dets: &[Detection], gts: &[Annotation]) -> Vec<Assignment> {
    assign_with_cutoff(dets, gts, FOREGROUND_IOU)
}

/// Same as [`assign_foreground`] with an explicit strict IoU cutoff.
pub fn assign_with_cutoff(dets: &[Detection], gts: &[Annotation], cutoff: f64) -> Vec<Assignment> {
    dets.iter()
        .enumerate()
        .map(|(di, d)| {
            let mut best: Option<usize> = None;
            let mut best_iou = 0.0;
            for (gi, g) in gts.iter().enumerate() {
                let v = iou(&d.bbox, &g.bbox);
                if v > best_iou {
                    best_iou = v;
                    best = Some(gi);
                }
            }
            Assignment {
                detection_index: di,
                annotation: if best_iou > cutoff { best } else { None },
                overlap: best_iou,
            }
        })
        .collect()
}
