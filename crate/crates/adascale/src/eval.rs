//! Detection evaluation: one-to-one greedy matching, all-point interpolated
//! average precision, precision-recall curves, TP/FP counting, and scale
//! histograms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::detcore::{Annotation, Detection, BACKGROUND_CLASS};
use crate::geometry::iou;

/// Default IoU threshold for evaluation-side matching.
pub const MATCH_IOU: f64 = 0.5;
/// Default confidence threshold for TP/FP counting.
pub const TPFP_CONFIDENCE: f64 = 0.5;

/// Greedy one-to-one matching: detections are visited by descending
/// confidence (ties by original index) and each claims the unclaimed
/// same-class ground truth of maximal IoU when that IoU is at least
/// `iou_threshold`. Returns a TP flag per detection, in input order.
/// Detections predicted as background are always FP-flagged false and never
/// claim anything.
pub fn match_detections(dets: &[Detection], gts: &[Annotation], iou_threshold: f64) -> Vec<bool> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| {
        dets[j]
            .confidence
            .partial_cmp(&dets[i].confidence)
            .unwrap()
            .then(i.cmp(&j))
    });
    let mut claimed = vec![false; gts.len()];
    let mut flags = vec![false; dets.len()];
    for &di in &order {
        let d = &dets[di];
        if d.predicted_class == BACKGROUND_CLASS {
            continue;
        }
        let mut best: Option<usize> = None;
        let mut best_iou = 0.0;
        for (gi, g) in gts.iter().enumerate() {
            if claimed[gi] || g.class_label != d.predicted_class {
                continue;
            }
            let v = iou(&d.bbox, &g.bbox);
            if v > best_iou {
                best_iou = v;
                best = Some(gi);
            }
        }
        if let Some(gi) = best {
            if best_iou >= iou_threshold {
                claimed[gi] = true;
                flags[di] = true;
            }
        }
    }
    flags
}

/// All-point interpolated average precision: sweep by descending confidence,
/// take the precision envelope (max precision at recall >= r), integrate
/// over recall.
pub fn average_precision(mut scored_flags: Vec<(f64, bool)>, n_gt: usize) -> f64 {
    assert!(n_gt >= 1, "AP undefined without ground truth");
    scored_flags.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let n = scored_flags.len();
    let mut precision = Vec::with_capacity(n);
    let mut tp = 0usize;
    for (k, &(_, is_tp)) in scored_flags.iter().enumerate() {
        if is_tp {
            tp += 1;
        }
        precision.push(tp as f64 / (k + 1) as f64);
    }
    // envelope from the right
    for k in (0..n.saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let mut ap = 0.0;
    for (k, &(_, is_tp)) in scored_flags.iter().enumerate() {
        if is_tp {
            ap += precision[k] / n_gt as f64;
        }
    }
    ap
}

/// TP and FP counts among detections with confidence >= `threshold`.
pub fn tp_fp_counts(scored_flags: &[(f64, bool)], threshold: f64) -> (usize, usize) {
    let mut tp = 0;
    let mut fp = 0;
    for &(conf, is_tp) in scored_flags {
        if conf >= threshold {
            if is_tp {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    (tp, fp)
}

/// Raw precision-recall points in descending-confidence order.
pub fn pr_curve(scored_flags: &[(f64, bool)], n_gt: usize) -> Vec<PrPoint> {
    let mut sorted: Vec<(f64, bool)> = scored_flags.to_vec();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut tp = 0usize;
    sorted
        .iter()
        .enumerate()
        .map(|(k, &(conf, is_tp))| {
            if is_tp {
                tp += 1;
            }
            PrPoint {
                confidence: conf,
                recall: tp as f64 / n_gt.max(1) as f64,
                precision: tp as f64 / (k + 1) as f64,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub confidence: f64,
    pub recall: f64,
    pub precision: f64,
}

/// Accumulates per-class scored flags over many frames, then folds them into
/// an [`EvalReport`].
#[derive(Debug, Clone, Default)]
pub struct EvalAccumulator {
    per_class: BTreeMap<usize, ClassAccum>,
}

#[derive(Debug, Clone, Default)]
struct ClassAccum {
    scored_flags: Vec<(f64, bool)>,
    n_gt: usize,
}

impl EvalAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Matches one frame's detections (in the same coordinate frame as the
    /// annotations) and folds the outcome in.
    pub fn add_frame(&mut self, dets: &[Detection], gts: &[Annotation], iou_threshold: f64) {
        let flags = match_detections(dets, gts, iou_threshold);
        for g in gts {
            self.per_class.entry(g.class_label).or_default().n_gt += 1;
        }
        for (d, &tp) in dets.iter().zip(&flags) {
            if d.predicted_class == BACKGROUND_CLASS {
                continue;
            }
            self.per_class
                .entry(d.predicted_class)
                .or_default()
                .scored_flags
                .push((d.confidence, tp));
        }
    }

    pub fn finish(
        self,
        tpfp_threshold: f64,
        total_workload: f64,
        scale_trace: Vec<ScaleTraceEntry>,
        histogram: Vec<HistBin>,
    ) -> EvalReport {
        let mut per_class = BTreeMap::new();
        let mut tp_total = 0;
        let mut fp_total = 0;
        for (class, acc) in self.per_class {
            let (tp, fp) = tp_fp_counts(&acc.scored_flags, tpfp_threshold);
            tp_total += tp;
            fp_total += fp;
            let ap = if acc.n_gt >= 1 {
                Some(average_precision(acc.scored_flags.clone(), acc.n_gt))
            } else {
                None
            };
            per_class.insert(
                class,
                ClassEval {
                    ap,
                    n_gt: acc.n_gt,
                    tp,
                    fp,
                    pr: pr_curve(&acc.scored_flags, acc.n_gt),
                },
            );
        }
        let aps: Vec<f64> = per_class.values().filter_map(|c| c.ap).collect();
        let map = if aps.is_empty() {
            0.0
        } else {
            aps.iter().sum::<f64>() / aps.len() as f64
        };
        EvalReport {
            map,
            per_class,
            tp_total,
            fp_total,
            tpfp_threshold,
            total_workload,
            scale_trace,
            scale_histogram: histogram,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEval {
    /// `None` for classes with no ground truth (excluded from mAP).
    pub ap: Option<f64>,
    pub n_gt: usize,
    pub tp: usize,
    pub fp: usize,
    pub pr: Vec<PrPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleTraceEntry {
    pub snippet_id: String,
    pub frame_index: usize,
    pub scale: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Uniform-bin histogram of per-frame scales over `[lo, hi]`.
pub fn scale_histogram(scales: &[u32], lo: u32, hi: u32, bins: usize) -> Vec<HistBin> {
    assert!(bins >= 1 && hi >= lo);
    let lo_f = lo as f64;
    let width = ((hi - lo) as f64 / bins as f64).max(1e-9);
    let mut out: Vec<HistBin> = (0..bins)
        .map(|b| HistBin {
            lo: lo_f + b as f64 * width,
            hi: lo_f + (b + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for &s in scales {
        let b = (((s as f64 - lo_f) / width).floor() as isize).clamp(0, bins as isize - 1) as usize;
        out[b].count += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub map: f64,
    pub per_class: BTreeMap<usize, ClassEval>,
    pub tp_total: usize,
    pub fp_total: usize,
    pub tpfp_threshold: f64,
    pub total_workload: f64,
    pub scale_trace: Vec<ScaleTraceEntry>,
    pub scale_histogram: Vec<HistBin>,
}

impl EvalReport {
    /// One CSV row per class: class, ap, n_gt, tp, fp.
    pub fn per_class_csv(&self) -> String {
        let mut s = String::from("class,ap,n_gt,tp,fp\n");
        for (class, c) in &self.per_class {
            let ap = c.ap.map(|a| a.to_string()).unwrap_or_default();
            s.push_str(&format!("{class},{ap},{},{},{}\n", c.n_gt, c.tp, c.fp));
        }
        s
    }

    pub fn pr_csv(&self) -> String {
        let mut s = String::from("class,confidence,recall,precision\n");
        for (class, c) in &self.per_class {
            for p in &c.pr {
                s.push_str(&format!(
                    "{class},{},{},{}\n",
                    p.confidence, p.recall, p.precision
                ));
            }
        }
        s
    }

    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("lo,hi,count\n");
        for b in &self.scale_histogram {
            s.push_str(&format!("{},{},{}\n", b.lo, b.hi, b.count));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundingBox;
    use proptest::prelude::*;

    fn det(x: f64, y: f64, s: f64, class: usize, conf: f64) -> Detection {
        let mut scores = vec![1.0 - conf, 0.0, 0.0, 0.0];
        scores[class] = conf;
        Detection::from_scores(BoundingBox::new(x, y, x + s, y + s), scores)
    }

    fn gt(x: f64, y: f64, s: f64, class: usize) -> Annotation {
        Annotation::new(BoundingBox::new(x, y, x + s, y + s), class)
    }

    #[test]
    fn exact_match_is_tp() {
        let flags = match_detections(&[det(0.0, 0.0, 10.0, 1, 0.9)], &[gt(0.0, 0.0, 10.0, 1)], 0.5);
        assert_eq!(flags, vec![true]);
    }

    #[test]
    fn duplicate_detection_is_fp() {
        let dets = vec![det(0.0, 0.0, 10.0, 1, 0.8), det(0.5, 0.0, 10.0, 1, 0.9)];
        let flags = match_detections(&dets, &[gt(0.0, 0.0, 10.0, 1)], 0.5);
        // higher confidence claims the gt
        assert_eq!(flags, vec![false, true]);
    }

    #[test]
    fn wrong_class_is_fp() {
        let flags = match_detections(&[det(0.0, 0.0, 10.0, 2, 0.9)], &[gt(0.0, 0.0, 10.0, 1)], 0.5);
        assert_eq!(flags, vec![false]);
    }

    #[test]
    fn ap_perfect_detection() {
        assert_eq!(average_precision(vec![(0.9, true), (0.8, true)], 2), 1.0);
    }

    #[test]
    fn ap_single_false_positive() {
        assert_eq!(average_precision(vec![(0.9, false)], 1), 0.0);
    }

    #[test]
    fn ap_tp_fp_tp_hand_case() {
        // flags [TP, FP, TP] with 2 gts -> 0.5*1.0 + 0.5*(2/3)
        let ap = average_precision(vec![(0.9, true), (0.8, false), (0.7, true)], 2);
        assert!((ap - (0.5 + 0.5 * (2.0 / 3.0))).abs() < 1e-12);
    }

    #[test]
    fn tp_fp_count_thresholds() {
        let flags = vec![(0.9, true), (0.6, false), (0.4, true), (0.2, false)];
        assert_eq!(tp_fp_counts(&flags, 0.0), (2, 2));
        assert_eq!(tp_fp_counts(&flags, 0.5), (1, 1));
        assert_eq!(tp_fp_counts(&flags, 1.0), (0, 0));
    }

    /// Brute-force AP oracle: explicit precision envelope over all prefixes.
    pub(crate) fn brute_force_ap(scored_flags: &[(f64, bool)], n_gt: usize) -> f64 {
        let mut sorted: Vec<(f64, bool)> = scored_flags.to_vec();
        sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let n = sorted.len();
        let prec_at = |k: usize| -> f64 {
            let tp = sorted[..=k].iter().filter(|f| f.1).count();
            tp as f64 / (k + 1) as f64
        };
        let mut ap = 0.0;
        let mut prev_recall = 0.0;
        for k in 0..n {
            let tp = sorted[..=k].iter().filter(|f| f.1).count();
            let recall = tp as f64 / n_gt as f64;
            if recall > prev_recall {
                // envelope: max precision over all prefixes with recall >= this
                let env = (k..n).map(prec_at).fold(0.0f64, f64::max);
                ap += (recall - prev_recall) * env;
                prev_recall = recall;
            }
        }
        ap
    }

    proptest! {
        #[test]
        fn ap_matches_brute_force(
            flags in proptest::collection::vec((0.0f64..1.0, any::<bool>()), 0..=8),
            n_gt in 1usize..=4,
        ) {
            let tp_count = flags.iter().filter(|f| f.1).count();
            prop_assume!(tp_count <= n_gt);
            let fast = average_precision(flags.clone(), n_gt);
            let brute = brute_force_ap(&flags, n_gt);
            prop_assert!((fast - brute).abs() < 1e-12, "{fast} vs {brute}");
        }

        #[test]
        fn ap_monotone_under_fp_to_tp_flip(
            flags in proptest::collection::vec((0.0f64..1.0, any::<bool>()), 1..=8),
        ) {
            let n_gt = 8;
            let base = average_precision(flags.clone(), n_gt);
            for i in 0..flags.len() {
                if !flags[i].1 {
                    let mut flipped = flags.clone();
                    flipped[i].1 = true;
                    prop_assert!(average_precision(flipped, n_gt) >= base - 1e-12);
                }
            }
        }

        #[test]
        fn matching_stable_under_equal_confidence_permutation(
            seeds in proptest::collection::vec(0.0f64..100.0, 2..6),
        ) {
            // all detections share one confidence; totals must not change
            let dets: Vec<Detection> =
                seeds.iter().map(|&x| det(x, 0.0, 10.0, 1, 0.7)).collect();
            let gts: Vec<Annotation> =
                seeds.iter().map(|&x| gt(x, 0.0, 10.0, 1)).collect();
            let count = |ds: &[Detection]| {
                match_detections(ds, &gts, 0.5).iter().filter(|&&f| f).count()
            };
            let base = count(&dets);
            let mut rev = dets.clone();
            rev.reverse();
            prop_assert_eq!(count(&rev), base);
        }
    }

    #[test]
    fn map_is_mean_over_classes_with_gt() {
        let mut acc = EvalAccumulator::new();
        // class 1: perfect; class 2: one FP with no gt (excluded); class 3: miss
        acc.add_frame(
            &[det(0.0, 0.0, 10.0, 1, 0.9), det(50.0, 50.0, 10.0, 2, 0.8)],
            &[gt(0.0, 0.0, 10.0, 1), gt(100.0, 100.0, 10.0, 3)],
            0.5,
        );
        let report = acc.finish(0.5, 0.0, vec![], vec![]);
        assert_eq!(report.per_class[&1].ap, Some(1.0));
        assert_eq!(report.per_class[&2].ap, None);
        assert_eq!(report.per_class[&3].ap, Some(0.0));
        assert!((report.map - 0.5).abs() < 1e-12);
    }

    #[test]
    fn histogram_bins_cover_range() {
        let h = scale_histogram(&[128, 128, 600, 360], 128, 600, 10);
        assert_eq!(h.len(), 10);
        assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 4);
        assert_eq!(h[0].count, 2);
        assert_eq!(h[9].count, 1);
    }
}
