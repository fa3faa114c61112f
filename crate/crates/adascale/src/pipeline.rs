//! End-to-end orchestration: optimal-scale label generation, regressor
//! training glue, the adaptive-scale video loop, fixed / random /
//! multi-scale comparison policies, and report assembly.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detcore::{assign_foreground, nms, Detection};
use crate::eval::{
    scale_histogram, EvalAccumulator, EvalReport, ScaleTraceEntry, MATCH_IOU, TPFP_CONFIDENCE,
};
use crate::geometry::{compute_resize, rescale_box, ImageSize};
use crate::losses::{compute_scale_metric, LossConfig, LossError};
use crate::regressor::{train, FeatureMap, RegressorConfig, RegressorError, RegressorModel, TrainerState};
use crate::scalecodec::{decode_scale, encode_scale_target, CodecError, ScaleSet};
use crate::simdet::{
    detect, fnv1a64, frame_hash, num_classes, DetectorProfile, VideoSnippet, NMS_THRESHOLD, TOP_K,
};

/// Histogram bins for per-policy scale distributions.
pub const HISTOGRAM_BINS: usize = 10;

const SALT_INPUT_SCALE: u64 = 0x6d69; // label-time input-scale draw
const SALT_RANDOM_POLICY: u64 = 0x726e;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("adascale policy requires a trained model")]
    MissingModel,
    #[error("model was trained for scale set {model:?} but the policy uses {policy:?}")]
    ScaleSetMismatch { model: Vec<u32>, policy: Vec<u32> },
    #[error("fixed scale {0} lies outside the scale set range")]
    FixedScaleOutOfRange(u32),
    #[error("cannot parse policy {0:?} (expected fixed:M, random, adascale, or multiscale)")]
    BadPolicy(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Regressor(#[from] RegressorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

/// 80/20 snippet split by id hash; stable across runs and platforms.
pub fn split_of(snippet_id: &str) -> Split {
    if fnv1a64(snippet_id.as_bytes()) % 5 == 4 {
        Split::Val
    } else {
        Split::Train
    }
}

/// One label-generation output frame: the feature map recorded at the
/// randomly drawn input scale together with the encoded target toward the
/// optimal scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledFrame {
    pub snippet_id: String,
    pub frame_index: usize,
    pub split: Split,
    /// Input scale the features were recorded at.
    pub input_scale: u32,
    pub m_opt: u32,
    pub target: f64,
    /// Scale set the target was encoded against.
    pub scale_set: ScaleSet,
    pub features: FeatureMap,
}

/// Detector identity for one run: the profile seed mixed with the run seed,
/// so different seeds give independent detector noise while every policy
/// within a run observes identical detections.
pub fn effective_profile(profile: &DetectorProfile, run_seed: u64) -> DetectorProfile {
    let mut p = profile.clone();
    p.seed = frame_hash(profile.seed, "run", run_seed as usize, 0, 0);
    p
}

/// Runs the detector at every scale in `s_label`, computes the
/// foreground-matched metric per frame, and records features at an
/// independently drawn input scale.
pub fn generate_scale_labels(
    corpus: &[VideoSnippet],
    profile: &DetectorProfile,
    s_label: &ScaleSet,
    loss_cfg: &LossConfig,
    seed: u64,
) -> Result<Vec<LabeledFrame>, PipelineError> {
    if corpus.is_empty() {
        return Err(PipelineError::EmptyCorpus);
    }
    let k = num_classes(corpus).max(1);
    let eff = effective_profile(profile, seed);
    let mut labels = Vec::new();
    for snip in corpus {
        let split = split_of(&snip.id);
        for (f, anns) in snip.frames.iter().enumerate() {
            let mut per_scale = BTreeMap::new();
            let mut features_at: BTreeMap<u32, FeatureMap> = BTreeMap::new();
            for &m in s_label.scales() {
                let out = detect(&eff, k, &snip.id, f, snip.native, anns, m);
                let dets_native: Vec<Detection> = out
                    .detections
                    .iter()
                    .map(|d| Detection {
                        bbox: rescale_box(&d.bbox, 1.0 / out.factor),
                        ..d.clone()
                    })
                    .collect();
                let assigns = assign_foreground(&dets_native, anns);
                per_scale.insert(m, (dets_native, assigns));
                features_at.insert(m, out.features);
            }
            let report = compute_scale_metric(&per_scale, anns, loss_cfg)?;
            let draw = frame_hash(seed, &snip.id, f, 0, SALT_INPUT_SCALE);
            let m_i = s_label.scales()[(draw % s_label.len() as u64) as usize];
            let target = encode_scale_target(m_i, report.m_opt, s_label)?;
            labels.push(LabeledFrame {
                snippet_id: snip.id.clone(),
                frame_index: f,
                split,
                input_scale: m_i,
                m_opt: report.m_opt,
                target: target.value(),
                scale_set: s_label.clone(),
                features: features_at.remove(&m_i).expect("m_i drawn from s_label"),
            });
        }
    }
    Ok(labels)
}

/// Extracts `(features, target)` pairs for one split.
pub fn dataset_for_split(labels: &[LabeledFrame], split: Split) -> Vec<(FeatureMap, f64)> {
    labels
        .iter()
        .filter(|l| l.split == split)
        .map(|l| (l.features.clone(), l.target))
        .collect()
}

/// Trains a fresh regressor on the train split of a label file and reports
/// held-out MSE on the validation split (when present).
pub fn train_regressor(
    labels: &[LabeledFrame],
    config: &RegressorConfig,
    trainer: &TrainerState,
) -> Result<(RegressorModel, Vec<f64>, Option<f64>), PipelineError> {
    let scale_set = labels
        .first()
        .map(|l| l.scale_set.clone())
        .ok_or(PipelineError::EmptyCorpus)?;
    let train_set = dataset_for_split(labels, Split::Train);
    let val_set = dataset_for_split(labels, Split::Val);
    let mut model = RegressorModel::init(config, scale_set, trainer.seed);
    let report = train(&mut model, &train_set, trainer)?;
    let held_out = if val_set.is_empty() {
        None
    } else {
        Some(crate::regressor::mse(&model, &val_set)?)
    };
    Ok((model, report.losses, held_out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Fixed(u32),
    Random,
    Adascale,
    Multiscale,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub scales: ScaleSet,
}

impl PolicySpec {
    pub fn parse(text: &str, scales: &ScaleSet) -> Result<Self, PipelineError> {
        let kind = match text {
            "random" => PolicyKind::Random,
            "adascale" => PolicyKind::Adascale,
            "multiscale" => PolicyKind::Multiscale,
            other => {
                let m = other
                    .strip_prefix("fixed:")
                    .and_then(|v| v.parse::<u32>().ok())
                    .ok_or_else(|| PipelineError::BadPolicy(other.to_string()))?;
                PolicyKind::Fixed(m)
            }
        };
        Ok(Self {
            kind,
            scales: scales.clone(),
        })
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            PolicyKind::Fixed(m) => write!(f, "fixed:{m}"),
            PolicyKind::Random => write!(f, "random"),
            PolicyKind::Adascale => write!(f, "adascale"),
            PolicyKind::Multiscale => write!(f, "multiscale"),
        }
    }
}

/// Per-frame record of what a policy run did, sufficient to replay the
/// adaptive loop independently.
#[derive(Debug, Clone)]
pub struct FrameObservation {
    pub snippet_id: String,
    pub frame_index: usize,
    pub native: ImageSize,
    pub scale: u32,
    /// Features the regressor consumed (adaptive policy only).
    pub features: Option<FeatureMap>,
}

#[derive(Debug)]
pub struct RunOutput {
    pub report: EvalReport,
    pub frames: Vec<FrameObservation>,
}

/// Runs one scale policy over a corpus and evaluates in native coordinates.
pub fn run_policy(
    corpus: &[VideoSnippet],
    profile: &DetectorProfile,
    policy: &PolicySpec,
    model: Option<&RegressorModel>,
    seed: u64,
) -> Result<RunOutput, PipelineError> {
    if corpus.is_empty() {
        return Err(PipelineError::EmptyCorpus);
    }
    let scales = &policy.scales;
    match policy.kind {
        PolicyKind::Fixed(m) => {
            if m < scales.m_min() || m > scales.m_max() {
                return Err(PipelineError::FixedScaleOutOfRange(m));
            }
        }
        PolicyKind::Adascale => {
            let model = model.ok_or(PipelineError::MissingModel)?;
            if model.scale_set != *scales {
                return Err(PipelineError::ScaleSetMismatch {
                    model: model.scale_set.scales().to_vec(),
                    policy: scales.scales().to_vec(),
                });
            }
        }
        _ => {}
    }

    let k = num_classes(corpus).max(1);
    let eff = effective_profile(profile, seed);
    let mut acc = EvalAccumulator::new();
    let mut workload_total = 0.0;
    let mut trace = Vec::new();
    let mut frames_log = Vec::new();
    let mut hist_scales = Vec::new();

    for snip in corpus {
        let mut next_scale = scales.m_max(); // adaptive loop initialization
        for (f, anns) in snip.frames.iter().enumerate() {
            match policy.kind {
                PolicyKind::Multiscale => {
                    let mut merged: Vec<Detection> = Vec::new();
                    for &m in scales.scales() {
                        let out = detect(&eff, k, &snip.id, f, snip.native, anns, m);
                        workload_total += out.resized.pixels();
                        merged.extend(out.detections.iter().map(|d| Detection {
                            bbox: rescale_box(&d.bbox, 1.0 / out.factor),
                            ..d.clone()
                        }));
                    }
                    let final_dets = nms(&merged, NMS_THRESHOLD, TOP_K);
                    acc.add_frame(&final_dets, anns, MATCH_IOU);
                    let m = scales.m_max();
                    trace.push(ScaleTraceEntry {
                        snippet_id: snip.id.clone(),
                        frame_index: f,
                        scale: m,
                    });
                    hist_scales.push(m);
                    frames_log.push(FrameObservation {
                        snippet_id: snip.id.clone(),
                        frame_index: f,
                        native: snip.native,
                        scale: m,
                        features: None,
                    });
                }
                _ => {
                    let m = match policy.kind {
                        PolicyKind::Fixed(m) => m,
                        PolicyKind::Random => {
                            let draw = frame_hash(seed, &snip.id, f, 0, SALT_RANDOM_POLICY);
                            scales.scales()[(draw % scales.len() as u64) as usize]
                        }
                        PolicyKind::Adascale => next_scale,
                        PolicyKind::Multiscale => unreachable!(),
                    };
                    let out = detect(&eff, k, &snip.id, f, snip.native, anns, m);
                    workload_total += out.resized.pixels();
                    let dets_native: Vec<Detection> = out
                        .detections
                        .iter()
                        .map(|d| Detection {
                            bbox: rescale_box(&d.bbox, 1.0 / out.factor),
                            ..d.clone()
                        })
                        .collect();
                    acc.add_frame(&dets_native, anns, MATCH_IOU);
                    trace.push(ScaleTraceEntry {
                        snippet_id: snip.id.clone(),
                        frame_index: f,
                        scale: m,
                    });
                    hist_scales.push(m);
                    let features = if policy.kind == PolicyKind::Adascale {
                        let model = model.expect("validated above");
                        let regressed = model.forward(&out.features)?;
                        let base = out.resized.shortest_side();
                        next_scale = decode_scale(regressed, base, scales)?;
                        Some(out.features)
                    } else {
                        None
                    };
                    frames_log.push(FrameObservation {
                        snippet_id: snip.id.clone(),
                        frame_index: f,
                        native: snip.native,
                        scale: m,
                        features,
                    });
                }
            }
        }
    }

    let histogram = scale_histogram(&hist_scales, scales.m_min(), scales.m_max(), HISTOGRAM_BINS);
    let report = acc.finish(TPFP_CONFIDENCE, workload_total, trace, histogram);
    Ok(RunOutput {
        report,
        frames: frames_log,
    })
}

/// Independently recomputes the adaptive scale trace from logged features:
/// the first frame of each snippet runs at the maximum scale, every later
/// frame at the decoded regression of the previous frame's features.
pub fn replay_scale_trace(
    frames: &[FrameObservation],
    model: &RegressorModel,
    scales: &ScaleSet,
) -> Result<Vec<u32>, PipelineError> {
    let mut replayed = Vec::with_capacity(frames.len());
    let mut prev: Option<&FrameObservation> = None;
    for obs in frames {
        let is_new_snippet = prev.map(|p| p.snippet_id != obs.snippet_id).unwrap_or(true);
        let expected = if is_new_snippet {
            scales.m_max()
        } else {
            let p = prev.expect("not first");
            let features = p.features.as_ref().expect("adaptive run logs features");
            let (resized, _) = compute_resize(p.native, p.scale);
            decode_scale(model.forward(features)?, resized.shortest_side(), scales)?
        };
        replayed.push(expected);
        prev = Some(obs);
    }
    Ok(replayed)
}

#[derive(Debug, Clone, Serialize)]
pub struct PolicyRow {
    pub policy: String,
    pub map_mean: f64,
    pub map_std: f64,
    pub workload_mean: f64,
    pub workload_std: f64,
    /// TP/FP counts normalized to the first (baseline) policy.
    pub tp_norm: f64,
    pub fp_norm: f64,
}

#[derive(Debug)]
pub struct ComparisonTable {
    pub rows: Vec<PolicyRow>,
    /// Reports per policy, one per seed, in input order.
    pub reports: Vec<(String, Vec<EvalReport>)>,
}

impl ComparisonTable {
    pub fn to_csv(&self) -> String {
        let mut s =
            String::from("policy,map_mean,map_std,workload_mean,workload_std,tp_norm,fp_norm\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.policy, r.map_mean, r.map_std, r.workload_mean, r.workload_std, r.tp_norm,
                r.fp_norm
            ));
        }
        s
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs every policy over every seed and aggregates mAP and workload
/// statistics, with TP/FP columns normalized against the first policy.
pub fn compare_policies(
    corpus: &[VideoSnippet],
    profile: &DetectorProfile,
    policies: &[PolicySpec],
    model: Option<&RegressorModel>,
    seeds: &[u64],
) -> Result<ComparisonTable, PipelineError> {
    assert!(policies.len() >= 2, "need at least two policies to compare");
    assert!(!seeds.is_empty());
    let mut reports: Vec<(String, Vec<EvalReport>)> = Vec::new();
    for policy in policies {
        let mut per_seed = Vec::new();
        for &seed in seeds {
            per_seed.push(run_policy(corpus, profile, policy, model, seed)?.report);
        }
        reports.push((policy.to_string(), per_seed));
    }
    let baseline_tp: f64 = reports[0].1.iter().map(|r| r.tp_total as f64).sum::<f64>()
        / reports[0].1.len() as f64;
    let baseline_fp: f64 = reports[0].1.iter().map(|r| r.fp_total as f64).sum::<f64>()
        / reports[0].1.len() as f64;
    let rows = reports
        .iter()
        .map(|(name, rs)| {
            let maps: Vec<f64> = rs.iter().map(|r| r.map).collect();
            let loads: Vec<f64> = rs.iter().map(|r| r.total_workload).collect();
            let (map_mean, map_std) = mean_std(&maps);
            let (workload_mean, workload_std) = mean_std(&loads);
            let tp = rs.iter().map(|r| r.tp_total as f64).sum::<f64>() / rs.len() as f64;
            let fp = rs.iter().map(|r| r.fp_total as f64).sum::<f64>() / rs.len() as f64;
            PolicyRow {
                policy: name.clone(),
                map_mean,
                map_std,
                workload_mean,
                workload_std,
                tp_norm: if baseline_tp > 0.0 { tp / baseline_tp } else { 0.0 },
                fp_norm: if baseline_fp > 0.0 { fp / baseline_fp } else { 0.0 },
            }
        })
        .collect();
    Ok(ComparisonTable { rows, reports })
}
