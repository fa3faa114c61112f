//! Adaptive input-scale video object detection: optimal-scale label
//! generation from detector losses, a from-scratch scale regressor, the
//! adaptive per-frame scale loop, and a benchmark harness comparing it
//! against fixed-, random-, and multi-scale policies on synthetic corpora.

pub mod detcore;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod losses;
pub mod pipeline;
pub mod regressor;
pub mod scalecodec;
pub mod simdet;

pub use detcore::{assign_foreground, nms, Annotation, Detection};
pub use eval::EvalReport;
pub use geometry::{compute_resize, iou, BoundingBox, ImageSize};
pub use losses::{box_loss, compute_scale_metric, LossConfig, ScaleMetricReport};
pub use pipeline::{
    compare_policies, generate_scale_labels, run_policy, train_regressor, LabeledFrame,
    PolicyKind, PolicySpec,
};
pub use regressor::{FeatureMap, RegressorConfig, RegressorModel, TrainerState};
pub use scalecodec::{decode_scale, encode_scale_target, ScaleSet, ScaleTarget};
pub use simdet::{detect, generate_corpus, DetectorProfile, GeneratorConfig, VideoSnippet};
