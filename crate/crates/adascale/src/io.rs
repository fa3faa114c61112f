//! File formats: JSON-Lines corpus exchange, JSON-Lines label files, the
//! profile document, and report serialization.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detcore::Annotation;
use crate::geometry::{BoundingBox, ImageSize};
use crate::pipeline::LabeledFrame;
use crate::simdet::{DetectorProfile, GeneratorConfig, VideoSnippet};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// One corpus file line: a single annotated frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameRecord {
    pub snippet_id: String,
    pub frame_index: usize,
    pub native_width: u32,
    pub native_height: u32,
    pub annotations: Vec<AnnotationRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub class: usize,
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl From<&Annotation> for AnnotationRecord {
    fn from(a: &Annotation) -> Self {
        Self {
            class: a.class_label,
            x_min: a.bbox.x_min,
            y_min: a.bbox.y_min,
            x_max: a.bbox.x_max,
            y_max: a.bbox.y_max,
        }
    }
}

impl AnnotationRecord {
    fn to_annotation(&self) -> Result<Annotation, String> {
        if self.class < 1 {
            return Err("class must be >= 1".into());
        }
        if self.x_min > self.x_max || self.y_min > self.y_max {
            return Err("inverted box".into());
        }
        Ok(Annotation::new(
            BoundingBox::new(self.x_min, self.y_min, self.x_max, self.y_max),
            self.class,
        ))
    }
}

/// Writes a corpus as JSON-Lines, one frame record per line.
pub fn save_corpus(path: &Path, corpus: &[VideoSnippet]) -> Result<(), IoError> {
    let mut out = Vec::new();
    for snip in corpus {
        for (f, anns) in snip.frames.iter().enumerate() {
            let rec = FrameRecord {
                snippet_id: snip.id.clone(),
                frame_index: f,
                native_width: snip.native.width,
                native_height: snip.native.height,
                annotations: anns.iter().map(AnnotationRecord::from).collect(),
            };
            serde_json::to_writer(&mut out, &rec).expect("serializable record");
            out.push(b'\n');
        }
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Loads a JSON-Lines corpus, grouping frames into snippets in order of
/// first appearance. Frames within a snippet are ordered by frame_index.
pub fn load_corpus(path: &Path) -> Result<Vec<VideoSnippet>, IoError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut snippets: Vec<VideoSnippet> = Vec::new();
    let mut index: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    let mut pending: Vec<(usize, usize, Vec<Annotation>)> = Vec::new(); // (snippet idx, frame_index, anns)
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| IoError::Malformed {
            path: path.display().to_string(),
            line: lineno + 1,
            message,
        };
        let rec: FrameRecord =
            serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        if rec.native_width < 1 || rec.native_height < 1 {
            return Err(malformed("native size must be >= 1".into()));
        }
        let native = ImageSize::new(rec.native_width, rec.native_height);
        let si = *index.entry(rec.snippet_id.clone()).or_insert_with(|| {
            snippets.push(VideoSnippet {
                id: rec.snippet_id.clone(),
                native,
                frames: Vec::new(),
            });
            snippets.len() - 1
        });
        if snippets[si].native != native {
            return Err(malformed("native size differs within snippet".into()));
        }
        let anns = rec
            .annotations
            .iter()
            .map(|a| a.to_annotation())
            .collect::<Result<Vec<_>, _>>()
            .map_err(malformed)?;
        pending.push((si, rec.frame_index, anns));
    }
    // place frames by index within each snippet
    let mut per_snippet: Vec<Vec<(usize, Vec<Annotation>)>> = vec![Vec::new(); snippets.len()];
    for (si, fi, anns) in pending {
        per_snippet[si].push((fi, anns));
    }
    for (si, mut frames) in per_snippet.into_iter().enumerate() {
        frames.sort_by_key(|(fi, _)| *fi);
        for (pos, (fi, _)) in frames.iter().enumerate() {
            if *fi != pos {
                return Err(IoError::Malformed {
                    path: path.display().to_string(),
                    line: 0,
                    message: format!(
                        "snippet {} has non-contiguous frame indices",
                        snippets[si].id
                    ),
                });
            }
        }
        snippets[si].frames = frames.into_iter().map(|(_, a)| a).collect();
    }
    Ok(snippets)
}

/// Profile document: detector behavior plus corpus-generator settings, all
/// fields optional (`{}` is a valid profile meaning "all defaults").
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineProfile {
    pub detector: DetectorProfile,
    pub generator: GeneratorConfig,
}

pub fn load_profile(path: &Path) -> Result<EngineProfile, IoError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| IoError::Malformed {
        path: path.display().to_string(),
        line: 1,
        message: e.to_string(),
    })
}

pub fn save_labels(path: &Path, labels: &[LabeledFrame]) -> Result<(), IoError> {
    let mut out = Vec::new();
    for l in labels {
        serde_json::to_writer(&mut out, l).expect("serializable label");
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn load_labels(path: &Path) -> Result<Vec<LabeledFrame>, IoError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut labels = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let l: LabeledFrame = serde_json::from_str(&line).map_err(|e| IoError::Malformed {
            path: path.display().to_string(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        labels.push(l);
    }
    Ok(labels)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| io_err(path, e))
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}
