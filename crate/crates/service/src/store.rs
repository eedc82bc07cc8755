//! Sequence directories and the annotation store.
//!
//! Each sequence is a dataset video directory. Annotations live next to it:
//!
//! ```text
//! annotations/000050.json      current revision
//! annotations/history.jsonl    every accepted revision, append-only
//! labels/000050.png            rasterized, written only when fully covered
//! jobs/<id>/labels/*.png       propagation output
//! ```

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::Serialize;

use segprop_core::dataset::{discover_keyframes, frame_file_name, write_label_image};
use segprop_core::model::load_manifest;
use segprop_core::{Palette, SequenceManifest};

use crate::raster::{rasterize_partial, Annotation, AnnotationError, Polygon};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("unknown sequence {0}")]
    UnknownSequence(String),
    #[error("frame {frame} out of range for {count} frames")]
    UnknownFrame { frame: usize, count: usize },
    #[error("revision {given} is stale, current revision is {current}")]
    Conflict { given: u64, current: u64 },
    #[error(transparent)]
    Invalid(#[from] AnnotationError),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] segprop_core::Error),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> StoreError {
    StoreError::Io(format!("{}: {e}", path.display()))
}

pub struct Sequence {
    pub name: String,
    pub dir: PathBuf,
    pub manifest: SequenceManifest,
    /// Serializes annotation writes.
    write_lock: Mutex<()>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SequenceSummary {
    pub name: String,
    pub frame_count: usize,
    pub width: usize,
    pub height: usize,
    pub keyframes: Vec<usize>,
}

/// Outcome of a stored annotation.
#[derive(Clone, Debug, Serialize)]
pub struct AnnotationState {
    #[serde(flatten)]
    pub annotation: Annotation,
    /// Whether the polygons cover the frame, making it a keyframe.
    pub keyframe: bool,
    pub uncovered_pixels: usize,
}

impl Sequence {
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        let manifest = load_manifest(&dir.join("manifest.json"))?;
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(Self {
            name,
            dir: dir.to_path_buf(),
            manifest,
            write_lock: Mutex::new(()),
        })
    }

    pub fn frame_count(&self) -> usize {
        self.manifest.frame_count()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.manifest.width(), self.manifest.height())
    }

    pub fn keyframes(&self) -> Result<Vec<usize>, StoreError> {
        Ok(discover_keyframes(&self.dir.join("labels"))?)
    }

    pub fn summary(&self) -> Result<SequenceSummary, StoreError> {
        Ok(SequenceSummary {
            name: self.name.clone(),
            frame_count: self.frame_count(),
            width: self.manifest.width(),
            height: self.manifest.height(),
            keyframes: self.keyframes()?,
        })
    }

    pub fn check_frame(&self, frame: usize) -> Result<(), StoreError> {
        if frame >= self.frame_count() {
            return Err(StoreError::UnknownFrame {
                frame,
                count: self.frame_count(),
            });
        }
        Ok(())
    }

    pub fn frame_path(&self, frame: usize) -> Result<PathBuf, StoreError> {
        self.check_frame(frame)?;
        Ok(self.manifest.frame_path(frame).expect("checked above"))
    }

    fn annotation_path(&self, frame: usize) -> PathBuf {
        self.dir.join("annotations").join(format!("{frame:06}.json"))
    }

    /// Current annotation; an unannotated frame is revision 0 with no
    /// polygons.
    pub fn annotation(&self, frame: usize) -> Result<Annotation, StoreError> {
        self.check_frame(frame)?;
        let path = self.annotation_path(frame);
        if !path.is_file() {
            return Ok(Annotation {
                frame,
                revision: 0,
                polygons: Vec::new(),
            });
        }
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        serde_json::from_str(&text).map_err(|e| io_err(&path, e))
    }

    pub fn annotation_state(&self, frame: usize) -> Result<AnnotationState, StoreError> {
        let annotation = self.annotation(frame)?;
        let (w, h) = self.dims();
        let (_, uncovered) = rasterize_partial(&annotation, w, h);
        Ok(AnnotationState {
            keyframe: uncovered == 0 && !annotation.polygons.is_empty(),
            uncovered_pixels: uncovered,
            annotation,
        })
    }

    /// Stores a new revision if `expected_revision` is current. A fully
    /// covering annotation is rasterized into `labels/`; otherwise any
    /// previous label image for the frame is removed.
    pub fn put_annotation(
        &self,
        frame: usize,
        expected_revision: u64,
        polygons: Vec<Polygon>,
    ) -> Result<AnnotationState, StoreError> {
        let _guard = self.write_lock.lock().unwrap();
        let current = self.annotation(frame)?;
        if current.revision != expected_revision {
            return Err(StoreError::Conflict {
                given: expected_revision,
                current: current.revision,
            });
        }
        let next = Annotation {
            frame,
            revision: current.revision + 1,
            polygons,
        };
        next.validate()?;

        let (w, h) = self.dims();
        let (label, uncovered) = rasterize_partial(&next, w, h);
        let ann_dir = self.dir.join("annotations");
        let labels_dir = self.dir.join("labels");
        for d in [&ann_dir, &labels_dir] {
            fs::create_dir_all(d).map_err(|e| io_err(d, e))?;
        }
        let line = serde_json::to_string(&next).map_err(|e| io_err(&ann_dir, e))?;
        let history = ann_dir.join("history.jsonl");
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&history)
            .map_err(|e| io_err(&history, e))?;
        writeln!(file, "{line}").map_err(|e| io_err(&history, e))?;

        let path = self.annotation_path(frame);
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(&next).map_err(|e| io_err(&tmp, e))?).map_err(|e| io_err(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| io_err(&path, e))?;

        let label_path = labels_dir.join(frame_file_name(frame));
        let keyframe = uncovered == 0 && !next.polygons.is_empty();
        if keyframe {
            write_label_image(&label_path, &label, &Palette::standard())?;
        } else if label_path.exists() {
            fs::remove_file(&label_path).map_err(|e| io_err(&label_path, e))?;
        }
        Ok(AnnotationState {
            annotation: next,
            keyframe,
            uncovered_pixels: uncovered,
        })
    }

    /// All accepted revisions of `frame`, oldest first.
    pub fn history(&self, frame: usize) -> Result<Vec<Annotation>, StoreError> {
        let path = self.dir.join("annotations").join("history.jsonl");
        if !path.is_file() {
            return Ok(Vec::new());
        }
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str::<Annotation>(l).map_err(|e| io_err(&path, e)))
            .filter(|a| a.as_ref().map_or(true, |a| a.frame == frame))
            .collect()
    }

    pub fn job_dir(&self, job: u64) -> PathBuf {
        self.dir.join("jobs").join(job.to_string())
    }
}

/// All sequences under a root directory.
pub struct Store {
    root: PathBuf,
    sequences: BTreeMap<String, Sequence>,
}

impl Store {
    /// Opens every subdirectory of `root` that holds a `manifest.json`.
    pub fn open(root: &Path) -> Result<Self, StoreError> {
        let mut sequences = BTreeMap::new();
        for entry in fs::read_dir(root).map_err(|e| io_err(root, e))? {
            let dir = entry.map_err(|e| io_err(root, e))?.path();
            if dir.join("manifest.json").is_file() {
                let seq = Sequence::open(&dir)?;
                sequences.insert(seq.name.clone(), seq);
            }
        }
        log::info!("serving {} sequence(s) from {}", sequences.len(), root.display());
        Ok(Self {
            root: root.to_path_buf(),
            sequences,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn get(&self, name: &str) -> Result<&Sequence, StoreError> {
        self.sequences
            .get(name)
            .ok_or_else(|| StoreError::UnknownSequence(name.to_string()))
    }

    pub fn sequences(&self) -> impl Iterator<Item = &Sequence> {
        self.sequences.values()
    }
}
