use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Description of one pre-extracted frame sequence.
///
/// Relative paths inside the manifest resolve against the directory the
/// manifest was loaded from (`base_dir`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceManifest {
    pub fps: f64,
    /// `[width, height]` in pixels.
    pub resolution: [usize; 2],
    pub frames: Vec<PathBuf>,
    pub keyframes: Vec<usize>,
    #[serde(default)]
    pub flow_dir: Option<PathBuf>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl SequenceManifest {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn width(&self) -> usize {
        self.resolution[0]
    }

    pub fn height(&self) -> usize {
        self.resolution[1]
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn frame_path(&self, index: usize) -> Option<PathBuf> {
        self.frames.get(index).map(|p| self.resolve(p))
    }

    pub fn flow_dir(&self) -> Option<PathBuf> {
        self.flow_dir.as_deref().map(|p| self.resolve(p))
    }

    pub fn is_keyframe(&self, index: usize) -> bool {
        self.keyframes.binary_search(&index).is_ok()
    }

    /// Structural checks only; does not touch the filesystem.
    pub fn validate(&self) -> Result<()> {
        if self.resolution[0] == 0 || self.resolution[1] == 0 {
            return Err(Error::Invalid(format!(
                "resolution must be positive, got {:?}",
                self.resolution
            )));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::Invalid(format!("fps must be positive, got {}", self.fps)));
        }
        if self.keyframes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Unsorted(self.keyframes.clone()));
        }
        if let Some(&k) = self.keyframes.iter().find(|&&k| k >= self.frames.len()) {
            return Err(Error::Invalid(format!(
                "keyframe {k} out of range for {} frames",
                self.frames.len()
            )));
        }
        if self.keyframes.len() < 2 {
            return Err(Error::TooFewKeyframes(self.keyframes.len()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

/// Reads and validates a manifest, including that every frame file exists.
pub fn load_manifest(path: &Path) -> Result<SequenceManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut manifest: SequenceManifest = serde_json::from_str(&text)?;
    manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    manifest.validate()?;
    let missing: Vec<_> = manifest
        .frames
        .iter()
        .map(|p| manifest.resolve(p))
        .filter(|p| !p.is_file())
        .collect();
    if let Some(first) = missing.first() {
        return Err(Error::Invalid(format!(
            "{} frame file(s) missing, first: {}",
            missing.len(),
            first.display()
        )));
    }
    Ok(manifest)
}
