//! On-disk video layout, color-coded label images and the train/validation
//! split.
//!
//! ```text
//! <video>/manifest.json
//! <video>/frames/000000.png
//! <video>/labels/000000.png      keyframes only
//! <video>/flow/000000_fwd.flo    and %06d_bwd.flo
//! ```
//!
//! A frame is a keyframe exactly when its label image exists.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowDir;
use crate::model::{load_manifest, LabelMap, Palette, SequenceManifest, UNLABELED};
use crate::par;

/// Default tolerance (max channel distance) when snapping label colors.
pub const DEFAULT_COLOR_TOLERANCE: u8 = 8;

pub fn frame_file_name(index: usize) -> String {
    format!("{index:06}.png")
}

fn parse_frame_file_name(name: &str) -> Option<usize> {
    let stem = name.strip_suffix(".png")?;
    (stem.len() == 6 && stem.bytes().all(|b| b.is_ascii_digit())).then(|| stem.parse().ok())?
}

pub fn encode_label_image(label: &LabelMap, palette: &Palette) -> Result<RgbImage> {
    if label.unlabeled_count() > 0 {
        return Err(Error::Invalid(format!(
            "frame {} has {} unlabeled pixel(s); label images must be dense",
            label.frame_index,
            label.unlabeled_count()
        )));
    }
    let colors = palette.colors();
    if let Some(&c) = label.as_slice().iter().find(|&&c| c as usize >= colors.len()) {
        return Err(Error::NotFound(format!("class {c} has no palette color")));
    }
    let w = label.width();
    Ok(RgbImage::from_fn(w as u32, label.height() as u32, |x, y| {
        Rgb(colors[label.as_slice()[y as usize * w + x as usize] as usize])
    }))
}

/// Palette-indexed 8-bit PNG: pixel values are class ids and the PLTE chunk
/// carries the palette colors, so any viewer shows the class colors.
pub fn encode_label_png(label: &LabelMap, palette: &Palette) -> Result<Vec<u8>> {
    // Same checks as the RGB encoder.
    encode_label_image(label, palette)?;
    let mut out = Vec::new();
    let mut encoder = png::Encoder::new(&mut out, label.width() as u32, label.height() as u32);
    encoder.set_color(png::ColorType::Indexed);
    encoder.set_depth(png::BitDepth::Eight);
    encoder.set_palette(palette.colors().concat());
    let png_err = |e: png::EncodingError| Error::Invalid(format!("png encoding of frame {}: {e}", label.frame_index));
    let mut writer = encoder.write_header().map_err(png_err)?;
    writer.write_image_data(label.as_slice()).map_err(png_err)?;
    writer.finish().map_err(png_err)?;
    Ok(out)
}

pub fn write_label_image(path: &Path, label: &LabelMap, palette: &Palette) -> Result<()> {
    let bytes = encode_label_png(label, palette)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Maps every pixel to the palette class within `tolerance`; fails listing
/// the colors that match none.
pub fn decode_label_rgb(
    image: &RgbImage,
    palette: &Palette,
    tolerance: u8,
    frame_index: usize,
    origin: &Path,
) -> Result<LabelMap> {
    let mut bad = BTreeSet::new();
    let mut bad_count = 0;
    let data: Vec<u8> = image
        .pixels()
        .map(|p| match palette.snap_color(p.0, tolerance) {
            Some(id) => id.0,
            None => {
                bad.insert(p.0);
                bad_count += 1;
                UNLABELED
            }
        })
        .collect();
    if bad_count > 0 {
        return Err(Error::Decode {
            path: origin.to_path_buf(),
            count: bad_count,
            colors: bad.into_iter().collect(),
        });
    }
    LabelMap::from_vec(image.width() as usize, image.height() as usize, frame_index, data)
}

pub fn decode_label_image(path: &Path, palette: &Palette, tolerance: u8) -> Result<LabelMap> {
    let frame = path
        .file_name()
        .and_then(|n| n.to_str())
        .and_then(parse_frame_file_name)
        .unwrap_or(0);
    let image = image::open(path)?.to_rgb8();
    decode_label_rgb(&image, palette, tolerance, frame, path)
}

/// One video directory.
#[derive(Clone, Debug)]
pub struct Video {
    pub name: String,
    pub root: PathBuf,
    pub manifest: SequenceManifest,
}

impl Video {
    /// Loads `manifest.json` and replaces its keyframe list with the label
    /// images found under `labels/`.
    pub fn open(root: &Path) -> Result<Self> {
        let mut manifest = load_manifest(&root.join("manifest.json"))?;
        let discovered = discover_keyframes(&root.join("labels"))?;
        if discovered != manifest.keyframes {
            log::debug!(
                "{}: manifest lists keyframes {:?}, labels/ has {:?}; using labels/",
                root.display(),
                manifest.keyframes,
                discovered
            );
        }
        manifest.keyframes = discovered;
        if let Some(&k) = manifest.keyframes.iter().find(|&&k| k >= manifest.frame_count()) {
            return Err(Error::Invalid(format!(
                "label for frame {k} but only {} frames",
                manifest.frame_count()
            )));
        }
        let name = root
            .file_name()
            .map_or_else(|| root.display().to_string(), |n| n.to_string_lossy().into_owned());
        Ok(Self {
            name,
            root: root.to_path_buf(),
            manifest,
        })
    }

    pub fn keyframes(&self) -> &[usize] {
        &self.manifest.keyframes
    }

    pub fn frame_count(&self) -> usize {
        self.manifest.frame_count()
    }

    pub fn label_path(&self, frame: usize) -> PathBuf {
        self.root.join("labels").join(frame_file_name(frame))
    }

    /// Decodes every keyframe label, in parallel, checking dimensions.
    pub fn keyframe_labels(&self, palette: &Palette, tolerance: u8) -> Result<Vec<LabelMap>> {
        let dims = (self.manifest.width(), self.manifest.height());
        let labels: Vec<LabelMap> = par::map_slice(self.keyframes(), |&k| {
            decode_label_image(&self.label_path(k), palette, tolerance)
        })
        .into_iter()
        .collect::<Result<_>>()?;
        if let Some(bad) = labels.iter().find(|l| l.dims() != dims) {
            return Err(Error::DimensionMismatch {
                expected: dims,
                actual: bad.dims(),
            });
        }
        Ok(labels)
    }

    /// Flow directory from the manifest, or `flow/` by default.
    pub fn flow_dir(&self) -> PathBuf {
        self.manifest.flow_dir().unwrap_or_else(|| self.root.join("flow"))
    }

    pub fn flow_source(&self) -> FlowDir {
        FlowDir::new(self.flow_dir())
    }
}

/// Frame indices with a label image in `dir`, sorted. A missing directory
/// means no keyframes.
pub fn discover_keyframes(dir: &Path) -> Result<Vec<usize>> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if let Some(k) = entry.file_name().to_str().and_then(parse_frame_file_name) {
            out.push(k);
        }
    }
    out.sort_unstable();
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VideoRole {
    Train,
    Test,
}

/// Frame ranges `[0, train_end)` train and `[train_end, frame_count)`
/// validation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSplit {
    pub train_end: usize,
    pub frame_count: usize,
}

impl FrameSplit {
    pub fn is_train(&self, frame: usize) -> bool {
        frame < self.train_end
    }

    pub fn train_frames(&self) -> std::ops::Range<usize> {
        0..self.train_end
    }

    pub fn val_frames(&self) -> std::ops::Range<usize> {
        self.train_end..self.frame_count
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoEntry {
    pub name: String,
    pub role: VideoRole,
    pub frame_count: usize,
    #[serde(default)]
    pub keyframes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<FrameSplit>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub videos: Vec<VideoEntry>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitPolicy {
    /// Leading fraction of each training video used for training.
    pub train_fraction: f64,
}

impl Default for SplitPolicy {
    fn default() -> Self {
        Self { train_fraction: 0.9 }
    }
}

/// Keyframe counts per split.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train_keyframes: usize,
    pub val_keyframes: usize,
    pub test_keyframes: usize,
}

impl DatasetIndex {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Indexes every subdirectory of `root` holding a `manifest.json`;
    /// videos named in `test_videos` are tagged as test.
    pub fn scan(root: &Path, test_videos: &[String]) -> Result<Self> {
        let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
            .map_err(|e| Error::io(root, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("manifest.json").is_file())
            .collect();
        dirs.sort();
        let videos = dirs
            .iter()
            .map(|d| {
                let v = Video::open(d)?;
                let role = if test_videos.contains(&v.name) {
                    VideoRole::Test
                } else {
                    VideoRole::Train
                };
                Ok(VideoEntry {
                    frame_count: v.frame_count(),
                    keyframes: v.keyframes().to_vec(),
                    name: v.name,
                    role,
                    split: None,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { videos })
    }

    pub fn counts(&self) -> SplitCounts {
        let mut c = SplitCounts::default();
        for v in &self.videos {
            match (v.role, v.split) {
                (VideoRole::Test, _) => c.test_keyframes += v.keyframes.len(),
                (VideoRole::Train, Some(s)) => {
                    let train = v.keyframes.iter().filter(|&&k| s.is_train(k)).count();
                    c.train_keyframes += train;
                    c.val_keyframes += v.keyframes.len() - train;
                }
                (VideoRole::Train, None) => c.train_keyframes += v.keyframes.len(),
            }
        }
        c
    }
}

/// Assigns the leading `floor(fraction * n)` frames of every training video
/// to training and the rest to validation. Test videos are left as is.
pub fn split_dataset(index: &DatasetIndex, policy: &SplitPolicy) -> Result<DatasetIndex> {
    if !(0.0..=1.0).contains(&policy.train_fraction) {
        return Err(Error::Invalid(format!(
            "train fraction {} outside [0, 1]",
            policy.train_fraction
        )));
    }
    let mut out = index.clone();
    for v in &mut out.videos {
        if v.frame_count == 0 {
            return Err(Error::Invalid(format!("video {} has no frames", v.name)));
        }
        if v.role == VideoRole::Train {
            let train_end = (policy.train_fraction * v.frame_count as f64 + 1e-9).floor() as usize;
            v.split = Some(FrameSplit {
                train_end: train_end.min(v.frame_count),
                frame_count: v.frame_count,
            });
        }
    }
    Ok(out)
}
