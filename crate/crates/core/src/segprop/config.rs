use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::ChainParams;
use crate::geometry::{RansacParams, DEFAULT_MIN_REGION_SIZE};
use crate::model::NUM_CLASSES;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelWeights {
    pub flow: f64,
    pub homography: f64,
    pub external: f64,
}

impl Default for ChannelWeights {
    fn default() -> Self {
        Self {
            flow: 1.0,
            homography: 1.0,
            external: 1.0,
        }
    }
}

/// How equal top counts are resolved.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Prefer the class pulled from the temporally nearer keyframe (the
    /// pixel's previous label during iterations), then the lowest id.
    #[default]
    NearerKeyframe,
    LowestId,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    /// Every frame updates from the previous iteration's labels.
    #[default]
    Parallel,
    /// Frames update in index order, each seeing earlier updates.
    Sequential,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropagationConfig {
    /// Neighborhood radius in frames for the iterative pass.
    pub f: usize,
    /// Iterative passes after the initial keyframe voting; 0 disables them.
    pub iterations: usize,
    pub num_classes: usize,
    pub tie_break: TieBreak,
    pub weights: ChannelWeights,
    /// Homography votes during the initial keyframe voting.
    pub homography: bool,
    /// Homography votes between pseudo-keyframe pairs during iterations.
    pub iterate_homography: bool,
    pub update_mode: UpdateMode,
    pub chain: ChainParams,
    pub ransac: RansacParams,
    pub min_region_size: usize,
    /// Cap on correspondences handed to RANSAC per region.
    pub max_ransac_points: usize,
    /// Propagate one-sidedly into frames before the first / after the last
    /// keyframe.
    pub extend_edges: bool,
    pub seed: u64,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            f: 2,
            iterations: 3,
            num_classes: NUM_CLASSES,
            tie_break: TieBreak::default(),
            weights: ChannelWeights::default(),
            homography: true,
            iterate_homography: true,
            update_mode: UpdateMode::default(),
            chain: ChainParams::default(),
            ransac: RansacParams::default(),
            min_region_size: DEFAULT_MIN_REGION_SIZE,
            max_ransac_points: 2000,
            extend_edges: true,
            seed: 0,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.f == 0 {
            return Err(Error::Invalid("neighborhood radius f must be at least 1".into()));
        }
        if self.num_classes == 0 || self.num_classes > 255 {
            return Err(Error::Invalid(format!(
                "num_classes must be in 1..=255, got {}",
                self.num_classes
            )));
        }
        let w = &self.weights;
        for (name, v) in [("flow", w.flow), ("homography", w.homography), ("external", w.external)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Invalid(format!(
                    "{name} weight must be finite and >= 0, got {v}"
                )));
            }
        }
        if let Some(eps) = self.chain.fb_threshold {
            if !(eps.is_finite() && eps > 0.0) {
                return Err(Error::Invalid(format!("fb threshold must be positive, got {eps}")));
            }
        }
        let r = &self.ransac;
        if !(r.inlier_px.is_finite() && r.inlier_px > 0.0) || r.max_iters == 0 {
            return Err(Error::Invalid("RANSAC needs inlier_px > 0 and max_iters > 0".into()));
        }
        if !(r.confidence > 0.0 && r.confidence < 1.0) {
            return Err(Error::Invalid(format!(
                "RANSAC confidence must be in (0, 1), got {}",
                r.confidence
            )));
        }
        if self.max_ransac_points < 4 {
            return Err(Error::Invalid("max_ransac_points must be at least 4".into()));
        }
        Ok(())
    }
}
