use serde::{Deserialize, Serialize};

use super::config::PropagationConfig;

/// Weighted vote mass contributed by each channel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChannelTotals {
    pub flow: f64,
    pub homography: f64,
    pub external: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub frame: usize,
    /// Bounding keyframes used for the initial pass.
    pub keyframes: (usize, usize),
    pub votes: ChannelTotals,
    pub valid_pull_pixels: usize,
    pub valid_push_pixels: usize,
    pub fallback_pixels: usize,
    pub tie_pixels: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitFailure {
    pub keyframe: usize,
    pub target: usize,
    pub region_id: usize,
    pub class: u8,
    pub pixels: usize,
    pub correspondences: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub changed_pixels: usize,
    pub fallback_pixels: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationReport {
    pub config: PropagationConfig,
    pub keyframes: Vec<usize>,
    pub frames: Vec<FrameReport>,
    pub region_fit_failures: Vec<FitFailure>,
    pub iterations: Vec<IterationStats>,
    pub provider_failures: Vec<String>,
}

impl PropagationReport {
    pub fn new(config: PropagationConfig, keyframes: Vec<usize>) -> Self {
        Self {
            config,
            keyframes,
            frames: Vec::new(),
            region_fit_failures: Vec::new(),
            iterations: Vec::new(),
            provider_failures: Vec::new(),
        }
    }

    pub fn fallback_pixels(&self) -> usize {
        self.frames.iter().map(|f| f.fallback_pixels).sum()
    }
}
