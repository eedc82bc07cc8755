//! Propagation flags shared by `propagate` and `ablate`.

use std::path::PathBuf;

use clap::{Args, ValueEnum};

use segprop_core::segprop::{ChannelWeights, PropagationConfig, TieBreak, UpdateMode};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TieBreakArg {
    Nearer,
    Lowest,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum UpdateArg {
    Parallel,
    Sequential,
}

#[derive(Args, Debug, Clone)]
pub struct ConfigArgs {
    /// JSON propagation config used as the base; flags override it.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Temporal neighborhood radius of the iterative pass.
    #[arg(long)]
    pub f: Option<usize>,
    /// Iterative passes; 0 gives a single keyframe voting pass.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Forward-backward threshold in pixels, or `off`.
    #[arg(long, value_name = "PX|off")]
    pub eps_fb: Option<String>,
    /// RANSAC inlier distance in pixels.
    #[arg(long)]
    pub inlier_px: Option<f64>,
    #[arg(long)]
    pub ransac_iters: Option<usize>,
    /// Channel weights, e.g. `flow=1,homography=0.5,external=2`.
    #[arg(long, value_name = "LIST")]
    pub weights: Option<String>,
    #[arg(long, value_enum)]
    pub tie_break: Option<TieBreakArg>,
    #[arg(long, value_enum)]
    pub update: Option<UpdateArg>,
    /// Disable homography votes everywhere.
    #[arg(long)]
    pub no_homography: bool,
    /// Keep homography votes for keyframe voting but not during iterations.
    #[arg(long)]
    pub no_iterate_homography: bool,
    /// Copy the end keyframes outward instead of propagating past them.
    #[arg(long)]
    pub no_extend_edges: bool,
    #[arg(long)]
    pub min_region_size: Option<usize>,
    /// Seed for every randomized step.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn parse_weights(text: &str, base: ChannelWeights) -> CliResult<ChannelWeights> {
    let mut w = base;
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| CliError::invalid(format!("weight {part:?} is not name=value")))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::invalid(format!("weight {part:?} has a non-numeric value")))?;
        match key.trim() {
            "flow" => w.flow = v,
            "homography" | "hom" => w.homography = v,
            "external" | "ext" => w.external = v,
            other => return Err(CliError::invalid(format!("unknown weight channel {other:?}"))),
        }
    }
    Ok(w)
}

impl ConfigArgs {
    pub fn build(&self) -> CliResult<PropagationConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text =
                    std::fs::read_to_string(path).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?
            }
            None => PropagationConfig::default(),
        };
        if let Some(f) = self.f {
            c.f = f;
        }
        if let Some(n) = self.iterations {
            c.iterations = n;
        }
        if let Some(eps) = &self.eps_fb {
            c.chain.fb_threshold = match eps.as_str() {
                "off" | "none" => None,
                v => Some(
                    v.parse()
                        .map_err(|_| CliError::invalid(format!("--eps-fb {v:?} is not a number")))?,
                ),
            };
        }
        if let Some(px) = self.inlier_px {
            c.ransac.inlier_px = px;
        }
        if let Some(n) = self.ransac_iters {
            c.ransac.max_iters = n;
        }
        if let Some(w) = &self.weights {
            c.weights = parse_weights(w, c.weights)?;
        }
        if let Some(t) = self.tie_break {
            c.tie_break = match t {
                TieBreakArg::Nearer => TieBreak::NearerKeyframe,
                TieBreakArg::Lowest => TieBreak::LowestId,
            };
        }
        if let Some(u) = self.update {
            c.update_mode = match u {
                UpdateArg::Parallel => UpdateMode::Parallel,
                UpdateArg::Sequential => UpdateMode::Sequential,
            };
        }
        if self.no_homography {
            c.homography = false;
            c.iterate_homography = false;
        }
        if self.no_iterate_homography {
            c.iterate_homography = false;
        }
        if self.no_extend_edges {
            c.extend_edges = false;
        }
        if let Some(n) = self.min_region_size {
            c.min_region_size = n;
        }
        if let Some(s) = self.seed {
            c.seed = s;
            c.ransac.seed = s;
        }
        c.validate()?;
        Ok(c)
    }
}
