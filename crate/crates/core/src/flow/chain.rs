use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::source::FlowSource;
use crate::error::Result;
use crate::model::{FlowDirection, FlowField};
use crate::par;

pub const DEFAULT_FB_THRESHOLD: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    /// Forward-backward consistency threshold in pixels; `None` disables the
    /// check (and the need for reverse-direction flow).
    pub fb_threshold: Option<f64>,
}

impl Default for ChainParams {
    fn default() -> Self {
        Self {
            fb_threshold: Some(DEFAULT_FB_THRESHOLD),
        }
    }
}

/// Subpixel mapping of every pixel of `from_frame` into `to_frame`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrespondenceMap {
    pub from_frame: usize,
    pub to_frame: usize,
    width: usize,
    height: usize,
    coords: Vec<[f64; 2]>,
    valid: Vec<bool>,
}

impl CorrespondenceMap {
    pub fn identity(width: usize, height: usize, frame: usize) -> Self {
        Self {
            from_frame: frame,
            to_frame: frame,
            width,
            height,
            coords: (0..height)
                .flat_map(|y| (0..width).map(move |x| [x as f64, y as f64]))
                .collect(),
            valid: vec![true; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Landing position of `(x, y)`, if valid.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<[f64; 2]> {
        let i = y * self.width + x;
        self.valid[i].then(|| self.coords[i])
    }

    /// Landing position rounded to the nearest pixel, if valid.
    #[inline]
    pub fn landing_pixel(&self, x: usize, y: usize) -> Option<(usize, usize)> {
        let [lx, ly] = self.get(x, y)?;
        let (rx, ry) = (lx.round(), ly.round());
        (rx >= 0.0 && ry >= 0.0 && (rx as usize) < self.width && (ry as usize) < self.height)
            .then_some((rx as usize, ry as usize))
    }

    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width + x]
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    /// Raw positions; entries under an invalid mask hold the last position
    /// reached before the chain was cut.
    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

/// Chains adjacent-frame flows to map frame `from` onto frame `to`.
///
/// Each pixel is advected step by step, sampling each flow field
/// bilinearly at the current subpixel position. A pixel becomes invalid
/// (and stays invalid) when it leaves `[0, w-1] x [0, h-1]`, when a single
/// hop fails the forward-backward check, or when the full round trip back
/// to `from` ends farther than the threshold from the start.
pub fn chain_correspondence(
    flows: &dyn FlowSource,
    from: usize,
    to: usize,
    params: &ChainParams,
) -> Result<CorrespondenceMap> {
    let (direction, reverse) = if to >= from {
        (FlowDirection::Forward, FlowDirection::Backward)
    } else {
        (FlowDirection::Backward, FlowDirection::Forward)
    };
    let steps: Vec<usize> = if to >= from {
        (from..to).collect()
    } else {
        (to + 1..=from).rev().collect()
    };
    let forward: Vec<Arc<FlowField>> = steps.iter().map(|&t| flows.flow(t, direction)).collect::<Result<_>>()?;
    let backward: Vec<Arc<FlowField>> = match params.fb_threshold {
        Some(_) => steps
            .iter()
            .map(|&t| flows.flow(direction.target(t).unwrap(), reverse))
            .collect::<Result<_>>()?,
        None => Vec::new(),
    };

    let Some(first) = forward.first().or(backward.first()) else {
        // Zero-length span: dimensions unknown from flows alone.
        return Err(crate::Error::Invalid(
            "zero-length span; use CorrespondenceMap::identity".into(),
        ));
    };
    let (width, height) = first.dims();
    if let Some(bad) = forward.iter().chain(&backward).find(|f| f.dims() != (width, height)) {
        return Err(crate::Error::DimensionMismatch {
            expected: (width, height),
            actual: bad.dims(),
        });
    }

    let fwd: Vec<&FlowField> = forward.iter().map(|f| f.as_ref()).collect();
    let bwd: Vec<&FlowField> = backward.iter().map(|f| f.as_ref()).collect();
    let rows = par::map_indices(height, |y| {
        (0..width)
            .map(|x| advect(&fwd, &bwd, [x as f64, y as f64], params.fb_threshold))
            .collect::<Vec<_>>()
    });
    let mut coords = Vec::with_capacity(width * height);
    let mut valid = Vec::with_capacity(width * height);
    for (pos, ok) in rows.into_iter().flatten() {
        coords.push(pos);
        valid.push(ok);
    }
    Ok(CorrespondenceMap {
        from_frame: from,
        to_frame: to,
        width,
        height,
        coords,
        valid,
    })
}

/// Zero-length spans are the identity; otherwise defers to
/// [`chain_correspondence`].
pub(crate) fn chain_or_identity(
    flows: &dyn FlowSource,
    from: usize,
    to: usize,
    dims: (usize, usize),
    params: &ChainParams,
) -> Result<CorrespondenceMap> {
    if from == to {
        Ok(CorrespondenceMap::identity(dims.0, dims.1, from))
    } else {
        let map = chain_correspondence(flows, from, to, params)?;
        if map.dims() != dims {
            return Err(crate::Error::DimensionMismatch {
                expected: dims,
                actual: map.dims(),
            });
        }
        Ok(map)
    }
}

#[inline]
fn advect(
    forward: &[&FlowField],
    backward: &[&FlowField],
    start: [f64; 2],
    fb_threshold: Option<f64>,
) -> ([f64; 2], bool) {
    let mut pos = start;
    for (n, field) in forward.iter().enumerate() {
        let Some(v) = field.sample(pos[0], pos[1]) else {
            return (pos, false);
        };
        let next = [pos[0] + v[0], pos[1] + v[1]];
        if !in_bounds(field, next) {
            return (pos, false);
        }
        if let Some(eps) = fb_threshold {
            match backward[n].sample(next[0], next[1]) {
                Some(b) if dist([next[0] + b[0], next[1] + b[1]], pos) <= eps => {}
                _ => return (next, false),
            }
        }
        pos = next;
    }
    if let Some(eps) = fb_threshold {
        if forward.len() > 1 {
            let mut back = pos;
            for field in backward.iter().rev() {
                let Some(b) = field.sample(back[0], back[1]) else {
                    return (pos, false);
                };
                back = [back[0] + b[0], back[1] + b[1]];
            }
            if dist(back, start) > eps {
                return (pos, false);
            }
        }
    }
    (pos, true)
}

#[inline]
fn in_bounds(field: &FlowField, p: [f64; 2]) -> bool {
    p[0] >= 0.0 && p[1] >= 0.0 && p[0] <= (field.width() - 1) as f64 && p[1] <= (field.height() - 1) as f64
}

#[inline]
fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}
