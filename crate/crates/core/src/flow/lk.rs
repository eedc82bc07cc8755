//! Dense pyramidal Lucas-Kanade.
//!
//! Coarse-to-fine: at every pyramid level the flow from the coarser level is
//! upsampled, then refined by repeated window-weighted least-squares solves
//! of the linearized brightness-constancy equation against the warped
//! second frame.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FlowDirection, FlowField};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LkParams {
    /// Pyramid levels including the full-resolution one.
    pub levels: usize,
    /// Side length of the square integration window (odd).
    pub window: usize,
    /// Refinement passes per level.
    pub iterations: usize,
}

impl Default for LkParams {
    fn default() -> Self {
        Self {
            levels: 4,
            window: 9,
            iterations: 5,
        }
    }
}

/// Single-channel float image, intensities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Invalid(format!(
                "gray buffer has {} values, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_image(img: &image::DynamicImage) -> Self {
        let luma = img.to_luma32f();
        Self {
            width: luma.width() as usize,
            height: luma.height() as usize,
            data: luma.into_raw(),
        }
    }

    pub fn open(path: &Path) -> Result<Self> {
        Ok(Self::from_image(&image::open(path)?))
    }

    pub fn from_rgb(width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != width * height * 3 {
            return Err(Error::Invalid("rgb buffer size mismatch".into()));
        }
        let data = rgb
            .chunks_exact(3)
            .map(|p| (0.299 * p[0] as f32 + 0.587 * p[1] as f32 + 0.114 * p[2] as f32) / 255.0)
            .collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Bilinear sample with clamp-to-edge.
    #[inline]
    fn sample_clamped(&self, x: f32, y: f32) -> f32 {
        let x = x.clamp(0.0, (self.width - 1) as f32);
        let y = y.clamp(0.0, (self.height - 1) as f32);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f32;
        let fy = y - y0 as f32;
        let top = self.at(x0, y0) * (1.0 - fx) + self.at(x1, y0) * fx;
        let bottom = self.at(x0, y1) * (1.0 - fx) + self.at(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Binomial-blurred 2x decimation.
    fn downsample(&self) -> GrayFrame {
        const K: [f32; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
        let (w, h) = (self.width, self.height);
        let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
        let mut tmp = vec![0.0f32; w * h];
        for y in 0..h {
            for x in 0..w {
                tmp[y * w + x] = K
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * self.at(clamp(x as isize + k as isize - 2, w), y))
                    .sum();
            }
        }
        let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
        let mut out = vec![0.0f32; nw * nh];
        for y in 0..nh {
            for x in 0..nw {
                out[y * nw + x] = K
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * tmp[clamp(2 * y as isize + k as isize - 2, h) * w + 2 * x])
                    .sum();
            }
        }
        GrayFrame {
            width: nw,
            height: nh,
            data: out,
        }
    }
}

/// Estimates the flow field carrying `a` onto `b`.
pub fn estimate_flow(a: &GrayFrame, b: &GrayFrame, params: &LkParams) -> Result<FlowField> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(Error::DimensionMismatch {
            expected: (a.width, a.height),
            actual: (b.width, b.height),
        });
    }
    if a.width == 0 || a.height == 0 {
        return Err(Error::Invalid("empty frame".into()));
    }
    let window = params.window.max(3) | 1;
    let mut pyr_a = vec![a.clone()];
    let mut pyr_b = vec![b.clone()];
    while pyr_a.len() < params.levels.max(1) {
        let last = pyr_a.last().unwrap();
        // The coarsest level must still hold a couple of windows.
        if last.width.min(last.height).div_ceil(2) < 2 * window {
            break;
        }
        let next_a = last.downsample();
        let next_b = pyr_b.last().unwrap().downsample();
        pyr_a.push(next_a);
        pyr_b.push(next_b);
    }

    let mut flow: Vec<[f32; 2]> = Vec::new();
    let mut flow_w = 0;
    let mut flow_h = 0;
    for level in (0..pyr_a.len()).rev() {
        let (la, lb) = (&pyr_a[level], &pyr_b[level]);
        flow = if flow.is_empty() {
            vec![[0.0, 0.0]; la.width * la.height]
        } else {
            upsample_flow(&flow, flow_w, flow_h, la.width, la.height)
        };
        flow_w = la.width;
        flow_h = la.height;
        refine_level(la, lb, &mut flow, window / 2, params.iterations);
    }
    FlowField::from_vec(a.width, a.height, FlowDirection::Forward, 0, flow)
}

fn upsample_flow(flow: &[[f32; 2]], w: usize, h: usize, nw: usize, nh: usize) -> Vec<[f32; 2]> {
    // Coarse pixel X sits at fine pixel 2X (see `GrayFrame::downsample`).
    let at = |x: usize, y: usize| flow[y * w + x];
    let mut out = Vec::with_capacity(nw * nh);
    for y in 0..nh {
        for x in 0..nw {
            let fx = (x as f32 * 0.5).min((w - 1) as f32);
            let fy = (y as f32 * 0.5).min((h - 1) as f32);
            let x0 = fx.floor() as usize;
            let y0 = fy.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let y1 = (y0 + 1).min(h - 1);
            let (tx, ty) = (fx - x0 as f32, fy - y0 as f32);
            let mut v = [0.0f32; 2];
            for (c, o) in v.iter_mut().enumerate() {
                let top = at(x0, y0)[c] * (1.0 - tx) + at(x1, y0)[c] * tx;
                let bottom = at(x0, y1)[c] * (1.0 - tx) + at(x1, y1)[c] * tx;
                *o = 2.0 * (top * (1.0 - ty) + bottom * ty);
            }
            out.push(v);
        }
    }
    out
}

/// Mean squared gradient (intensity units per pixel) a window needs along
/// its weaker direction before it is trusted.
const MIN_GRADIENT_ENERGY: f32 = 1e-5;

fn refine_level(a: &GrayFrame, b: &GrayFrame, flow: &mut [[f32; 2]], radius: usize, iterations: usize) {
    let (w, h) = (a.width, a.height);
    let mut ix = vec![0.0f32; w * h];
    let mut iy = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let xm = x.saturating_sub(1);
            let xp = (x + 1).min(w - 1);
            let ym = y.saturating_sub(1);
            let yp = (y + 1).min(h - 1);
            ix[y * w + x] = (a.at(xp, y) - a.at(xm, y)) / (xp - xm).max(1) as f32;
            iy[y * w + x] = (a.at(x, yp) - a.at(x, ym)) / (yp - ym).max(1) as f32;
        }
    }
    let sxx = box_sum(&ix.iter().map(|g| g * g).collect::<Vec<_>>(), w, h, radius);
    let sxy = box_sum(
        &ix.iter().zip(&iy).map(|(a, b)| a * b).collect::<Vec<_>>(),
        w,
        h,
        radius,
    );
    let syy = box_sum(&iy.iter().map(|g| g * g).collect::<Vec<_>>(), w, h, radius);
    let side = (2 * radius + 1) as f32;
    let min_eigenvalue = MIN_GRADIENT_ENERGY * side * side;

    let r = radius as isize;
    for _ in 0..iterations {
        // Every window is warped by its own center's current flow.
        let rows = par::map_indices(h, |y| {
            let mut row = Vec::with_capacity(w);
            let mut row_max = 0.0f32;
            for x in 0..w {
                let i = y * w + x;
                let (a11, a12, a22) = (sxx[i], sxy[i], syy[i]);
                let det = a11 * a22 - a12 * a12;
                let trace = a11 + a22;
                // Skip texture-less or aperture-limited windows: the smaller
                // eigenvalue of the structure tensor must carry real gradient.
                let min_eig = 0.5 * (trace - (trace * trace - 4.0 * det).max(0.0).sqrt());
                let v = flow[i];
                if det <= 1e-6 * trace * trace || min_eig < min_eigenvalue {
                    row.push(v);
                    continue;
                }
                let (mut bx, mut by) = (0.0f32, 0.0f32);
                for qy in (y as isize - r).max(0)..=(y as isize + r).min(h as isize - 1) {
                    for qx in (x as isize - r).max(0)..=(x as isize + r).min(w as isize - 1) {
                        let (qx, qy) = (qx as usize, qy as usize);
                        let q = qy * w + qx;
                        let it = b.sample_clamped(qx as f32 + v[0], qy as f32 + v[1]) - a.at(qx, qy);
                        bx += ix[q] * it;
                        by += iy[q] * it;
                    }
                }
                let du = (-(a22 * bx - a12 * by) / det).clamp(-2.0, 2.0);
                let dv = (-(a11 * by - a12 * bx) / det).clamp(-2.0, 2.0);
                row_max = row_max.max(du.abs()).max(dv.abs());
                row.push([v[0] + du, v[1] + dv]);
            }
            (row, row_max)
        });
        let mut max_step = 0.0f32;
        for (y, (row, row_max)) in rows.into_iter().enumerate() {
            flow[y * w..(y + 1) * w].copy_from_slice(&row);
            max_step = max_step.max(row_max);
        }
        if max_step < 1e-3 {
            break;
        }
    }
}

/// Separable box sum over a `(2r+1)^2` window, truncated at the borders.
fn box_sum(src: &[f32], w: usize, h: usize, r: usize) -> Vec<f32> {
    let mut tmp = vec![0.0f32; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        let mut acc: f32 = row[..=r.min(w - 1)].iter().sum();
        for x in 0..w {
            tmp[y * w + x] = acc;
            if x + r + 1 < w {
                acc += row[x + r + 1];
            }
            if x >= r {
                acc -= row[x - r];
            }
        }
    }
    let mut out = vec![0.0f32; w * h];
    for x in 0..w {
        let mut acc = 0.0f32;
        for y in 0..=r.min(h - 1) {
            acc += tmp[y * w + x];
        }
        for y in 0..h {
            out[y * w + x] = acc;
            if y + r + 1 < h {
                acc += tmp[(y + r + 1) * w + x];
            }
            if y >= r {
                acc -= tmp[(y - r) * w + x];
            }
        }
    }
    out
}
