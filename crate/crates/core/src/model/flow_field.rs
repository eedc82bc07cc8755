use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowDirection {
    /// Displacement from frame t to frame t+1.
    Forward,
    /// Displacement from frame t to frame t-1.
    Backward,
}

impl FlowDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            FlowDirection::Forward => "fwd",
            FlowDirection::Backward => "bwd",
        }
    }

    /// Frame reached by one step of this flow from `frame`.
    pub fn target(self, frame: usize) -> Option<usize> {
        match self {
            FlowDirection::Forward => frame.checked_add(1),
            FlowDirection::Backward => frame.checked_sub(1),
        }
    }
}

/// Dense per-pixel displacement between adjacent frames in one direction.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    pub direction: FlowDirection,
    pub source_frame: usize,
    vectors: Vec<[f32; 2]>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize, direction: FlowDirection, source_frame: usize) -> Self {
        Self {
            width,
            height,
            direction,
            source_frame,
            vectors: vec![[0.0, 0.0]; width * height],
        }
    }

    pub fn from_vec(
        width: usize,
        height: usize,
        direction: FlowDirection,
        source_frame: usize,
        vectors: Vec<[f32; 2]>,
    ) -> Result<Self> {
        if vectors.len() != width * height {
            return Err(Error::Invalid(format!(
                "flow buffer has {} vectors, expected {}x{}",
                vectors.len(),
                width,
                height
            )));
        }
        if let Some(i) = vectors.iter().position(|v| !v[0].is_finite() || !v[1].is_finite()) {
            return Err(Error::Invalid(format!(
                "non-finite flow vector at pixel ({}, {})",
                i % width.max(1),
                i / width.max(1)
            )));
        }
        Ok(Self {
            width,
            height,
            direction,
            source_frame,
            vectors,
        })
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

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f32; 2] {
        self.vectors[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: [f32; 2]) {
        self.vectors[y * self.width + x] = v;
    }

    pub fn vectors(&self) -> &[[f32; 2]] {
        &self.vectors
    }

    pub fn vectors_mut(&mut self) -> &mut [[f32; 2]] {
        &mut self.vectors
    }

    /// Bilinear sample at a subpixel position inside `[0, w-1] x [0, h-1]`.
    /// Returns `None` outside that rectangle.
    #[inline]
    pub fn sample(&self, x: f64, y: f64) -> Option<[f64; 2]> {
        if !(x >= 0.0 && y >= 0.0) {
            return None;
        }
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        if x > max_x || y > max_y {
            return None;
        }
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let w = self.width;
        let v00 = self.vectors[y0 * w + x0];
        let v10 = self.vectors[y0 * w + x1];
        let v01 = self.vectors[y1 * w + x0];
        let v11 = self.vectors[y1 * w + x1];
        let mut out = [0.0; 2];
        for (c, o) in out.iter_mut().enumerate() {
            let top = v00[c] as f64 * (1.0 - fx) + v10[c] as f64 * fx;
            let bottom = v01[c] as f64 * (1.0 - fx) + v11[c] as f64 * fx;
            *o = top * (1.0 - fy) + bottom * fy;
        }
        Some(out)
    }

    pub fn max_magnitude(&self) -> f64 {
        self.vectors
            .iter()
            .map(|v| ((v[0] as f64).powi(2) + (v[1] as f64).powi(2)).sqrt())
            .fold(0.0, f64::max)
    }
}
