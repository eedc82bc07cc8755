use crate::error::{Error, Result};

/// Per-pixel, per-class vote accumulator.
#[derive(Clone, Debug, PartialEq)]
pub struct VoteGrid {
    width: usize,
    height: usize,
    classes: usize,
    counts: Vec<f64>,
}

impl VoteGrid {
    pub fn new(width: usize, height: usize, classes: usize) -> Self {
        Self {
            width,
            height,
            classes,
            counts: vec![0.0; width * height * classes],
        }
    }

    /// Builds a grid from a pixel-major buffer (`[y][x][class]`).
    pub fn from_vec(width: usize, height: usize, classes: usize, counts: Vec<f64>) -> Result<Self> {
        if counts.len() != width * height * classes {
            return Err(Error::Invalid(format!(
                "vote buffer has {} entries, expected {}x{}x{}",
                counts.len(),
                width,
                height,
                classes
            )));
        }
        if counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::Invalid("vote counts must be finite and non-negative".into()));
        }
        Ok(Self {
            width,
            height,
            classes,
            counts,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Adds `weight` votes for `class` at pixel `(x, y)`. Classes outside the
    /// grid (including the unlabeled sentinel) are ignored.
    #[inline]
    pub fn add(&mut self, x: usize, y: usize, class: u8, weight: f64) {
        let c = class as usize;
        if c < self.classes {
            self.counts[(y * self.width + x) * self.classes + c] += weight;
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, class: usize) -> f64 {
        self.counts[(y * self.width + x) * self.classes + class]
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let start = (y * self.width + x) * self.classes;
        &self.counts[start..start + self.classes]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.counts
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Accumulates `other * weight` into `self`.
    pub fn merge(&mut self, other: &VoteGrid, weight: f64) -> Result<()> {
        if (self.width, self.height, self.classes) != (other.width, other.height, other.classes) {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: other.dims(),
            });
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b * weight;
        }
        Ok(())
    }
}
