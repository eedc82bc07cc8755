use crate::error::{Error, Result};

/// Sentinel for pixels without a class. Never a valid class id.
pub const UNLABELED: u8 = 255;

/// Per-pixel class assignment for one frame, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    pub frame_index: usize,
    data: Vec<u8>,
}

impl LabelMap {
    pub fn filled(width: usize, height: usize, frame_index: usize, class: u8) -> Self {
        Self {
            width,
            height,
            frame_index,
            data: vec![class; width * height],
        }
    }

    pub fn unlabeled(width: usize, height: usize, frame_index: usize) -> Self {
        Self::filled(width, height, frame_index, UNLABELED)
    }

    pub fn from_vec(width: usize, height: usize, frame_index: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Invalid(format!(
                "label buffer has {} entries, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            frame_index,
            data,
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
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, class: u8) {
        self.data[y * self.width + x] = class;
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.data
    }

    pub fn unlabeled_count(&self) -> usize {
        self.data.iter().filter(|&&c| c == UNLABELED).count()
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.unlabeled_count() == 0
    }

    /// Largest class id present plus one (0 for an all-unlabeled map).
    pub fn class_span(&self) -> usize {
        self.data
            .iter()
            .filter(|&&c| c != UNLABELED)
            .max()
            .map_or(0, |&c| c as usize + 1)
    }

    pub(crate) fn check_same_dims(&self, other: &LabelMap) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: other.dims(),
            });
        }
        Ok(())
    }
}
