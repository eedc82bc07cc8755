//! Polygon annotations and their rasterization into label maps.
//!
//! Polygons are painted in ascending `z` (higher on top) with the even-odd
//! rule. Pixel `(x, y)` is sampled at its center `(x + 0.5, y + 0.5)`, so a
//! rectangle `[0, w] x [0, h]` covers a `w x h` frame exactly.

use serde::{Deserialize, Serialize};

use segprop_core::model::NUM_CLASSES;
use segprop_core::LabelMap;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub class: u8,
    pub z: i64,
    /// Vertices in image pixel coordinates, in drawing order.
    pub points: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub frame: usize,
    pub revision: u64,
    pub polygons: Vec<Polygon>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum AnnotationError {
    #[error("polygon {index} has {count} vertices, at least 3 are required")]
    TooFewVertices { index: usize, count: usize },
    #[error("polygon {index} has a non-finite vertex")]
    NonFinite { index: usize },
    #[error("polygon {index} has unknown class {class}")]
    UnknownClass { index: usize, class: u8 },
    #[error("polygons {first} and {second} share z = {z}")]
    DuplicateZ { first: usize, second: usize, z: i64 },
}

impl Annotation {
    pub fn validate(&self) -> Result<(), AnnotationError> {
        let mut seen = std::collections::HashMap::new();
        for (index, p) in self.polygons.iter().enumerate() {
            if p.points.len() < 3 {
                return Err(AnnotationError::TooFewVertices {
                    index,
                    count: p.points.len(),
                });
            }
            if p.points.iter().flatten().any(|v| !v.is_finite()) {
                return Err(AnnotationError::NonFinite { index });
            }
            if p.class as usize >= NUM_CLASSES {
                return Err(AnnotationError::UnknownClass { index, class: p.class });
            }
            if let Some(first) = seen.insert(p.z, index) {
                return Err(AnnotationError::DuplicateZ {
                    first,
                    second: index,
                    z: p.z,
                });
            }
        }
        Ok(())
    }

    /// Moves polygon `index` below every other polygon. Calling it again on
    /// the same polygon changes nothing.
    pub fn send_to_back(&mut self, index: usize) {
        let Some(min_other) = self
            .polygons
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != index)
            .map(|(_, p)| p.z)
            .min()
        else {
            return;
        };
        if let Some(p) = self.polygons.get_mut(index) {
            if p.z >= min_other {
                p.z = min_other - 1;
            }
        }
    }

    /// Next free z above every polygon.
    pub fn next_z(&self) -> i64 {
        self.polygons.iter().map(|p| p.z + 1).max().unwrap_or(0)
    }
}

/// Label map from the annotation plus the number of pixels no polygon
/// covers (left as `UNLABELED`).
pub fn rasterize_partial(annotation: &Annotation, width: usize, height: usize) -> (LabelMap, usize) {
    let mut label = LabelMap::unlabeled(width, height, annotation.frame);
    let mut order: Vec<&Polygon> = annotation.polygons.iter().collect();
    order.sort_by_key(|p| p.z);
    let mut crossings = Vec::new();
    for poly in order {
        let pts = &poly.points;
        let n = pts.len();
        for y in 0..height {
            let yc = y as f64 + 0.5;
            crossings.clear();
            for i in 0..n {
                let (a, b) = (pts[i], pts[(i + n - 1) % n]);
                if (a[1] > yc) != (b[1] > yc) {
                    crossings.push((b[0] - a[0]) * (yc - a[1]) / (b[1] - a[1]) + a[0]);
                }
            }
            crossings.sort_by(f64::total_cmp);
            for span in crossings.chunks_exact(2) {
                let (lo, hi) = (span[0], span[1]);
                let start = (lo - 0.5).floor().max(0.0) as usize;
                for x in start..width {
                    let xc = x as f64 + 0.5;
                    if xc >= hi {
                        break;
                    }
                    if xc >= lo {
                        label.set(x, y, poly.class);
                    }
                }
            }
        }
    }
    let uncovered = label.unlabeled_count();
    (label, uncovered)
}

/// Dense label map, or the count of uncovered pixels.
pub fn rasterize_polygons(annotation: &Annotation, width: usize, height: usize) -> Result<LabelMap, usize> {
    match rasterize_partial(annotation, width, height) {
        (label, 0) => Ok(label),
        (_, uncovered) => Err(uncovered),
    }
}
