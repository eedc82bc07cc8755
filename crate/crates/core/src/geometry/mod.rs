//! Per-class connected regions and robust homography fitting / warping.

mod components;
mod homography;
mod ransac;

pub use components::{connected_components, BBox, Components, ConnectedRegion, DEFAULT_MIN_REGION_SIZE};
pub use homography::{fit_homography_dlt, Homography};
pub use ransac::{fit_homography_ransac, HomographyFit, RansacParams};

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(p: [f64; 2], polygon: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = polygon.len();
    for i in 0..n {
        let (a, b) = (polygon[i], polygon[(i + n - 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Maps each region pixel through `h`, rounds to the nearest pixel and drops
/// targets outside `width x height`. The result is sorted and deduplicated.
pub fn warp_region(region: &ConnectedRegion, h: &Homography, width: usize, height: usize) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = region
        .pixels
        .iter()
        .filter_map(|&(x, y)| {
            let [px, py] = h.apply([x as f64, y as f64])?;
            let (rx, ry) = (px.round(), py.round());
            (rx >= 0.0 && ry >= 0.0 && rx < width as f64 && ry < height as f64).then_some((rx as usize, ry as usize))
        })
        .collect();
    out.sort_unstable_by_key(|&(x, y)| (y, x));
    out.dedup();
    out
}
