use nalgebra::{DMatrix, Matrix3, Vector3};

use super::components::BBox;
use crate::error::{Error, Result};

const MIN_DET: f64 = 1e-12;

/// 3x3 planar projective transform, normalized so `h33 = 1` when nonzero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Homography(Matrix3<f64>);

impl Homography {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Self(Matrix3::new(1.0, 0.0, dx, 0.0, 1.0, dy, 0.0, 0.0, 1.0))
    }

    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::FitFailed("non-finite homography".into()));
        }
        let scale = m[(2, 2)];
        let m = if scale.abs() > 1e-15 { m / scale } else { m };
        let norm = m.norm();
        if norm == 0.0 || (m.determinant() / norm.powi(3)).abs() < MIN_DET {
            return Err(Error::FitFailed("singular homography".into()));
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        Self::from_matrix(Matrix3::from_fn(|r, c| rows[r][c]))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn to_rows(&self) -> [[f64; 3]; 3] {
        let m = &self.0;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }

    /// Projects a point; `None` when it maps to infinity.
    #[inline]
    pub fn apply(&self, p: [f64; 2]) -> Option<[f64; 2]> {
        let m = &self.0;
        let w = m[(2, 0)] * p[0] + m[(2, 1)] * p[1] + m[(2, 2)];
        if w.abs() < 1e-12 {
            return None;
        }
        let x = (m[(0, 0)] * p[0] + m[(0, 1)] * p[1] + m[(0, 2)]) / w;
        let y = (m[(1, 0)] * p[0] + m[(1, 1)] * p[1] + m[(1, 2)]) / w;
        (x.is_finite() && y.is_finite()).then_some([x, y])
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self
            .0
            .try_inverse()
            .ok_or_else(|| Error::FitFailed("homography not invertible".into()))?;
        Self::from_matrix(inv)
    }

    /// `self` after `first`: `x -> self(first(x))`.
    pub fn compose(&self, first: &Homography) -> Result<Self> {
        Self::from_matrix(self.0 * first.0)
    }

    /// Frobenius distance between the normalized matrices.
    pub fn distance(&self, other: &Homography) -> f64 {
        (self.0 - other.0).norm()
    }

    /// Transform at fraction `t` of the way from identity (`t = 0`) to
    /// `self` (`t = 1`): the corners of `bbox` (padded by half a pixel) are
    /// moved linearly towards their images under `self`, and the exact
    /// homography through the four corner pairs is returned.
    pub fn interpolate(&self, bbox: &BBox, t: f64) -> Result<Self> {
        let corners = [
            [bbox.min_x as f64 - 0.5, bbox.min_y as f64 - 0.5],
            [bbox.max_x as f64 + 0.5, bbox.min_y as f64 - 0.5],
            [bbox.max_x as f64 + 0.5, bbox.max_y as f64 + 0.5],
            [bbox.min_x as f64 - 0.5, bbox.max_y as f64 + 0.5],
        ];
        let mut moved = [[0.0; 2]; 4];
        for (c, m) in corners.iter().zip(moved.iter_mut()) {
            let image = self
                .apply(*c)
                .ok_or_else(|| Error::FitFailed("bounding-box corner maps to infinity".into()))?;
            *m = [c[0] + t * (image[0] - c[0]), c[1] + t * (image[1] - c[1])];
        }
        fit_homography_dlt(&corners, &moved)
    }
}

/// Hartley normalization: translate to the centroid and scale the mean
/// distance to sqrt(2).
fn normalization(points: &[[f64; 2]]) -> Option<Matrix3<f64>> {
    let n = points.len() as f64;
    let (mut cx, mut cy) = (0.0, 0.0);
    for p in points {
        cx += p[0];
        cy += p[1];
    }
    cx /= n;
    cy /= n;
    let mean_dist = points
        .iter()
        .map(|p| ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    if mean_dist.is_nan() || mean_dist <= 1e-12 {
        return None;
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Some(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

#[inline]
fn transform(t: &Matrix3<f64>, p: [f64; 2]) -> [f64; 2] {
    let v = t * Vector3::new(p[0], p[1], 1.0);
    [v[0] / v[2], v[1] / v[2]]
}

/// Normalized direct linear transform; least squares for more than four
/// correspondences, exact for four in general position.
pub fn fit_homography_dlt(src: &[[f64; 2]], dst: &[[f64; 2]]) -> Result<Homography> {
    let n = src.len();
    if n < 4 || dst.len() != n {
        return Err(Error::FitFailed(format!("need at least 4 correspondences, got {n}")));
    }
    let ts = normalization(src).ok_or_else(|| Error::FitFailed("coincident source points".into()))?;
    let td = normalization(dst).ok_or_else(|| Error::FitFailed("coincident target points".into()))?;

    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (s, d)) in src.iter().zip(dst).enumerate() {
        let [x, y] = transform(&ts, *s);
        let [u, v] = transform(&td, *d);
        let (r0, r1) = (2 * i, 2 * i + 1);
        a[(r0, 0)] = -x;
        a[(r0, 1)] = -y;
        a[(r0, 2)] = -1.0;
        a[(r0, 6)] = u * x;
        a[(r0, 7)] = u * y;
        a[(r0, 8)] = u;
        a[(r1, 3)] = -x;
        a[(r1, 4)] = -y;
        a[(r1, 5)] = -1.0;
        a[(r1, 6)] = v * x;
        a[(r1, 7)] = v * y;
        a[(r1, 8)] = v;
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::FitFailed("svd did not converge".into()))?;
    let (min_idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let h = v_t.row(min_idx);
    let hn = Matrix3::from_fn(|r, c| h[3 * r + c]);
    let td_inv = td
        .try_inverse()
        .ok_or_else(|| Error::FitFailed("normalization not invertible".into()))?;
    Homography::from_matrix(td_inv * hn * ts)
}
