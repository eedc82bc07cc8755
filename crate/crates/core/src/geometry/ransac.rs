use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::homography::{fit_homography_dlt, Homography};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RansacParams {
    /// Maximum reprojection error (pixels) for a correspondence to count as
    /// an inlier.
    pub inlier_px: f64,
    pub max_iters: usize,
    /// Probability of drawing at least one outlier-free sample, used for the
    /// adaptive iteration bound.
    pub confidence: f64,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            inlier_px: 3.0,
            max_iters: 2000,
            confidence: 0.995,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HomographyFit {
    pub homography: Homography,
    pub inliers: Vec<bool>,
    pub iterations: usize,
}

impl HomographyFit {
    pub fn inlier_count(&self) -> usize {
        self.inliers.iter().filter(|&&b| b).count()
    }
}

#[inline]
fn reprojection_sq(h: &Homography, a: [f64; 2], b: [f64; 2]) -> f64 {
    match h.apply(a) {
        Some(p) => (p[0] - b[0]).powi(2) + (p[1] - b[1]).powi(2),
        None => f64::INFINITY,
    }
}

fn collinear(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> bool {
    let area = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
    let scale = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).max((r[0] - p[0]).powi(2) + (r[1] - p[1]).powi(2));
    area.abs() <= 1e-6 * scale.max(1e-12)
}

fn degenerate(points: &[[f64; 2]], idx: &[usize]) -> bool {
    for i in 0..idx.len() {
        for j in i + 1..idx.len() {
            for k in j + 1..idx.len() {
                if collinear(points[idx[i]], points[idx[j]], points[idx[k]]) {
                    return true;
                }
            }
        }
    }
    false
}

/// Classifies correspondences against `h`; returns the mask, the inlier
/// count and the summed squared error over inliers.
fn score(h: &Homography, a: &[[f64; 2]], b: &[[f64; 2]], thresh_sq: f64) -> (Vec<bool>, usize, f64) {
    let mut mask = Vec::with_capacity(a.len());
    let mut count = 0;
    let mut err = 0.0;
    for (p, q) in a.iter().zip(b) {
        let e = reprojection_sq(h, *p, *q);
        let inlier = e <= thresh_sq;
        if inlier {
            count += 1;
            err += e;
        }
        mask.push(inlier);
    }
    (mask, count, err)
}

/// RANSAC over 4-point DLT hypotheses with an adaptive iteration bound,
/// followed by least-squares refits on the consensus set.
pub fn fit_homography_ransac(pts_a: &[[f64; 2]], pts_b: &[[f64; 2]], params: &RansacParams) -> Result<HomographyFit> {
    let n = pts_a.len();
    if pts_b.len() != n {
        return Err(Error::Invalid(format!(
            "{} source points vs {} target points",
            n,
            pts_b.len()
        )));
    }
    if n < 4 {
        return Err(Error::FitFailed(format!("need at least 4 correspondences, got {n}")));
    }
    let thresh_sq = params.inlier_px * params.inlier_px;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(Homography, usize, f64)> = None;
    let mut bound = params.max_iters;
    let mut iterations = 0;

    while iterations < bound.min(params.max_iters) {
        iterations += 1;
        let idx = sample(&mut rng, n, 4).into_vec();
        if degenerate(pts_a, &idx) || degenerate(pts_b, &idx) {
            continue;
        }
        let src: Vec<_> = idx.iter().map(|&i| pts_a[i]).collect();
        let dst: Vec<_> = idx.iter().map(|&i| pts_b[i]).collect();
        let Ok(h) = fit_homography_dlt(&src, &dst) else {
            continue;
        };
        let (_, count, err) = score(&h, pts_a, pts_b, thresh_sq);
        let better = match &best {
            None => count >= 4,
            Some((_, c, e)) => count > *c || (count == *c && err < *e),
        };
        if better {
            best = Some((h, count, err));
            let ratio = count as f64 / n as f64;
            let p_good = ratio.powi(4);
            bound = if p_good >= 1.0 - 1e-12 {
                iterations
            } else if p_good <= 0.0 {
                params.max_iters
            } else {
                let needed = (1.0 - params.confidence).ln() / (1.0 - p_good).ln();
                (needed.ceil() as usize).max(1)
            };
        }
    }

    let (mut h, _, _) =
        best.ok_or_else(|| Error::FitFailed(format!("no non-degenerate consensus after {iterations} iterations")))?;
    let (mut mask, mut count, _) = score(&h, pts_a, pts_b, thresh_sq);
    for _ in 0..4 {
        let src: Vec<_> = (0..n).filter(|&i| mask[i]).map(|i| pts_a[i]).collect();
        let dst: Vec<_> = (0..n).filter(|&i| mask[i]).map(|i| pts_b[i]).collect();
        let Ok(refit) = fit_homography_dlt(&src, &dst) else {
            break;
        };
        let (new_mask, new_count, _) = score(&refit, pts_a, pts_b, thresh_sq);
        if new_count < count || new_count < 4 {
            break;
        }
        let converged = new_mask == mask;
        h = refit;
        mask = new_mask;
        count = new_count;
        if converged {
            break;
        }
    }
    Ok(HomographyFit {
        homography: h,
        inliers: mask,
        iterations,
    })
}
