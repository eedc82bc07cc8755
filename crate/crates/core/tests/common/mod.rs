//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segprop_core::flow::FlowStore;
use segprop_core::{FlowDirection, FlowField, LabelMap};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Constant forward flow `v` between every adjacent pair of `n` frames, with
/// the exact backward flow.
pub fn translation_flows(w: usize, h: usize, n: usize, v: [f32; 2]) -> FlowStore {
    let mut store = FlowStore::new();
    for t in 0..n.saturating_sub(1) {
        let mut f = FlowField::zeros(w, h, FlowDirection::Forward, t);
        f.vectors_mut().fill(v);
        store.insert(f);
        let mut b = FlowField::zeros(w, h, FlowDirection::Backward, t + 1);
        b.vectors_mut().fill([-v[0], -v[1]]);
        store.insert(b);
    }
    store
}

struct Wave {
    amp: [f64; 2],
    freq: [f64; 2],
    phase: f64,
}

impl Wave {
    fn at(&self, x: f64, y: f64) -> [f64; 2] {
        let s = (self.freq[0] * x + self.freq[1] * y + self.phase).sin();
        [self.amp[0] * s, self.amp[1] * s]
    }
}

/// Smooth random flows over `n` frames. Each backward field is a one-step
/// fixed-point inverse of its forward field plus uniform noise of up to
/// `noise` pixels, so some pixels fail a forward-backward check.
pub fn smooth_flows(w: usize, h: usize, n: usize, amp: f64, noise: f64, seed: u64) -> FlowStore {
    let mut r = rng(seed);
    let mut store = FlowStore::new();
    for t in 0..n - 1 {
        let drift = [r.random_range(-amp..amp), r.random_range(-amp..amp)];
        let waves: Vec<Wave> = (0..3)
            .map(|_| Wave {
                amp: [r.random_range(-amp..amp) * 0.5, r.random_range(-amp..amp) * 0.5],
                freq: [r.random_range(-0.4..0.4), r.random_range(-0.4..0.4)],
                phase: r.random_range(0.0..6.3),
            })
            .collect();
        let field = |x: f64, y: f64| {
            waves.iter().fold(drift, |acc, wv| {
                let v = wv.at(x, y);
                [acc[0] + v[0], acc[1] + v[1]]
            })
        };
        let mut f = FlowField::zeros(w, h, FlowDirection::Forward, t);
        let mut b = FlowField::zeros(w, h, FlowDirection::Backward, t + 1);
        for y in 0..h {
            for x in 0..w {
                let (xf, yf) = (x as f64, y as f64);
                let v = field(xf, yf);
                f.set(x, y, [v[0] as f32, v[1] as f32]);
                let u = field(xf - v[0], yf - v[1]);
                let e = [r.random_range(-noise..=noise), r.random_range(-noise..=noise)];
                b.set(x, y, [(-u[0] + e[0]) as f32, (-u[1] + e[1]) as f32]);
            }
        }
        store.insert(f);
        store.insert(b);
    }
    store
}

/// Uniformly random labels from `0..classes`.
pub fn random_labels(w: usize, h: usize, frame: usize, classes: u8, r: &mut impl Rng) -> LabelMap {
    let data = (0..w * h).map(|_| r.random_range(0..classes)).collect();
    LabelMap::from_vec(w, h, frame, data).unwrap()
}

/// Random labels made of axis-aligned blobs, so regions are larger than a
/// pixel.
pub fn blob_labels(w: usize, h: usize, frame: usize, classes: u8, blobs: usize, r: &mut impl Rng) -> LabelMap {
    let mut l = LabelMap::filled(w, h, frame, 0);
    for _ in 0..blobs {
        let c = r.random_range(0..classes);
        let (x0, y0) = (r.random_range(0..w), r.random_range(0..h));
        let (x1, y1) = (r.random_range(x0..=w), r.random_range(y0..=h));
        for y in y0..y1 {
            for x in x0..x1 {
                l.set(x, y, c);
            }
        }
    }
    l
}

/// Correspondences under a random near-planar homography.
pub struct HomographyProblem {
    pub truth: segprop_core::geometry::Homography,
    pub src: Vec<[f64; 2]>,
    pub dst: Vec<[f64; 2]>,
    pub is_inlier: Vec<bool>,
}

/// `n` points in a 100x100 square; a fraction `outliers` of the targets are
/// replaced by uniform points, the rest get uniform jitter of
/// up to `noise` pixels.
pub fn homography_problem(n: usize, outliers: f64, noise: f64, seed: u64) -> HomographyProblem {
    use segprop_core::geometry::Homography;
    let mut r = rng(seed);
    let truth = loop {
        let a = r.random_range(-0.3f64..0.3);
        let s = r.random_range(0.8..1.2);
        let rows = [
            [
                s * a.cos() + r.random_range(-0.1..0.1),
                -s * a.sin() + r.random_range(-0.1..0.1),
                r.random_range(-20.0..20.0),
            ],
            [
                s * a.sin() + r.random_range(-0.1..0.1),
                s * a.cos() + r.random_range(-0.1..0.1),
                r.random_range(-20.0..20.0),
            ],
            [r.random_range(-1e-3..1e-3), r.random_range(-1e-3..1e-3), 1.0],
        ];
        if let Ok(h) = Homography::from_rows(rows) {
            break h;
        }
    };
    let bad = (outliers * n as f64).round() as usize;
    let mut src = Vec::with_capacity(n);
    let mut dst = Vec::with_capacity(n);
    let mut is_inlier = Vec::with_capacity(n);
    for i in 0..n {
        let p = [r.random_range(0.0..100.0), r.random_range(0.0..100.0)];
        src.push(p);
        if i < bad {
            dst.push([r.random_range(-20.0..120.0), r.random_range(-20.0..120.0)]);
            is_inlier.push(false);
        } else {
            let q = truth.apply(p).unwrap();
            dst.push([
                q[0] + r.random_range(-noise..=noise),
                q[1] + r.random_range(-noise..=noise),
            ]);
            is_inlier.push(true);
        }
    }
    HomographyProblem {
        truth,
        src,
        dst,
        is_inlier,
    }
}

/// Root-mean-square reprojection error of `h` over the true inliers, and
/// the fraction of true inliers that `mask` marks as inliers.
pub fn ransac_quality(p: &HomographyProblem, h: &segprop_core::geometry::Homography, mask: &[bool]) -> (f64, f64) {
    let mut sq = 0.0;
    let mut n = 0;
    let mut found = 0;
    for ((&src, &inlier), &kept) in p.src.iter().zip(&p.is_inlier).zip(mask) {
        if !inlier {
            continue;
        }
        let q = h.apply(src).unwrap_or([f64::INFINITY; 2]);
        let t = p.truth.apply(src).unwrap();
        sq += (q[0] - t[0]).powi(2) + (q[1] - t[1]).powi(2);
        n += 1;
        found += kept as usize;
    }
    ((sq / n as f64).sqrt(), found as f64 / n as f64)
}

/// Random multigraph on `nodes` nodes with about `density * nodes` links,
/// a random assignment, and each node pinned with probability `pin`.
pub fn random_graph(
    nodes: usize,
    classes: usize,
    density: f64,
    pin: f64,
    r: &mut impl Rng,
) -> (
    segprop_core::graphlab::LabelGraph,
    segprop_core::graphlab::IndicatorAssignment,
) {
    use segprop_core::graphlab::{IndicatorAssignment, LabelGraph};
    let mut g = LabelGraph::new(nodes, classes);
    let links = (density * nodes as f64).round() as usize;
    for _ in 0..links {
        let a = r.random_range(0..nodes);
        let b = r.random_range(0..nodes);
        if a != b {
            g.add_edge(a, b).unwrap();
        }
    }
    let labels: Vec<u8> = (0..nodes).map(|_| r.random_range(0..classes as u8)).collect();
    for (i, &l) in labels.iter().enumerate() {
        if r.random_bool(pin) {
            g.pin(i, l).unwrap();
        }
    }
    (g, IndicatorAssignment::from_labels(labels, classes).unwrap())
}
