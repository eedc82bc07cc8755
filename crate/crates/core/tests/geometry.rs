mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use segprop_core::geometry::{connected_components, fit_homography_ransac, warp_region, Homography, RansacParams};
use segprop_core::{LabelMap, UNLABELED};

type Partition = BTreeSet<(u8, Vec<(u32, u32)>)>;

/// Stack-based 4-connected flood fill from every unvisited labeled pixel.
fn flood_fill(l: &LabelMap) -> Partition {
    let (w, h) = l.dims();
    let mut seen = vec![false; w * h];
    let mut out = Partition::new();
    for start in 0..w * h {
        let c = l.as_slice()[start];
        if seen[start] || c == UNLABELED {
            continue;
        }
        let mut stack = vec![start];
        seen[start] = true;
        let mut pixels = Vec::new();
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            pixels.push((x as u32, y as u32));
            let mut next = Vec::new();
            if x > 0 {
                next.push(i - 1)
            }
            if x + 1 < w {
                next.push(i + 1)
            }
            if y > 0 {
                next.push(i - w)
            }
            if y + 1 < h {
                next.push(i + w)
            }
            for j in next {
                if !seen[j] && l.as_slice()[j] == c {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        pixels.sort_by_key(|&(x, y)| (y, x));
        out.insert((c, pixels));
    }
    out
}

fn labels_strategy() -> impl Strategy<Value = LabelMap> {
    (1u8..5, prop::collection::vec(0u8..=255, 256)).prop_map(|(classes, raw)| {
        let data = raw
            .into_iter()
            .map(|v| if v >= 250 { UNLABELED } else { v % classes })
            .collect();
        LabelMap::from_vec(16, 16, 3, data).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn components_match_flood_fill(l in labels_strategy(), min in 1usize..12) {
        let comps = connected_components(&l, min);
        let mut got = Partition::new();
        for r in comps.regions.iter().chain(&comps.residue) {
            prop_assert_eq!(r.source_frame, 3);
            got.insert((r.class, r.pixels.clone()));
        }
        prop_assert_eq!(&got, &flood_fill(&l));
        prop_assert!(comps.regions.iter().all(|r| r.len() >= min));
        prop_assert!(comps.residue.iter().all(|r| r.len() < min));
    }

    #[test]
    fn components_partition_the_labeled_pixels(l in labels_strategy()) {
        let comps = connected_components(&l, 5);
        let mut count = vec![0u32; 256];
        for r in comps.regions.iter().chain(&comps.residue) {
            for &(x, y) in &r.pixels {
                prop_assert_eq!(l.get(x as usize, y as usize), r.class);
                count[y as usize * 16 + x as usize] += 1;
                prop_assert!(x >= r.bbox.min_x && x <= r.bbox.max_x && y >= r.bbox.min_y && y <= r.bbox.max_y);
            }
        }
        for (i, &c) in count.iter().enumerate() {
            let expected = u32::from(l.as_slice()[i] != UNLABELED);
            prop_assert_eq!(c, expected, "pixel {}", i);
        }
    }

    #[test]
    fn ransac_output_is_scale_invariant(seed in any::<u64>(), s in 0.1f64..10.0) {
        let p = common::homography_problem(40, 0.2, 0.1, seed);
        let params = RansacParams { seed, ..Default::default() };
        let base = fit_homography_ransac(&p.src, &p.dst, &params).unwrap();
        let scale = |v: &[[f64; 2]]| v.iter().map(|q| [q[0] * s, q[1] * s]).collect::<Vec<_>>();
        let scaled_params = RansacParams { inlier_px: params.inlier_px * s, ..params };
        let scaled = fit_homography_ransac(&scale(&p.src), &scale(&p.dst), &scaled_params).unwrap();
        let down = Homography::from_rows([[1.0 / s, 0.0, 0.0], [0.0, 1.0 / s, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let up = Homography::from_rows([[s, 0.0, 0.0], [0.0, s, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let conjugated = down.compose(&scaled.homography.compose(&up).unwrap()).unwrap();
        for (i, &q) in p.src.iter().enumerate() {
            if !p.is_inlier[i] {
                continue;
            }
            let a = base.homography.apply(q).unwrap();
            let b = conjugated.apply(q).unwrap();
            prop_assert!((a[0] - b[0]).hypot(a[1] - b[1]) < 1e-3, "{:?} vs {:?}", a, b);
        }
    }
}

#[test]
fn ransac_recovers_homography_under_outliers() {
    for seed in 0..20 {
        let p = common::homography_problem(30, 0.3, 0.2, seed);
        let fit = fit_homography_ransac(
            &p.src,
            &p.dst,
            &RansacParams {
                seed,
                ..Default::default()
            },
        )
        .unwrap();
        let (rms, recall) = common::ransac_quality(&p, &fit.homography, &fit.inliers);
        assert!(rms < 0.5, "seed {seed}: rms {rms}");
        assert!(recall >= 0.95, "seed {seed}: recall {recall}");
    }
}

#[test]
fn ransac_rejects_too_few_points() {
    let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    assert!(fit_homography_ransac(&pts, &pts, &RansacParams::default()).is_err());
}

#[test]
fn warping_by_a_translation_shifts_and_clips() {
    let mut l = LabelMap::filled(10, 6, 0, 0);
    for y in 1..4 {
        for x in 6..9 {
            l.set(x, y, 2);
        }
    }
    let comps = connected_components(&l, 1);
    let region = comps.regions.iter().find(|r| r.class == 2).unwrap();
    let moved = warp_region(region, &Homography::translation(2.0, 1.0), 10, 6);
    let expected: Vec<(usize, usize)> = (2..5).flat_map(|y| (8..10).map(move |x| (x, y))).collect();
    assert_eq!(moved, expected);
}
