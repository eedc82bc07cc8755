//! The scanline rasterizer against a per-pixel point-in-polygon test.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use segprop_core::UNLABELED;
use segprop_service::{rasterize_partial, rasterize_polygons, Annotation, Polygon};

/// Classic crossing-number test.
fn pnpoly(pts: &[[f64; 2]], x: f64, y: f64) -> bool {
    let mut inside = false;
    let mut j = pts.len() - 1;
    for i in 0..pts.len() {
        let (a, b) = (pts[i], pts[j]);
        if (a[1] > y) != (b[1] > y) && x < (b[0] - a[0]) * (y - a[1]) / (b[1] - a[1]) + a[0] {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn brute_force(ann: &Annotation, w: usize, h: usize) -> Vec<u8> {
    let mut order: Vec<&Polygon> = ann.polygons.iter().collect();
    order.sort_by_key(|p| std::cmp::Reverse(p.z));
    let mut out = vec![UNLABELED; w * h];
    for y in 0..h {
        for x in 0..w {
            let (xc, yc) = (x as f64 + 0.5, y as f64 + 0.5);
            if let Some(p) = order.iter().find(|p| pnpoly(&p.points, xc, yc)) {
                out[y * w + x] = p.class;
            }
        }
    }
    out
}

fn random_scene(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Annotation {
    let count = rng.random_range(1..6);
    let mut zs: Vec<i64> = (0..count as i64).map(|z| z * 3 - 4).collect();
    for i in (1..zs.len()).rev() {
        zs.swap(i, rng.random_range(0..=i));
    }
    let polygons = zs
        .into_iter()
        .map(|z| {
            let n = rng.random_range(3..9);
            // Half of the scenes snap vertices to the half-pixel grid, which
            // puts edges exactly on sample rows and columns.
            let snap = rng.random_bool(0.5);
            let points = (0..n)
                .map(|_| {
                    let mut p = [
                        rng.random_range(-3.0..w as f64 + 3.0),
                        rng.random_range(-3.0..h as f64 + 3.0),
                    ];
                    if snap {
                        p = p.map(|v| (v * 2.0).round() / 2.0);
                    }
                    p
                })
                .collect();
            Polygon {
                class: rng.random_range(0..12),
                z,
                points,
            }
        })
        .collect();
    Annotation {
        frame: 0,
        revision: 0,
        polygons,
    }
}

#[test]
fn fixture_scenes_match_point_in_polygon() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (rng.random_range(8..40), rng.random_range(8..40));
        let ann = random_scene(&mut rng, w, h);
        let (label, uncovered) = rasterize_partial(&ann, w, h);
        let expected = brute_force(&ann, w, h);
        assert_eq!(label.as_slice(), &expected[..], "scene {seed}");
        assert_eq!(uncovered, expected.iter().filter(|&&c| c == UNLABELED).count());
    }
}

proptest! {
    #[test]
    fn random_polygons_match_point_in_polygon(seed in any::<u64>(), w in 1usize..24, h in 1usize..24) {
        let ann = random_scene(&mut ChaCha8Rng::seed_from_u64(seed), w, h);
        let (label, _) = rasterize_partial(&ann, w, h);
        prop_assert_eq!(label.as_slice(), &brute_force(&ann, w, h)[..]);
    }

    #[test]
    fn send_to_back_only_reorders(seed in any::<u64>(), pick in 0usize..5) {
        let mut ann = random_scene(&mut ChaCha8Rng::seed_from_u64(seed), 16, 16);
        let index = pick % ann.polygons.len();
        ann.send_to_back(index);
        prop_assert!(ann.validate().is_ok());
        let z = ann.polygons[index].z;
        prop_assert!(ann.polygons.iter().enumerate().all(|(i, p)| i == index || p.z > z));
        let once = ann.clone();
        ann.send_to_back(index);
        prop_assert_eq!(&ann, &once);
    }
}

/// A loose land polygon drawn over a house, then sent to back, keeps the
/// house outline and fills everything else.
#[test]
fn send_to_back_tiles_without_gaps() {
    let (w, h) = (40, 30);
    let house = vec![[12.0, 8.0], [26.0, 8.0], [26.0, 20.0], [19.0, 24.5], [12.0, 20.0]];
    let mut ann = Annotation {
        frame: 0,
        revision: 0,
        polygons: vec![
            Polygon {
                class: 2,
                z: 0,
                points: house.clone(),
            },
            Polygon {
                class: 0,
                z: 1,
                points: vec![[-2.0, -1.0], [43.0, -3.0], [41.0, 33.0], [-1.5, 31.0]],
            },
        ],
    };
    let before = rasterize_polygons(&ann, w, h).unwrap();
    assert!(before.as_slice().iter().all(|&c| c == 0));

    ann.send_to_back(1);
    let label = rasterize_polygons(&ann, w, h).unwrap();
    for y in 0..h {
        for x in 0..w {
            let inside = pnpoly(&house, x as f64 + 0.5, y as f64 + 0.5);
            assert_eq!(label.get(x, y), if inside { 2 } else { 0 }, "({x}, {y})");
        }
    }
}
