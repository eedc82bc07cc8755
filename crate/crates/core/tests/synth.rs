use std::path::PathBuf;

use segprop_core::flow::{chain_correspondence, ChainParams};
use segprop_core::geometry::{fit_homography_dlt, point_in_polygon};
use segprop_core::synth::{render_scene, Motion, SceneSpec, SpriteSpec};

fn fixture(name: &str) -> SceneSpec {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name);
    SceneSpec::load(&path).unwrap()
}

#[test]
fn static_scene_has_zero_flow_and_fixed_labels() {
    let scene = render_scene(&SceneSpec::static_scene(40, 30, 5, 1)).unwrap();
    assert!(scene
        .forward
        .iter()
        .chain(&scene.backward)
        .all(|f| f.max_magnitude() == 0.0));
    assert!(scene.labels.windows(2).all(|p| p[0].as_slice() == p[1].as_slice()));
    assert!(scene.frames.windows(2).all(|p| p[0] == p[1]));
}

#[test]
fn translating_sprite_flow_is_exact() {
    let spec = SceneSpec {
        width: 30,
        height: 20,
        frames: 4,
        background_class: 0,
        background_motion: Motion::Static,
        background_seed: 2,
        sprites: vec![SpriteSpec {
            class: 5,
            polygon: vec![[5.0, 5.0], [12.0, 5.0], [12.0, 12.0], [5.0, 12.0]],
            motion: Motion::translation([1.0, 0.0]),
            texture_seed: 9,
        }],
    };
    let scene = render_scene(&spec).unwrap();
    for t in 0..3 {
        let (f, now, next) = (&scene.forward[t], &scene.labels[t], &scene.labels[t + 1]);
        for y in 0..20 {
            for x in 0..30 {
                let expected = if now.get(x, y) == 5 { [1.0, 0.0] } else { [0.0, 0.0] };
                assert_eq!(f.get(x, y), expected, "frame {t} ({x},{y})");
                if now.get(x, y) == 5 {
                    assert_eq!(next.get(x + 1, y), 5);
                }
            }
        }
    }
}

#[test]
fn crossing_sprites_follow_the_topmost_layer() {
    let spec = fixture("crossing.json");
    let scene = render_scene(&spec).unwrap();
    let layer_motion = |owner: usize| {
        if owner == 0 {
            &spec.background_motion
        } else {
            &spec.sprites[owner - 1].motion
        }
    };
    for t in 0..spec.frames - 1 {
        for y in 0..spec.height {
            for x in 0..spec.width {
                let p = [x as f64, y as f64];
                // Topmost layer whose reference polygon contains the pulled-back point.
                let owner = (1..=spec.sprites.len())
                    .rev()
                    .find(|&s| {
                        let r = spec.sprites[s - 1]
                            .motion
                            .at(t)
                            .unwrap()
                            .inverse()
                            .unwrap()
                            .apply(p)
                            .unwrap();
                        point_in_polygon(r, &spec.sprites[s - 1].polygon)
                    })
                    .unwrap_or(0);
                let m = layer_motion(owner);
                let r = m.at(t).unwrap().inverse().unwrap().apply(p).unwrap();
                let q = m.at(t + 1).unwrap().apply(r).unwrap();
                let v = scene.forward[t].get(x, y);
                assert!(
                    (v[0] as f64 - (q[0] - x as f64)).abs() < 1e-5 && (v[1] as f64 - (q[1] - y as f64)).abs() < 1e-5,
                    "frame {t} ({x},{y}) owner {owner}: {v:?}"
                );
                let class = if owner == 0 {
                    spec.background_class
                } else {
                    spec.sprites[owner - 1].class
                };
                assert_eq!(scene.labels[t].get(x, y), class);
            }
        }
    }
}

#[test]
fn chained_flow_carries_visible_pixels_to_their_final_position() {
    let spec = fixture("crossing.json");
    let scene = render_scene(&spec).unwrap();
    let last = spec.frames - 1;
    let flows = scene.flow_store();
    let map = chain_correspondence(&flows, 0, last, &ChainParams::default()).unwrap();
    let visible = scene.visibility_mask(0, last);
    let mut checked = 0;
    for y in 0..spec.height {
        for x in 0..spec.width {
            if !visible[y * spec.width + x] {
                continue;
            }
            let (qx, qy) = map.landing_pixel(x, y).expect("visible pixels chain validly");
            assert_eq!(scene.labels[last].get(qx, qy), scene.labels[0].get(x, y), "({x},{y})");
            checked += 1;
        }
    }
    assert!(checked > spec.width * spec.height / 2);
}

#[test]
fn recovered_sprite_homography_matches_the_spec() {
    let spec = fixture("planar_sprite.json");
    let scene = render_scene(&spec).unwrap();
    let motion = &spec.sprites[0].motion;
    for t in 0..spec.frames - 1 {
        let (mut src, mut dst) = (Vec::new(), Vec::new());
        for y in 0..spec.height {
            for x in 0..spec.width {
                if scene.owners[t][y * spec.width + x] == 1 {
                    let v = scene.forward[t].get(x, y);
                    src.push([x as f64, y as f64]);
                    dst.push([x as f64 + v[0] as f64, y as f64 + v[1] as f64]);
                }
            }
        }
        let fit = fit_homography_dlt(&src, &dst).unwrap();
        let truth = motion
            .at(t + 1)
            .unwrap()
            .compose(&motion.at(t).unwrap().inverse().unwrap())
            .unwrap();
        let normalized = |m: &nalgebra::Matrix3<f64>| m / m[(2, 2)];
        let err = (normalized(fit.matrix()) - normalized(truth.matrix())).norm();
        assert!(err < 1e-4, "frame {t}: {err}");
        assert!(scene.sprite_homography(0, t, t + 1).unwrap().distance(&truth) < 1e-9);
    }
}

#[test]
fn specs_round_trip_through_json() {
    let spec = fixture("planar_sprite.json");
    assert_eq!(SceneSpec::from_json(&spec.to_json().unwrap()).unwrap(), spec);
    let mut bad = spec.clone();
    bad.sprites[0].motion = Motion::translation([40.0, 0.0]);
    assert!(bad.validate().is_err(), "sprite leaves the frame");
}
