//! Synthetic scenes with exact ground truth.
//!
//! A scene is a textured background plus planar polygon sprites drawn in
//! list order (later sprites on top). Every layer moves by a per-frame
//! homography `H_t` mapping its reference coordinates to frame `t`, so
//! labels, flow and per-sprite homographies are known analytically.
//! Textures are sums of sinusoids evaluated in reference coordinates, which
//! keeps them band-limited and lets warped frames render exactly.
//!
//! Pixel `(x, y)` is sampled at the point `(x, y)`, the same convention the
//! flow and geometry modules use.

use std::path::Path;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{frame_file_name, write_label_image};
use crate::error::{Error, Result};
use crate::flow::{flow_file_name, write_flow_file, FlowStore, GrayFrame};
use crate::geometry::{point_in_polygon, Homography};
use crate::model::{FlowDirection, FlowField, LabelMap, Palette, SequenceManifest, NUM_CLASSES};
use crate::par;

/// Per-frame motion of a layer, as homographies from reference coordinates.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Motion {
    #[default]
    Static,
    /// `H_t = T(center + velocity t) · P(perspective t) · R(rotation t) ·
    /// S(1 + scale t) · T(-center)`.
    Linear {
        center: [f64; 2],
        #[serde(default)]
        velocity: [f64; 2],
        /// Degrees per frame.
        #[serde(default)]
        rotation_deg: f64,
        /// Relative scale change per frame.
        #[serde(default)]
        scale: f64,
        /// Projective row `[g, h]` per frame.
        #[serde(default)]
        perspective: [f64; 2],
    },
    /// One row-major homography per frame.
    Explicit { homographies: Vec<[[f64; 3]; 3]> },
}

impl Motion {
    pub fn translation(velocity: [f64; 2]) -> Self {
        Motion::Linear {
            center: [0.0, 0.0],
            velocity,
            rotation_deg: 0.0,
            scale: 0.0,
            perspective: [0.0, 0.0],
        }
    }

    pub fn at(&self, t: usize) -> Result<Homography> {
        match self {
            Motion::Static => Ok(Homography::identity()),
            Motion::Linear {
                center,
                velocity,
                rotation_deg,
                scale,
                perspective,
            } => {
                let t = t as f64;
                let (s, c) = (rotation_deg * t).to_radians().sin_cos();
                let k = 1.0 + scale * t;
                let shift = |dx: f64, dy: f64| Matrix3::new(1.0, 0.0, dx, 0.0, 1.0, dy, 0.0, 0.0, 1.0);
                let m = shift(center[0] + velocity[0] * t, center[1] + velocity[1] * t)
                    * Matrix3::new(
                        1.0,
                        0.0,
                        0.0,
                        0.0,
                        1.0,
                        0.0,
                        perspective[0] * t,
                        perspective[1] * t,
                        1.0,
                    )
                    * Matrix3::new(c * k, -s * k, 0.0, s * k, c * k, 0.0, 0.0, 0.0, 1.0)
                    * shift(-center[0], -center[1]);
                Homography::from_matrix(m)
            }
            Motion::Explicit { homographies } => {
                let rows = homographies
                    .get(t)
                    .ok_or_else(|| Error::Invalid(format!("no homography for frame {t}")))?;
                Homography::from_rows(*rows)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpriteSpec {
    pub class: u8,
    /// Polygon vertices in reference coordinates.
    pub polygon: Vec<[f64; 2]>,
    #[serde(default)]
    pub motion: Motion,
    #[serde(default)]
    pub texture_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub background_class: u8,
    #[serde(default)]
    pub background_motion: Motion,
    #[serde(default)]
    pub background_seed: u64,
    /// Drawing order: later sprites occlude earlier ones.
    #[serde(default)]
    pub sprites: Vec<SpriteSpec>,
}

impl SceneSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SceneSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Checks sizes, classes, invertible motion at every frame, and that each
    /// sprite keeps at least half of its area inside the frame.
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.frames == 0 {
            return Err(Error::Invalid("scene needs positive size and frame count".into()));
        }
        if self.background_class as usize >= NUM_CLASSES {
            return Err(Error::Invalid(format!(
                "unknown background class {}",
                self.background_class
            )));
        }
        for t in 0..self.frames {
            self.background_motion.at(t)?.inverse()?;
        }
        for (s, sprite) in self.sprites.iter().enumerate() {
            if sprite.class as usize >= NUM_CLASSES {
                return Err(Error::Invalid(format!("sprite {s} has unknown class {}", sprite.class)));
            }
            if sprite.polygon.len() < 3 || sprite.polygon.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Invalid(format!("sprite {s} needs >= 3 finite vertices")));
            }
            let samples = polygon_samples(&sprite.polygon);
            if samples.is_empty() {
                return Err(Error::Invalid(format!("sprite {s} covers no pixel")));
            }
            for t in 0..self.frames {
                let h = sprite.motion.at(t)?;
                h.inverse()?;
                let inside = samples
                    .iter()
                    .filter(|&&p| h.apply(p).is_some_and(|q| self.in_frame(q)))
                    .count();
                if 2 * inside < samples.len() {
                    return Err(Error::Invalid(format!("sprite {s} is less than half inside frame {t}")));
                }
            }
        }
        Ok(())
    }

    fn in_frame(&self, q: [f64; 2]) -> bool {
        q[0] >= 0.0 && q[1] >= 0.0 && q[0] <= (self.width - 1) as f64 && q[1] <= (self.height - 1) as f64
    }

    /// Scene with nothing moving.
    pub fn static_scene(width: usize, height: usize, frames: usize, seed: u64) -> Self {
        let mut spec = Self::translating_rectangles(width, height, frames, 3, seed);
        for s in &mut spec.sprites {
            s.motion = Motion::Static;
        }
        spec
    }

    /// Random axis-aligned rectangles of distinct classes drifting at
    /// constant velocity over a static background. Velocities are chosen so
    /// every rectangle stays fully in frame.
    pub fn translating_rectangles(width: usize, height: usize, frames: usize, count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (width as f64, height as f64);
        let span = frames.saturating_sub(1).max(1) as f64;
        let sprites = (0..count)
            .map(|s| {
                let rw = rng.random_range(0.15..0.3) * w;
                let rh = rng.random_range(0.15..0.3) * h;
                let x0 = rng.random_range(0.05 * w..(0.95 * w - rw));
                let y0 = rng.random_range(0.05 * h..(0.95 * h - rh));
                let vx = rng.random_range(-x0 + 1.0..(w - 2.0 - x0 - rw)) / span;
                let vy = rng.random_range(-y0 + 1.0..(h - 2.0 - y0 - rh)) / span;
                let limit = 1.5;
                SpriteSpec {
                    class: (1 + s % (NUM_CLASSES - 1)) as u8,
                    polygon: vec![[x0, y0], [x0 + rw, y0], [x0 + rw, y0 + rh], [x0, y0 + rh]],
                    motion: Motion::translation([vx.clamp(-limit, limit), vy.clamp(-limit, limit)]),
                    texture_seed: seed.wrapping_mul(31).wrapping_add(s as u64 + 1),
                }
            })
            .collect();
        Self {
            width,
            height,
            frames,
            background_class: 0,
            background_motion: Motion::Static,
            background_seed: seed,
            sprites,
        }
    }
}

/// Reference-space integer points inside a polygon.
fn polygon_samples(polygon: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let (lo, hi) = bounds(polygon);
    let mut out = Vec::new();
    for y in lo[1].ceil() as i64..=hi[1].floor() as i64 {
        for x in lo[0].ceil() as i64..=hi[0].floor() as i64 {
            let p = [x as f64, y as f64];
            if point_in_polygon(p, polygon) {
                out.push(p);
            }
        }
    }
    out
}

fn bounds(polygon: &[[f64; 2]]) -> ([f64; 2], [f64; 2]) {
    polygon
        .iter()
        .fold(([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]), |(lo, hi), p| {
            ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])])
        })
}

/// Band-limited texture: a few random plane waves.
#[derive(Clone, Debug)]
struct Texture {
    waves: Vec<[f64; 4]>,
}

impl Texture {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7e47_u64);
        let waves = (0..10)
            .map(|_| {
                let freq = rng.random_range(1.0 / 24.0..1.0 / 8.0);
                let angle = rng.random_range(0.0..std::f64::consts::PI);
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                [
                    std::f64::consts::TAU * freq * angle.cos(),
                    std::f64::consts::TAU * freq * angle.sin(),
                    phase,
                    rng.random_range(0.4..1.0),
                ]
            })
            .collect::<Vec<_>>();
        Self { waves }
    }

    /// Value in `[0, 1]`.
    fn sample(&self, p: [f64; 2]) -> f64 {
        let norm: f64 = self.waves.iter().map(|w| w[3]).sum();
        let v: f64 = self
            .waves
            .iter()
            .map(|w| w[3] * (w[0] * p[0] + w[1] * p[1] + w[2]).sin())
            .sum();
        0.5 + 0.5 * v / norm
    }
}

struct Layer {
    class: u8,
    polygon: Option<Vec<[f64; 2]>>,
    bounds: ([f64; 2], [f64; 2]),
    texture: Texture,
    forward: Vec<Homography>,
    inverse: Vec<Homography>,
}

impl Layer {
    /// Reference point of frame-`t` position `p`, if the layer covers it.
    fn covers(&self, t: usize, p: [f64; 2]) -> Option<[f64; 2]> {
        let r = self.inverse[t].apply(p)?;
        match &self.polygon {
            None => Some(r),
            Some(poly) => {
                let (lo, hi) = self.bounds;
                (r[0] >= lo[0] && r[0] <= hi[0] && r[1] >= lo[1] && r[1] <= hi[1] && point_in_polygon(r, poly))
                    .then_some(r)
            }
        }
    }

    /// Position at frame `to` of the point seen at `p` in frame `from`.
    fn track(&self, from: usize, to: usize, p: [f64; 2]) -> Option<[f64; 2]> {
        self.forward[to].apply(self.inverse[from].apply(p)?)
    }
}

/// Everything rendered from a [`SceneSpec`].
pub struct RenderedScene {
    pub spec: SceneSpec,
    /// Row-major RGB, one buffer per frame.
    pub frames: Vec<Vec<u8>>,
    pub labels: Vec<LabelMap>,
    /// Forward flow of frames `0 .. n-1`.
    pub forward: Vec<FlowField>,
    /// Backward flow of frames `1 .. n`, stored at index `t - 1`.
    pub backward: Vec<FlowField>,
    /// Per-pixel owning layer: 0 for the background, `s + 1` for sprite `s`.
    pub owners: Vec<Vec<u16>>,
    /// Pixels whose backward correspondence is out of frame or hidden in
    /// the previous frame. Frame 0 has no previous frame and is all false.
    pub disocclusion: Vec<Vec<bool>>,
    layers: Vec<Layer>,
}

/// Renders frames, exact flows, labels and masks.
pub fn render_scene(spec: &SceneSpec) -> Result<RenderedScene> {
    spec.validate()?;
    let n = spec.frames;
    let motion_layer = |class, polygon: Option<Vec<[f64; 2]>>, motion: &Motion, seed| -> Result<Layer> {
        let forward: Vec<Homography> = (0..n).map(|t| motion.at(t)).collect::<Result<_>>()?;
        let inverse = forward.iter().map(Homography::inverse).collect::<Result<_>>()?;
        let bounds = polygon.as_deref().map_or(([0.0; 2], [0.0; 2]), bounds);
        Ok(Layer {
            class,
            polygon,
            bounds,
            texture: Texture::new(seed),
            forward,
            inverse,
        })
    };
    let mut layers = vec![motion_layer(
        spec.background_class,
        None,
        &spec.background_motion,
        spec.background_seed,
    )?];
    for s in &spec.sprites {
        layers.push(motion_layer(
            s.class,
            Some(s.polygon.clone()),
            &s.motion,
            s.texture_seed,
        )?);
    }

    let mut scene = RenderedScene {
        spec: spec.clone(),
        frames: Vec::new(),
        labels: Vec::new(),
        forward: Vec::new(),
        backward: Vec::new(),
        owners: Vec::new(),
        disocclusion: Vec::new(),
        layers,
    };
    let (w, h) = (spec.width, spec.height);
    let palette = Palette::standard();
    let per_frame = par::map_indices(n, |t| {
        let mut owners = vec![0u16; w * h];
        let mut rgb = vec![0u8; w * h * 3];
        for y in 0..h {
            for x in 0..w {
                let p = [x as f64, y as f64];
                let (owner, r) = scene.owner_at(t, p).expect("background covers every point");
                let layer = &scene.layers[owner as usize];
                let v = layer.texture.sample(r);
                let tint = palette.colors()[layer.class as usize];
                let i = y * w + x;
                owners[i] = owner;
                for (c, &tc) in tint.iter().enumerate() {
                    rgb[3 * i + c] = (0.3 * tc as f64 + 0.7 * 255.0 * v).round().clamp(0.0, 255.0) as u8;
                }
            }
        }
        (owners, rgb)
    });
    for (t, (owners, rgb)) in per_frame.into_iter().enumerate() {
        let data = owners.iter().map(|&o| scene.layers[o as usize].class).collect();
        scene.labels.push(LabelMap::from_vec(w, h, t, data)?);
        scene.owners.push(owners);
        scene.frames.push(rgb);
    }
    let flows = par::map_indices(n, |t| {
        let fwd = (t + 1 < n).then(|| scene.exact_flow(t, t + 1, FlowDirection::Forward));
        let bwd = (t > 0).then(|| scene.exact_flow(t, t - 1, FlowDirection::Backward));
        (fwd, bwd)
    });
    for (fwd, bwd) in flows {
        if let Some(f) = fwd {
            scene.forward.push(f?);
        }
        if let Some(b) = bwd {
            scene.backward.push(b?);
        }
    }
    scene.disocclusion = (0..n)
        .map(|t| {
            if t == 0 {
                vec![false; w * h]
            } else {
                scene.visibility_mask(t, t - 1).into_iter().map(|v| !v).collect()
            }
        })
        .collect();
    Ok(scene)
}

impl RenderedScene {
    pub fn width(&self) -> usize {
        self.spec.width
    }

    pub fn height(&self) -> usize {
        self.spec.height
    }

    pub fn frame_count(&self) -> usize {
        self.spec.frames
    }

    /// Topmost layer covering `p` in frame `t`, with the reference point.
    fn owner_at(&self, t: usize, p: [f64; 2]) -> Option<(u16, [f64; 2])> {
        self.layers
            .iter()
            .enumerate()
            .rev()
            .find_map(|(i, l)| l.covers(t, p).map(|r| (i as u16, r)))
    }

    fn exact_flow(&self, from: usize, to: usize, direction: FlowDirection) -> Result<FlowField> {
        let (w, h) = (self.width(), self.height());
        let owners = &self.owners[from];
        let mut vectors = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let p = [x as f64, y as f64];
                let q = self.layers[owners[y * w + x] as usize]
                    .track(from, to, p)
                    .ok_or_else(|| Error::Invalid(format!("motion degenerate at frame {to}")))?;
                vectors.push([(q[0] - p[0]) as f32, (q[1] - p[1]) as f32]);
            }
        }
        FlowField::from_vec(w, h, direction, from, vectors)
    }

    /// Homography of sprite `s` from frame `from` to frame `to`.
    pub fn sprite_homography(&self, s: usize, from: usize, to: usize) -> Result<Homography> {
        let layer = self
            .layers
            .get(s + 1)
            .ok_or_else(|| Error::NotFound(format!("sprite {s}")))?;
        layer.forward[to].compose(&layer.inverse[from])
    }

    /// Pixels of frame `k` whose surface point stays in frame and
    /// unoccluded at every frame from `k` to `i` inclusive.
    pub fn visibility_mask(&self, k: usize, i: usize) -> Vec<bool> {
        let (w, h) = (self.width(), self.height());
        let path: Vec<usize> = if i >= k {
            (k..=i).collect()
        } else {
            (i..=k).rev().collect()
        };
        let rows = par::map_indices(h, |y| {
            (0..w)
                .map(|x| {
                    let owner = self.owners[k][y * w + x];
                    let layer = &self.layers[owner as usize];
                    path.iter().all(|&t| {
                        layer.track(k, t, [x as f64, y as f64]).is_some_and(|q| {
                            self.spec.in_frame(q) && self.owner_at(t, q).is_some_and(|(o, _)| o == owner)
                        })
                    })
                })
                .collect::<Vec<_>>()
        });
        rows.into_iter().flatten().collect()
    }

    /// Pixels of `k` usable for scoring propagation between keyframes `i`
    /// and `j`: those visible from at least one of them.
    pub fn evaluation_mask(&self, k: usize, i: usize, j: usize) -> Vec<bool> {
        let a = self.visibility_mask(k, i);
        let b = self.visibility_mask(k, j);
        a.into_iter().zip(b).map(|(a, b)| a || b).collect()
    }

    pub fn flow_store(&self) -> FlowStore {
        self.forward.iter().chain(&self.backward).cloned().collect()
    }

    pub fn gray_frames(&self) -> Vec<GrayFrame> {
        self.frames
            .iter()
            .map(|f| GrayFrame::from_rgb(self.width(), self.height(), f).expect("sized by render"))
            .collect()
    }

    /// Writes the dataset layout: frames, keyframe labels every
    /// `label_stride` frames (first and last frame always included), flows,
    /// the full ground truth under `gt/`, the scene spec and a manifest.
    pub fn write(&self, dir: &Path, label_stride: usize) -> Result<SequenceManifest> {
        if label_stride == 0 {
            return Err(Error::Invalid("label stride must be positive".into()));
        }
        let n = self.frame_count();
        for sub in ["frames", "labels", "flow", "gt"] {
            std::fs::create_dir_all(dir.join(sub)).map_err(|e| Error::io(dir.join(sub), e))?;
        }
        let palette = Palette::standard();
        let mut keyframes: Vec<usize> = (0..n).step_by(label_stride).collect();
        if keyframes.last() != Some(&(n - 1)) {
            keyframes.push(n - 1);
        }
        let mut frames = Vec::with_capacity(n);
        for t in 0..n {
            let name = frame_file_name(t);
            let path = dir.join("frames").join(&name);
            image::save_buffer(
                &path,
                &self.frames[t],
                self.width() as u32,
                self.height() as u32,
                image::ExtendedColorType::Rgb8,
            )?;
            frames.push(Path::new("frames").join(&name));
            write_label_image(&dir.join("gt").join(&name), &self.labels[t], &palette)?;
        }
        for &k in &keyframes {
            write_label_image(&dir.join("labels").join(frame_file_name(k)), &self.labels[k], &palette)?;
        }
        for f in self.forward.iter().chain(&self.backward) {
            write_flow_file(&dir.join("flow").join(flow_file_name(f.source_frame, f.direction)), f)?;
        }
        let spec_path = dir.join("scene.json");
        std::fs::write(&spec_path, self.spec.to_json()?).map_err(|e| Error::io(&spec_path, e))?;
        let mut manifest = SequenceManifest {
            fps: 25.0,
            resolution: [self.width(), self.height()],
            frames,
            keyframes,
            flow_dir: Some("flow".into()),
            base_dir: dir.to_path_buf(),
        };
        manifest.save(&dir.join("manifest.json"))?;
        manifest.base_dir = dir.to_path_buf();
        Ok(manifest)
    }
}
