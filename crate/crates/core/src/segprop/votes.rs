use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::PropagationConfig;
use super::report::FitFailure;
use crate::error::Result;
use crate::flow::CorrespondenceMap;
use crate::geometry::{
    connected_components, fit_homography_ransac, warp_region, ConnectedRegion, Homography, RansacParams,
};
use crate::model::{LabelMap, VoteGrid};

fn check_dims(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected != actual {
        return Err(crate::Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// Pull channel: every valid pixel of the current frame takes the class at
/// its rounded landing position in the keyframe.
pub fn add_pull_votes(
    grid: &mut VoteGrid,
    keyframe: &LabelMap,
    current_to_key: &CorrespondenceMap,
    weight: f64,
) -> Result<()> {
    check_dims(grid.dims(), current_to_key.dims())?;
    check_dims(grid.dims(), keyframe.dims())?;
    let (w, h) = grid.dims();
    for y in 0..h {
        for x in 0..w {
            if let Some((kx, ky)) = current_to_key.landing_pixel(x, y) {
                grid.add(x, y, keyframe.get(kx, ky), weight);
            }
        }
    }
    Ok(())
}

/// Push channel: every valid keyframe pixel splats its class at its rounded
/// landing position in the current frame. Collisions accumulate.
pub fn add_push_votes(
    grid: &mut VoteGrid,
    keyframe: &LabelMap,
    key_to_current: &CorrespondenceMap,
    weight: f64,
) -> Result<()> {
    check_dims(grid.dims(), key_to_current.dims())?;
    check_dims(grid.dims(), keyframe.dims())?;
    let (w, h) = grid.dims();
    for y in 0..h {
        for x in 0..w {
            if let Some((tx, ty)) = key_to_current.landing_pixel(x, y) {
                grid.add(tx, ty, keyframe.get(x, y), weight);
            }
        }
    }
    Ok(())
}

/// The four flow channels for frame `k` between keyframes `i` and `j`, one
/// vote per channel.
pub fn cast_flow_votes(
    label_i: &LabelMap,
    label_j: &LabelMap,
    k_to_i: &CorrespondenceMap,
    k_to_j: &CorrespondenceMap,
    i_to_k: &CorrespondenceMap,
    j_to_k: &CorrespondenceMap,
    classes: usize,
) -> Result<VoteGrid> {
    check_dims(label_i.dims(), label_j.dims())?;
    let (w, h) = label_i.dims();
    let mut grid = VoteGrid::new(w, h, classes);
    add_pull_votes(&mut grid, label_i, k_to_i, 1.0)?;
    add_pull_votes(&mut grid, label_j, k_to_j, 1.0)?;
    add_push_votes(&mut grid, label_i, i_to_k, 1.0)?;
    add_push_votes(&mut grid, label_j, j_to_k, 1.0)?;
    Ok(grid)
}

/// A keyframe region and its homography onto the opposite keyframe.
#[derive(Clone, Debug)]
pub struct RegionFit {
    pub region: ConnectedRegion,
    pub homography: Homography,
    pub inliers: usize,
}

/// Region homographies from one keyframe onto the other.
#[derive(Clone, Debug, Default)]
pub struct RegionFits {
    pub from_frame: usize,
    pub to_frame: usize,
    pub fits: Vec<RegionFit>,
    pub failures: Vec<FitFailure>,
}

fn mix_seed(seed: u64, a: u64, b: u64, c: u64) -> u64 {
    // splitmix64 over the combined words.
    let mut z = seed
        ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ c.wrapping_mul(0x1656_67B1_9E37_79F9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fits one homography per connected region of `label` using the
/// flow-chained correspondences `label.frame -> other keyframe`.
///
/// Regions with too few valid correspondences, or where RANSAC finds no
/// consensus, are recorded as failures and contribute no votes.
pub fn fit_region_homographies(
    label: &LabelMap,
    to_other: &CorrespondenceMap,
    config: &PropagationConfig,
) -> Result<RegionFits> {
    check_dims(label.dims(), to_other.dims())?;
    let components = connected_components(label, config.min_region_size.max(1));
    let from_frame = label.frame_index;
    let to_frame = to_other.to_frame;
    let results = crate::par::map_slice(&components.regions, |region| {
        let seed = mix_seed(config.seed, from_frame as u64, to_frame as u64, region.region_id as u64);
        let mut src = Vec::new();
        let mut dst = Vec::new();
        for &(x, y) in &region.pixels {
            if let Some(p) = to_other.get(x as usize, y as usize) {
                src.push([x as f64, y as f64]);
                dst.push(p);
            }
        }
        if src.len() > config.max_ransac_points {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
            let mut keep = sample(&mut rng, src.len(), config.max_ransac_points).into_vec();
            keep.sort_unstable();
            src = keep.iter().map(|&i| src[i]).collect();
            dst = keep.iter().map(|&i| dst[i]).collect();
        }
        let params = RansacParams { seed, ..config.ransac };
        fit_homography_ransac(&src, &dst, &params)
            .map(|fit| RegionFit {
                region: region.clone(),
                homography: fit.homography,
                inliers: fit.inlier_count(),
            })
            .map_err(|e| FitFailure {
                keyframe: from_frame,
                target: to_frame,
                region_id: region.region_id,
                class: region.class,
                pixels: region.len(),
                correspondences: src.len(),
                reason: e.to_string(),
            })
    });
    let mut out = RegionFits {
        from_frame,
        to_frame,
        ..Default::default()
    };
    for r in results {
        match r {
            Ok(fit) => out.fits.push(fit),
            Err(failure) => {
                log::debug!(
                    "region {} (class {}) of frame {}: {}",
                    failure.region_id,
                    failure.class,
                    failure.keyframe,
                    failure.reason
                );
                out.failures.push(failure);
            }
        }
    }
    Ok(out)
}

/// Warps every fitted region of one keyframe. Where several warped regions
/// land on the same pixel they share its single vote equally.
fn warp_into(grid: &mut VoteGrid, fits: &RegionFits, t: f64, weight: f64) {
    let (w, h) = grid.dims();
    let landed: Vec<(u8, Vec<(usize, usize)>)> = fits
        .fits
        .iter()
        .filter_map(|fit| {
            let ht = fit.homography.interpolate(&fit.region.bbox, t).ok()?;
            Some((fit.region.class, warp_region(&fit.region, &ht, w, h)))
        })
        .collect();
    let mut claims = vec![0u32; w * h];
    for (_, pixels) in &landed {
        for &(x, y) in pixels {
            claims[y * w + x] += 1;
        }
    }
    for (class, pixels) in &landed {
        for &(x, y) in pixels {
            grid.add(x, y, *class, weight / claims[y * w + x] as f64);
        }
    }
}

/// The two homography channels for frame `k`: regions of `i` move a fraction
/// `(k-i)/(j-i)` of the way along `H_{i->j}`, regions of `j` a fraction
/// `(j-k)/(j-i)` along `H_{j->i}`. Each side casts at most one vote per
/// pixel.
pub fn cast_homography_votes(
    fits_i: &RegionFits,
    fits_j: &RegionFits,
    k: usize,
    dims: (usize, usize),
    classes: usize,
) -> VoteGrid {
    let (i, j) = (fits_i.from_frame, fits_j.from_frame);
    let mut grid = VoteGrid::new(dims.0, dims.1, classes);
    if j == i {
        return grid;
    }
    let span = j as f64 - i as f64;
    warp_into(&mut grid, fits_i, (k as f64 - i as f64) / span, 1.0);
    warp_into(&mut grid, fits_j, (j as f64 - k as f64) / span, 1.0);
    grid
}
