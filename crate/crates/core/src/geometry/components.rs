use serde::{Deserialize, Serialize};

use crate::model::{LabelMap, UNLABELED};

pub const DEFAULT_MIN_REGION_SIZE: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub min_x: u32,
    pub min_y: u32,
    pub max_x: u32,
    pub max_y: u32,
}

/// A maximal 4-connected set of same-class pixels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConnectedRegion {
    pub class: u8,
    pub region_id: usize,
    pub source_frame: usize,
    /// `(x, y)` in raster order.
    pub pixels: Vec<(u32, u32)>,
    pub bbox: BBox,
}

impl ConnectedRegion {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

/// Regions at or above the size threshold, and the smaller leftovers.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Components {
    pub regions: Vec<ConnectedRegion>,
    pub residue: Vec<ConnectedRegion>,
}

/// Union-find with path halving.
struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new() -> Self {
        Self { parent: Vec::new() }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Two-pass 4-connected labeling.
///
/// Components are emitted in the raster order of their first pixel; those
/// with fewer than `min_region_size` pixels go to `residue`. Unlabeled
/// pixels belong to neither.
pub fn connected_components(label_map: &LabelMap, min_region_size: usize) -> Components {
    let (w, h) = label_map.dims();
    let data = label_map.as_slice();
    let mut provisional = vec![u32::MAX; w * h];
    let mut sets = DisjointSet::new();

    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let c = data[i];
            if c == UNLABELED {
                continue;
            }
            let left = (x > 0 && data[i - 1] == c).then(|| provisional[i - 1]);
            let up = (y > 0 && data[i - w] == c).then(|| provisional[i - w]);
            provisional[i] = match (left, up) {
                (Some(l), Some(u)) => {
                    sets.union(l, u);
                    l.min(u)
                }
                (Some(l), None) => l,
                (None, Some(u)) => u,
                (None, None) => sets.make(),
            };
        }
    }

    // Dense ids in first-pixel raster order.
    let mut dense = vec![u32::MAX; sets.parent.len()];
    let mut groups: Vec<Vec<(u32, u32)>> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let p = provisional[y * w + x];
            if p == u32::MAX {
                continue;
            }
            let root = sets.find(p) as usize;
            if dense[root] == u32::MAX {
                dense[root] = groups.len() as u32;
                groups.push(Vec::new());
            }
            groups[dense[root] as usize].push((x as u32, y as u32));
        }
    }

    let mut out = Components::default();
    for (region_id, pixels) in groups.into_iter().enumerate() {
        let (x0, y0) = pixels[0];
        let mut bbox = BBox {
            min_x: x0,
            min_y: y0,
            max_x: x0,
            max_y: y0,
        };
        for &(x, y) in &pixels {
            bbox.min_x = bbox.min_x.min(x);
            bbox.max_x = bbox.max_x.max(x);
            bbox.min_y = bbox.min_y.min(y);
            bbox.max_y = bbox.max_y.max(y);
        }
        let region = ConnectedRegion {
            class: label_map.get(x0 as usize, y0 as usize),
            region_id,
            source_frame: label_map.frame_index,
            pixels,
            bbox,
        };
        if region.len() >= min_region_size {
            out.regions.push(region);
        } else {
            out.residue.push(region);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_map_is_one_region() {
        let m = LabelMap::filled(9, 7, 3, 4);
        let c = connected_components(&m, 1);
        assert_eq!(c.regions.len(), 1);
        assert_eq!(c.regions[0].len(), 63);
        assert_eq!(c.regions[0].class, 4);
        assert_eq!(c.regions[0].source_frame, 3);
        assert!(c.residue.is_empty());
    }

    #[test]
    fn separated_rectangles() {
        let mut m = LabelMap::filled(10, 4, 0, 0);
        for y in 0..4 {
            for x in 0..3 {
                m.set(x, y, 1);
                m.set(x + 6, y, 1);
            }
        }
        let c = connected_components(&m, 1);
        let ones: Vec<_> = c.regions.iter().filter(|r| r.class == 1).collect();
        assert_eq!(ones.len(), 2);
        assert_eq!(
            ones[0].bbox,
            BBox {
                min_x: 0,
                min_y: 0,
                max_x: 2,
                max_y: 3
            }
        );
        assert_eq!(
            ones[1].bbox,
            BBox {
                min_x: 6,
                min_y: 0,
                max_x: 8,
                max_y: 3
            }
        );
    }

    #[test]
    fn diagonal_pixels_are_not_connected() {
        let m = LabelMap::from_vec(2, 2, 0, vec![1, 0, 0, 1]).unwrap();
        let c = connected_components(&m, 1);
        assert_eq!(c.regions.len(), 4);
    }

    #[test]
    fn small_components_go_to_residue() {
        let mut m = LabelMap::filled(10, 10, 0, 0);
        m.set(5, 5, 2);
        let c = connected_components(&m, 64);
        assert_eq!(c.regions.len(), 1);
        assert_eq!(c.residue.len(), 1);
        assert_eq!(c.residue[0].pixels, vec![(5, 5)]);
    }

    #[test]
    fn u_shape_merges_through_union() {
        // Two arms joined at the bottom: the second pass must merge labels.
        let rows = ["1.1", "1.1", "111"];
        let data: Vec<u8> = rows
            .iter()
            .flat_map(|r| r.bytes().map(|b| if b == b'1' { 1 } else { 0 }))
            .collect();
        let m = LabelMap::from_vec(3, 3, 0, data).unwrap();
        let c = connected_components(&m, 1);
        let ones: Vec<_> = c.regions.iter().filter(|r| r.class == 1).collect();
        assert_eq!(ones.len(), 1);
        assert_eq!(ones[0].len(), 7);
    }
}
