use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of semantic classes in the default palette.
pub const NUM_CLASSES: usize = 12;

/// Canonical class names, in evaluation-table order. Index = class id.
pub const CLASS_NAMES: [&str; NUM_CLASSES] = [
    "land",
    "forest",
    "residential",
    "haystack",
    "road",
    "church",
    "car",
    "water",
    "sky",
    "hill",
    "person",
    "fence",
];

/// Display colors, index = class id. Pairwise max-channel distance is well
/// above twice the default decode tolerance, so snapping is unambiguous.
const CLASS_COLORS: [[u8; 3]; NUM_CLASSES] = [
    [140, 100, 40],  // land
    [0, 110, 0],     // forest
    [220, 40, 40],   // residential
    [240, 220, 60],  // haystack
    [128, 128, 128], // road
    [160, 40, 200],  // church
    [0, 220, 220],   // car
    [30, 80, 230],   // water
    [150, 200, 255], // sky
    [90, 170, 60],   // hill
    [255, 120, 200], // person
    [255, 150, 0],   // fence
];

const ALIASES: [(&str, usize); 1] = [("river", 7)];

/// A semantic class index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub u8);

impl ClassId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Bijective mapping between class ids, names and display colors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Palette {
    names: Vec<String>,
    colors: Vec<[u8; 3]>,
    aliases: Vec<(String, usize)>,
}

impl Default for Palette {
    fn default() -> Self {
        Self::standard()
    }
}

impl Palette {
    /// The fixed 12-class palette.
    pub fn standard() -> Self {
        Self {
            names: CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
            colors: CLASS_COLORS.to_vec(),
            aliases: ALIASES.iter().map(|(s, i)| (s.to_string(), *i)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Looks up a class by canonical name or alias, case-insensitively.
    pub fn id_of(&self, name: &str) -> Result<ClassId> {
        let needle = name.trim().to_ascii_lowercase();
        if let Some(i) = self.names.iter().position(|n| *n == needle) {
            return Ok(ClassId(i as u8));
        }
        self.aliases
            .iter()
            .find(|(a, _)| *a == needle)
            .map(|(_, i)| ClassId(*i as u8))
            .ok_or_else(|| Error::NotFound(format!("class name {name:?}")))
    }

    pub fn name_of(&self, id: ClassId) -> Result<&str> {
        self.names
            .get(id.index())
            .map(String::as_str)
            .ok_or_else(|| Error::NotFound(format!("class id {id}")))
    }

    pub fn color_of(&self, id: ClassId) -> Result<[u8; 3]> {
        self.colors
            .get(id.index())
            .copied()
            .ok_or_else(|| Error::NotFound(format!("class id {id}")))
    }

    /// Exact color match.
    pub fn id_of_color(&self, rgb: [u8; 3]) -> Option<ClassId> {
        self.colors.iter().position(|c| *c == rgb).map(|i| ClassId(i as u8))
    }

    /// Nearest palette color by max-channel distance, if within `tolerance`.
    pub fn snap_color(&self, rgb: [u8; 3], tolerance: u8) -> Option<ClassId> {
        let (best, dist) = self
            .colors
            .iter()
            .enumerate()
            .map(|(i, c)| (i, max_channel_distance(*c, rgb)))
            .min_by_key(|&(_, d)| d)?;
        (dist <= tolerance).then_some(ClassId(best as u8))
    }

    pub fn colors(&self) -> &[[u8; 3]] {
        &self.colors
    }
}

pub(crate) fn max_channel_distance(a: [u8; 3], b: [u8; 3]) -> u8 {
    a.iter().zip(b.iter()).map(|(x, y)| x.abs_diff(*y)).max().unwrap_or(0)
}
