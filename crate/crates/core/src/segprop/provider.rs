//! Pluggable vote sources merged alongside the flow and homography channels.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::error::{Error, Result};
use crate::model::{LabelMap, VoteGrid};

const VOTE_MAGIC: &[u8; 4] = b"SPVG";
const VOTE_VERSION: u32 = 1;

/// What a provider gets to look at when casting votes for one frame.
pub struct VoteContext<'a> {
    pub frame: usize,
    pub keyframe_i: usize,
    pub keyframe_j: usize,
    pub label_i: &'a LabelMap,
    pub label_j: &'a LabelMap,
    pub width: usize,
    pub height: usize,
    pub classes: usize,
}

#[derive(Debug, Error)]
#[error("{provider}: {message}")]
pub struct ProviderError {
    pub provider: String,
    pub message: String,
}

impl ProviderError {
    pub fn new(provider: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            provider: provider.into(),
            message: message.into(),
        }
    }
}

/// An external source of class votes. A failing provider is skipped for
/// that frame; it never aborts propagation.
pub trait VoteProvider: Send + Sync {
    fn name(&self) -> &str;

    fn cast(&self, ctx: &VoteContext<'_>) -> std::result::Result<VoteGrid, ProviderError>;
}

/// Casts nothing.
pub struct NullProvider;

impl VoteProvider for NullProvider {
    fn name(&self) -> &str {
        "null"
    }

    fn cast(&self, ctx: &VoteContext<'_>) -> std::result::Result<VoteGrid, ProviderError> {
        Ok(VoteGrid::new(ctx.width, ctx.height, ctx.classes))
    }
}

pub fn vote_file_name(frame: usize) -> String {
    format!("{frame:06}.votes")
}

/// Vote file layout, little-endian: magic `SPVG`, u32 version, u32 width,
/// u32 height, u32 classes, then f32 counts ordered `[y][x][class]`.
pub fn write_vote_file(path: &Path, grid: &VoteGrid) -> Result<()> {
    let mut out = Vec::with_capacity(20 + grid.as_slice().len() * 4);
    out.extend_from_slice(VOTE_MAGIC);
    for v in [
        VOTE_VERSION,
        grid.width() as u32,
        grid.height() as u32,
        grid.classes() as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for c in grid.as_slice() {
        out.extend_from_slice(&(*c as f32).to_le_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_vote_file(path: &Path) -> Result<VoteGrid> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |m: &str| Error::Invalid(format!("vote file {}: {m}", path.display()));
    if bytes.len() < 20 || &bytes[..4] != VOTE_MAGIC {
        return Err(bad("bad header"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    if word(4) != VOTE_VERSION as usize {
        return Err(bad("unsupported version"));
    }
    let (w, h, c) = (word(8), word(12), word(16));
    let n = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(c))
        .ok_or_else(|| bad("dimensions overflow"))?;
    if bytes.len() != 20 + n * 4 {
        return Err(bad("payload size does not match header"));
    }
    let counts = bytes[20..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    VoteGrid::from_vec(w, h, c, counts)
}

/// Reads precomputed per-frame vote grids from `<dir>/NNNNNN.votes`.
pub struct ExternalVoteDir {
    name: String,
    dir: PathBuf,
}

impl ExternalVoteDir {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        let dir = dir.into();
        Self {
            name: format!("external:{}", dir.display()),
            dir,
        }
    }
}

impl VoteProvider for ExternalVoteDir {
    fn name(&self) -> &str {
        &self.name
    }

    fn cast(&self, ctx: &VoteContext<'_>) -> std::result::Result<VoteGrid, ProviderError> {
        let path = self.dir.join(vote_file_name(ctx.frame));
        let grid = read_vote_file(&path).map_err(|e| ProviderError::new(&self.name, e.to_string()))?;
        if (grid.width(), grid.height(), grid.classes()) != (ctx.width, ctx.height, ctx.classes) {
            return Err(ProviderError::new(
                &self.name,
                format!(
                    "frame {}: grid is {}x{}x{}, expected {}x{}x{}",
                    ctx.frame,
                    grid.width(),
                    grid.height(),
                    grid.classes(),
                    ctx.width,
                    ctx.height,
                    ctx.classes
                ),
            ));
        }
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vote_file_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let mut g = VoteGrid::new(3, 2, 4);
        g.add(2, 1, 3, 2.5);
        g.add(0, 0, 1, 1.0);
        let path = dir.path().join(vote_file_name(5));
        write_vote_file(&path, &g).unwrap();
        assert_eq!(read_vote_file(&path).unwrap(), g);

        fs::write(&path, b"SPVGxxxx").unwrap();
        assert!(read_vote_file(&path).is_err());
    }

    #[test]
    fn external_dir_reports_missing_frames() {
        let dir = tempfile::tempdir().unwrap();
        let provider = ExternalVoteDir::new(dir.path());
        let l = LabelMap::filled(3, 2, 0, 0);
        let ctx = VoteContext {
            frame: 1,
            keyframe_i: 0,
            keyframe_j: 2,
            label_i: &l,
            label_j: &l,
            width: 3,
            height: 2,
            classes: 4,
        };
        assert!(provider.cast(&ctx).is_err());
        write_vote_file(&dir.path().join(vote_file_name(1)), &VoteGrid::new(3, 2, 4)).unwrap();
        assert!(provider.cast(&ctx).is_ok());
        write_vote_file(&dir.path().join(vote_file_name(1)), &VoteGrid::new(3, 2, 5)).unwrap();
        assert!(provider.cast(&ctx).is_err());
    }
}
