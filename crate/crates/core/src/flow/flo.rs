//! Middlebury `.flo`: float32 magic 202021.25, int32 width, int32 height,
//! then row-major interleaved float32 `(dx, dy)`, all little-endian.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{FlowDirection, FlowField};

pub const FLO_MAGIC: f32 = 202021.25;

const HEADER_LEN: usize = 12;

/// Canonical file name for the flow leaving `frame` in `direction`.
pub fn flow_file_name(frame: usize, direction: FlowDirection) -> String {
    format!("{frame:06}_{}.flo", direction.as_str())
}

/// Parses `NNNNNN_fwd.flo` / `NNNNNN_bwd.flo`.
fn parse_flow_file_name(path: &Path) -> Option<(usize, FlowDirection)> {
    let stem = path.file_stem()?.to_str()?;
    let (frame, dir) = stem.split_once('_')?;
    let direction = match dir {
        "fwd" => FlowDirection::Forward,
        "bwd" => FlowDirection::Backward,
        _ => return None,
    };
    Some((frame.parse().ok()?, direction))
}

pub fn decode_flo(
    bytes: &[u8],
    direction: FlowDirection,
    source_frame: usize,
) -> std::result::Result<FlowField, String> {
    if bytes.len() < HEADER_LEN {
        return Err(format!("{} bytes is shorter than the 12-byte header", bytes.len()));
    }
    let word = |i: usize| -> [u8; 4] { bytes[i..i + 4].try_into().unwrap() };
    let magic = f32::from_le_bytes(word(0));
    if magic != FLO_MAGIC {
        return Err(format!("bad magic {magic}"));
    }
    let width = i32::from_le_bytes(word(4));
    let height = i32::from_le_bytes(word(8));
    if width <= 0 || height <= 0 {
        return Err(format!("non-positive dimensions {width}x{height}"));
    }
    let (width, height) = (width as usize, height as usize);
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| format!("dimensions {width}x{height} overflow"))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(format!(
            "truncated payload: {} bytes, expected {expected}",
            payload.len()
        ));
    }
    if payload.len() > expected {
        return Err(format!("{} trailing bytes after payload", payload.len() - expected));
    }
    let vectors: Vec<[f32; 2]> = payload
        .chunks_exact(8)
        .map(|c| {
            [
                f32::from_le_bytes(c[0..4].try_into().unwrap()),
                f32::from_le_bytes(c[4..8].try_into().unwrap()),
            ]
        })
        .collect();
    FlowField::from_vec(width, height, direction, source_frame, vectors).map_err(|e| e.to_string())
}

pub fn encode_flo(flow: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + flow.vectors().len() * 8);
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(flow.width() as i32).to_le_bytes());
    out.extend_from_slice(&(flow.height() as i32).to_le_bytes());
    for v in flow.vectors() {
        out.extend_from_slice(&v[0].to_le_bytes());
        out.extend_from_slice(&v[1].to_le_bytes());
    }
    out
}

/// Reads a `.flo` file. Direction and source frame are taken from a
/// canonical file name when present, otherwise forward / frame 0.
pub fn read_flow_file(path: &Path) -> Result<FlowField> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (frame, direction) = parse_flow_file_name(path).unwrap_or((0, FlowDirection::Forward));
    decode_flo(&bytes, direction, frame).map_err(|reason| Error::FlowFormat {
        path: path.to_path_buf(),
        reason,
    })
}

pub fn write_flow_file(path: &Path, flow: &FlowField) -> Result<()> {
    fs::write(path, encode_flo(flow)).map_err(|e| Error::io(path, e))
}
