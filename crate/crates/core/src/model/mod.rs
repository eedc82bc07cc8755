//! Shared domain types: class palette, label maps, flow fields, vote grids
//! and the sequence manifest.

mod flow_field;
mod label_map;
mod manifest;
mod palette;
mod vote_grid;

pub use flow_field::{FlowDirection, FlowField};
pub use label_map::{LabelMap, UNLABELED};
pub use manifest::{load_manifest, SequenceManifest};
pub use palette::{ClassId, Palette, CLASS_NAMES, NUM_CLASSES};
pub use vote_grid::VoteGrid;
