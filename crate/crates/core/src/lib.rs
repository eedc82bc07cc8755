//! Dense video label propagation from sparse keyframe annotations.
//!
//! Labels of manually annotated keyframes are carried to the frames in
//! between by voting: optical-flow trajectories pull and push classes
//! between frames, per-region homographies add geometric votes, and an
//! iterative neighborhood pass smooths the result. The [`graphlab`] module
//! holds an explicit graph formulation of the same procedure used to check
//! the voting engine on small instances.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod flow;
pub mod geometry;
pub mod graphlab;
pub mod model;
pub mod par;
pub mod segprop;
pub mod synth;

pub use error::{Error, Result};
pub use model::{ClassId, FlowDirection, FlowField, LabelMap, Palette, SequenceManifest, VoteGrid, UNLABELED};
