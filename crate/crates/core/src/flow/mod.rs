//! Optical flow: `.flo` file I/O, a pyramidal Lucas-Kanade estimator used
//! when no precomputed flow is available, and correspondence maps built by
//! chaining adjacent-frame flows across a span.

pub(crate) mod chain;
mod flo;
mod lk;
mod source;

pub use chain::{chain_correspondence, ChainParams, CorrespondenceMap, DEFAULT_FB_THRESHOLD};
pub use flo::{decode_flo, encode_flo, flow_file_name, read_flow_file, write_flow_file, FLO_MAGIC};
pub use lk::{estimate_flow, GrayFrame, LkParams};
pub use source::{EstimatedFlow, FlowDir, FlowSource, FlowStore};
