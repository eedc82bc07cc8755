//! The voting engine.
//!
//! For a frame `k` between keyframes `i < j`, six vote channels are
//! accumulated: flow pulls from `k` into each keyframe, flow pushes from each
//! keyframe into `k`, and one homography warp per keyframe region. The
//! majority class wins. An iterative pass then re-votes every non-keyframe
//! frame from its `2f` temporal neighbors, treating them as pseudo-keyframes.

mod config;
mod engine;
mod provider;
mod report;
mod resolve;
mod votes;

pub use config::{ChannelWeights, PropagationConfig, TieBreak, UpdateMode};
pub use engine::{PairOutput, Propagator, SequenceOutput};
pub use provider::{
    read_vote_file, vote_file_name, write_vote_file, ExternalVoteDir, NullProvider, ProviderError, VoteContext,
    VoteProvider,
};
pub use report::{ChannelTotals, FitFailure, FrameReport, IterationStats, PropagationReport};
pub use resolve::{resolve_majority, Resolution};
pub use votes::{
    add_pull_votes, add_push_votes, cast_flow_votes, cast_homography_votes, fit_region_homographies, RegionFit,
    RegionFits,
};
