//! Streaming influence scoring for microblog mention streams.
//!
//! Users are treated as bodies whose mass is their follower count and whose
//! applied force is the number of mentions they receive per hour. Velocity
//! (a damped accumulation of force over mass) serves as an influence score,
//! and its per-hour change flags trending users. Baseline centralities
//! (PageRank, TunkRank, Influence-Passivity) and a click-correlation
//! evaluation with audience correction are provided for comparison.

pub mod centrality;
pub mod cli;
pub mod dynamics;
pub mod evaluation;
pub mod fmt;
pub mod ingest;
pub mod synth;
