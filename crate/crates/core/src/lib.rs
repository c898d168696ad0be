//! Group restaurant recommendation core: domain model, trust and similarity
//! matrices, influence ranking, the two group recommenders, discussion
//! termination, and the event-sourced session engine.

// `!(x > 0.0)` guards deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod domain;
pub mod eventlog;
pub mod ibgr;
pub mod leaderrank;
pub mod matrix;
pub mod pipeline;
pub mod recommender;
pub mod registry;
pub mod report;
pub mod resolver;
pub mod sentiment;
pub mod session;
pub mod similarity;
pub mod simulate;
pub mod termination;
pub mod trust;
