//! Segment-based interactive video retrieval.
//!
//! The crate is organised around the lifecycle of a retrieval session:
//!
//! * [`catalog`] holds videos and their temporal segments (the unit of
//!   retrieval and submission).
//! * [`ingest`] turns timed ASR words, keyframe annotations and keyframe
//!   rasters into per-segment text documents and colour-grid features.
//! * [`fuzzy_index`] is an immutable inverted index with bounded
//!   edit-distance token matching and per-category match policies.
//! * [`query`] runs multi-clause queries, fuses and diversifies rankings.
//! * [`session`] keeps per-operator browsing state and its view models.
//! * [`harness`] judges known-item and ad-hoc search submissions.
//! * [`server`] exposes all of the above over HTTP.

pub mod catalog;
pub mod config;
pub mod fuzzy_index;
pub mod harness;
pub mod ingest;
pub mod query;
pub mod raster;
pub mod server;
pub mod session;
pub mod store;
pub mod synth;
pub mod text;

pub use catalog::{Catalog, CatalogError, SegmentRecord, VideoRecord};
pub use config::EngineConfig;
pub use fuzzy_index::{edit_distance, MatchPolicy, PostingIndex, TokenMatch};
pub use ingest::{Category, ColorGridFeature, GridDims, SegmentDocument, TimedToken};
pub use query::{QuerySpec, ScoredResult};
pub use session::{ColorTag, WorkingSet};
