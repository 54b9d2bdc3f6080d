//! Stress detection from wrist-worn biosignals.
//!
//! The pipeline turns raw electrodermal activity (EDA) and heart rate (HR)
//! recordings into a binary stressed / non-stressed prediction:
//!
//! 1. [`ingest`] reads device sessions or canonical CSVs and aligns every
//!    subject onto a uniform 1 Hz grid with per-second labels.
//! 2. [`features`] cuts the grid into tumbling windows and computes the
//!    statistical feature vectors the models consume.
//! 3. [`synthesis`] chops recordings into fixed-length same-label segments
//!    and recombines them into balanced synthetic subjects.
//! 4. [`gbdt`] and [`mlp`] are the two learners, written from scratch:
//!    second-order gradient-boosted trees and a small feed-forward network.
//! 5. [`ensemble`] blends the two probability streams with configurable
//!    weights; [`evaluate`] scores predictions, runs leave-one-subject-out
//!    validation and the numbered experiment suite, and renders plots.
//!
//! Everything downstream of ingestion is deterministic for a fixed seed:
//! repeated runs produce byte-identical models, reports and figures.

pub mod ensemble;
pub mod evaluate;
pub mod features;
pub mod fixture;
pub mod gbdt;
pub mod ingest;
pub mod mlp;
pub mod registry;
pub mod series;
pub mod synthesis;
pub mod util;
