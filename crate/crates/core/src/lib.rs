//! Engagement analytics over per-frame gaze and emotion labels.

pub mod analytics;
pub mod gaze;
pub mod ingest;
pub mod model;
pub mod stats;
pub mod synthetic;
pub mod validation;
