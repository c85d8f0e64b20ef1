//! Episode segmentation and the per-window attention and attitude features.

mod episodes;
mod features;
pub mod table;
mod windows;

use thiserror::Error;

use crate::model::ModelError;

pub use episodes::{segment_episodes, segment_episodes_with, EpisodeBuilder, SegmentOptions};
pub use features::{
    attention_features, attitude_features, flux, window_attention, StreamingAttention,
};
pub use windows::{
    complement_features, complement_periods, period_features, period_window, session_features,
    window_frames, windowize, windowize_with, WindowFeatures, DEFAULT_PARTIAL_THRESHOLD,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    /// No detected frame in the window; its features are undefined.
    #[error("window has no detected frames")]
    EmptyWindow,
    #[error("episode [{start}, {end}) lies outside the observation window")]
    EpisodeOutsideWindow { start: u64, end: u64 },
    #[error("{labels} labels supplied for a window of {frames} frames")]
    WindowMismatch { labels: usize, frames: u64 },
    #[error("window length {0} s does not cover at least one frame")]
    InvalidWindowLength(f64),
    #[error("period {start_s}..{end_s} s is outside the session (0..{duration_s} s)")]
    PeriodOutOfRange {
        start_s: f64,
        end_s: f64,
        duration_s: f64,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}
