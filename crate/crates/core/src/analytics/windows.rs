use crate::model::{AttentionFeatures, AttitudeFeatures, LabelStream, ObservationWindow, Subject};

use super::episodes::SegmentOptions;
use super::features::{attitude_features, window_attention};
use super::AnalyticsError;

/// Fraction of a full window a trailing remainder must cover to be kept.
pub const DEFAULT_PARTIAL_THRESHOLD: f64 = 0.5;

/// Number of frames in a window of `seconds` at `fps`, rounded down.
pub fn window_frames(seconds: f64, fps: f64) -> u64 {
    // Tolerate representation error such as 2.3 * 10.0 = 22.999999999999996.
    (seconds * fps + 1e-9).floor().max(0.0) as u64
}

/// Cuts a session into consecutive, non-overlapping windows.
pub fn windowize(
    stream: &LabelStream,
    window_seconds: f64,
) -> Result<Vec<ObservationWindow>, AnalyticsError> {
    windowize_with(stream, window_seconds, DEFAULT_PARTIAL_THRESHOLD)
}

pub fn windowize_with(
    stream: &LabelStream,
    window_seconds: f64,
    partial_threshold: f64,
) -> Result<Vec<ObservationWindow>, AnalyticsError> {
    if !(window_seconds.is_finite() && window_seconds > 0.0) {
        return Err(AnalyticsError::InvalidWindowLength(window_seconds));
    }
    let fps = stream.fps();
    let full = window_frames(window_seconds, fps);
    if full == 0 {
        return Err(AnalyticsError::InvalidWindowLength(window_seconds));
    }
    let total = stream.frame_count();
    let mut windows = Vec::with_capacity((total / full + 1) as usize);
    let mut start = 0;
    while start + full <= total {
        windows.push(ObservationWindow::new(start, start + full, fps)?);
        start += full;
    }
    let rest = total - start;
    if rest > 0 && rest as f64 >= partial_threshold * full as f64 {
        let mut tail = ObservationWindow::new(start, total, fps)?;
        tail.partial = true;
        windows.push(tail);
    }
    Ok(windows)
}

/// Maps a `(start_s, end_s)` period onto the frame grid of `stream`.
pub fn period_window(
    stream: &LabelStream,
    start_s: f64,
    end_s: f64,
) -> Result<ObservationWindow, AnalyticsError> {
    let fps = stream.fps();
    let duration = stream.duration_s();
    let out_of_range = || AnalyticsError::PeriodOutOfRange {
        start_s,
        end_s,
        duration_s: duration,
    };
    if !(start_s.is_finite() && end_s.is_finite()) || start_s < 0.0 || end_s > duration + 0.5 / fps
    {
        return Err(out_of_range());
    }
    let start = (start_s * fps).round() as u64;
    let end = ((end_s * fps).round() as u64).min(stream.frame_count());
    if end <= start {
        return Err(out_of_range());
    }
    Ok(ObservationWindow::new(start, end, fps)?)
}

/// The stretches of the session not covered by `periods`, as contiguous
/// intervals in seconds. Periods are expected sorted and non-overlapping.
pub fn complement_periods(periods: &[(f64, f64)], duration_s: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut cursor = 0.0;
    for &(start, end) in periods {
        if start > cursor {
            out.push((cursor, start));
        }
        cursor = f64::max(cursor, end);
    }
    if duration_s > cursor {
        out.push((cursor, duration_s));
    }
    out
}

/// Attention features of the subject's gaze for each period. `None` marks a
/// period without any detected frame.
pub fn period_features(
    stream: &LabelStream,
    periods: &[(f64, f64)],
    opts: SegmentOptions,
) -> Result<Vec<Option<AttentionFeatures>>, AnalyticsError> {
    periods
        .iter()
        .map(|&(start, end)| {
            let window = period_window(stream, start, end)?;
            defined(window_attention(
                &stream.gaze_labels(Subject::Pwd, window.start_frame, window.end_frame),
                &window,
                stream.fps(),
                opts,
            ))
        })
        .collect()
}

/// As [`period_features`] over the complement of `periods`: the
/// not-engaged stretches between and around them. Slivers shorter than one
/// frame are skipped.
pub fn complement_features(
    stream: &LabelStream,
    periods: &[(f64, f64)],
    opts: SegmentOptions,
) -> Result<Vec<Option<AttentionFeatures>>, AnalyticsError> {
    let rest: Vec<_> = complement_periods(periods, stream.duration_s())
        .into_iter()
        .filter(|&(s, e)| period_window(stream, s, e).is_ok())
        .collect();
    period_features(stream, &rest, opts)
}

fn defined<T>(r: Result<T, AnalyticsError>) -> Result<Option<T>, AnalyticsError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(AnalyticsError::EmptyWindow) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Everything computed for one window of a session.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowFeatures {
    pub session_id: String,
    pub window_index: usize,
    pub window: ObservationWindow,
    pub attention: Option<AttentionFeatures>,
    pub pwd_attitude: Option<AttitudeFeatures>,
    pub facilitator_attitude: Option<AttitudeFeatures>,
}

/// Attention and attitude features for every window of the session.
pub fn session_features(
    stream: &LabelStream,
    window_seconds: f64,
    opts: SegmentOptions,
) -> Result<Vec<WindowFeatures>, AnalyticsError> {
    let has_facilitator = stream.has_subject(Subject::Facilitator);
    windowize(stream, window_seconds)?
        .into_iter()
        .enumerate()
        .map(|(window_index, window)| {
            let (s, e) = (window.start_frame, window.end_frame);
            let attention = defined(window_attention(
                &stream.gaze_labels(Subject::Pwd, s, e),
                &window,
                stream.fps(),
                opts,
            ))?;
            let pwd_attitude = defined(attitude_features(
                &stream.emotion_labels(Subject::Pwd, s, e),
                &window,
            ))?;
            let facilitator_attitude = if has_facilitator {
                defined(attitude_features(
                    &stream.emotion_labels(Subject::Facilitator, s, e),
                    &window,
                ))?
            } else {
                None
            };
            Ok(WindowFeatures {
                session_id: stream.session_id().to_string(),
                window_index,
                window,
                attention,
                pwd_attitude,
                facilitator_attitude,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EmotionLabel, FrameRecord, GazeEntity};

    fn stream_of(labels: &[GazeEntity], fps: f64) -> LabelStream {
        let records = labels
            .iter()
            .enumerate()
            .map(|(i, &gaze)| FrameRecord {
                frame_index: i as u64,
                subject: Subject::Pwd,
                gaze,
                emotion: EmotionLabel::Neutral,
            })
            .collect();
        LabelStream::new("t", fps, records).unwrap()
    }

    fn seconds_stream(seconds: usize) -> LabelStream {
        stream_of(&vec![GazeEntity::Tablet; seconds], 1.0)
    }

    #[test]
    fn full_windows_only() {
        let w = windowize(&seconds_stream(600), 300.0).unwrap();
        assert_eq!(w.len(), 2);
        assert!(w.iter().all(|w| !w.partial));
    }

    #[test]
    fn partial_tail_kept_at_half() {
        let w = windowize(&seconds_stream(760), 300.0).unwrap();
        assert_eq!(w.len(), 3);
        assert!(w[2].partial);
        assert_eq!(w[2].duration_s, 160.0);
        // Exactly half is kept.
        assert_eq!(windowize(&seconds_stream(750), 300.0).unwrap().len(), 3);
    }

    #[test]
    fn short_tail_dropped() {
        let w = windowize(&seconds_stream(720), 300.0).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w[1].end_frame, 600);
    }

    #[test]
    fn invalid_window_lengths() {
        let s = seconds_stream(10);
        assert!(windowize(&s, 0.0).is_err());
        assert!(windowize(&s, -1.0).is_err());
        assert!(windowize(&s, 0.5).is_err());
        assert!(windowize(&s, f64::NAN).is_err());
    }

    #[test]
    fn complement_intervals() {
        assert_eq!(
            complement_periods(&[(30.0, 210.0), (300.0, 400.0)], 500.0),
            vec![(0.0, 30.0), (210.0, 300.0), (400.0, 500.0)]
        );
        assert!(complement_periods(&[(0.0, 10.0)], 10.0).is_empty());
    }

    #[test]
    fn whole_stream_period_equals_whole_window() {
        use GazeEntity::*;
        let s = stream_of(
            &[Tablet, Tablet, Elsewhere, Facilitator, Tablet, Undetected],
            2.0,
        );
        let p = period_features(&s, &[(0.0, 3.0)], SegmentOptions::default()).unwrap();
        let w = ObservationWindow::new(0, 6, 2.0).unwrap();
        let whole = window_attention(
            &s.gaze_labels(Subject::Pwd, 0, 6),
            &w,
            2.0,
            SegmentOptions::default(),
        )
        .unwrap();
        assert_eq!(p, vec![Some(whole)]);
    }

    #[test]
    fn period_range_checked() {
        let s = seconds_stream(100);
        assert!(period_window(&s, 0.0, 101.0).is_err());
        assert!(period_window(&s, -1.0, 10.0).is_err());
        assert!(period_window(&s, 20.0, 20.0).is_err());
        assert!(period_window(&s, 0.0, 100.0).is_ok());
    }

    #[test]
    fn session_features_cover_windows() {
        let s = seconds_stream(600);
        let rows = session_features(&s, 300.0, SegmentOptions::default()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].attention.as_ref().unwrap().proportion[0], 1.0);
        assert_eq!(rows[1].pwd_attitude.unwrap().prop_positive, 1.0);
        assert!(rows[0].facilitator_attitude.is_none());
    }
}
