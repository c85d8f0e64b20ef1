use crate::model::{
    AttentionFeatures, AttitudeFeatures, EmotionLabel, Episode, GazeEntity, ObservationWindow,
    Valence,
};

use super::episodes::{EpisodeBuilder, SegmentOptions};
use super::AnalyticsError;

/// Integer tallies from which every attention feature is derived. Episode
/// lengths are kept in frames so mean and variance are exact up to the final
/// division.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub(crate) struct EpisodeTally {
    frames: [u64; 3],
    episodes: [u64; 3],
    sum: [u64; 3],
    sum_sq: [u128; 3],
    transitions: [[u64; 3]; 3],
    last: Option<(usize, u64)>,
}

impl EpisodeTally {
    pub(crate) fn add(&mut self, episode: &Episode) {
        let Some(i) = episode.entity.index() else {
            return;
        };
        let len = episode.detected_frames;
        self.frames[i] += len;
        self.episodes[i] += 1;
        self.sum[i] += len;
        self.sum_sq[i] += u128::from(len) * u128::from(len);
        if let Some((prev, prev_end)) = self.last {
            if prev_end == episode.start_frame && prev != i {
                self.transitions[prev][i] += 1;
            }
        }
        self.last = Some((i, episode.end_frame));
    }

    pub(crate) fn finish(
        &self,
        window_frames: u64,
        fps: f64,
    ) -> Result<AttentionFeatures, AnalyticsError> {
        let detected: u64 = self.frames.iter().sum();
        if detected == 0 {
            return Err(AnalyticsError::EmptyWindow);
        }

        let mut proportion = [0.0; 3];
        let mut episode_mean_s = [0.0; 3];
        let mut episode_std_s = [0.0; 3];
        for i in 0..3 {
            proportion[i] = self.frames[i] as f64 / detected as f64;
            let n = self.episodes[i];
            if n > 0 {
                episode_mean_s[i] = self.sum[i] as f64 / n as f64 / fps;
                // n·Σx² − (Σx)² is exact and non-negative in integers.
                let n = u128::from(n);
                let s = u128::from(self.sum[i]);
                let spread = n * self.sum_sq[i] - s * s;
                episode_std_s[i] = (spread as f64 / (n * n) as f64).sqrt() / fps;
            }
        }

        let total: u64 = self.transitions.iter().flatten().sum();
        let mut transition = [[0.0; 3]; 3];
        if total > 0 {
            for (a, row) in self.transitions.iter().enumerate() {
                for (b, &count) in row.iter().enumerate() {
                    transition[a][b] = count as f64 / total as f64;
                }
            }
        }
        let (flux_in, flux_out) = flux(&transition);

        Ok(AttentionFeatures {
            proportion,
            episode_mean_s,
            episode_std_s,
            episode_count: self.episodes,
            transition,
            flux_in,
            flux_out,
            transition_count: total,
            detected_frames: detected,
            window_frames,
            detected_coverage: detected as f64 / window_frames as f64,
        })
    }
}

/// Marginal flux into and out of each entity, summed from the joint
/// transition terms in ascending source/target order.
pub fn flux(transition: &[[f64; 3]; 3]) -> ([f64; 3], [f64; 3]) {
    let mut flux_in = [0.0; 3];
    let mut flux_out = [0.0; 3];
    for x in 0..3 {
        flux_in[x] = (0..3).filter(|&a| a != x).map(|a| transition[a][x]).sum();
        flux_out[x] = (0..3).filter(|&b| b != x).map(|b| transition[x][b]).sum();
    }
    (flux_in, flux_out)
}

/// The 21 gaze features of one window from its episodes.
///
/// Proportions are taken over the frames covered by episodes (all detected
/// frames of the window). Transitions are counted between episodes that
/// touch, so episodes separated by an unbridged undetected gap never form a
/// transition.
pub fn attention_features(
    episodes: &[Episode],
    window: &ObservationWindow,
    fps: f64,
) -> Result<AttentionFeatures, AnalyticsError> {
    let mut tally = EpisodeTally::default();
    for ep in episodes {
        if ep.start_frame < window.start_frame || ep.end_frame > window.end_frame {
            return Err(AnalyticsError::EpisodeOutsideWindow {
                start: ep.start_frame,
                end: ep.end_frame,
            });
        }
        tally.add(ep);
    }
    tally.finish(window.frames(), fps)
}

/// Single-pass feature computation straight from labels, without
/// materialising the episode list.
#[derive(Debug, Clone)]
pub struct StreamingAttention {
    builder: EpisodeBuilder,
    tally: EpisodeTally,
    frames: u64,
    fps: f64,
}

impl StreamingAttention {
    pub fn new(fps: f64, start_frame: u64, opts: SegmentOptions) -> Self {
        Self {
            builder: EpisodeBuilder::new(fps, start_frame, opts),
            tally: EpisodeTally::default(),
            frames: 0,
            fps,
        }
    }

    pub fn push(&mut self, label: GazeEntity) {
        let tally = &mut self.tally;
        self.builder.push(label, &mut |ep| tally.add(&ep));
        self.frames += 1;
    }

    pub fn finish(self) -> Result<AttentionFeatures, AnalyticsError> {
        let Self {
            builder,
            mut tally,
            frames,
            fps,
        } = self;
        builder.finish(&mut |ep| tally.add(&ep));
        if frames == 0 {
            return Err(AnalyticsError::EmptyWindow);
        }
        tally.finish(frames, fps)
    }
}

/// Convenience: segment `labels` (one per frame of `window`) and compute the
/// attention features in one pass.
pub fn window_attention(
    labels: &[GazeEntity],
    window: &ObservationWindow,
    fps: f64,
    opts: SegmentOptions,
) -> Result<AttentionFeatures, AnalyticsError> {
    if labels.len() as u64 != window.frames() {
        return Err(AnalyticsError::WindowMismatch {
            labels: labels.len(),
            frames: window.frames(),
        });
    }
    let mut acc = StreamingAttention::new(fps, window.start_frame, opts);
    for &label in labels {
        acc.push(label);
    }
    acc.finish()
}

/// Positive and negative affect proportions over the detected frames of a
/// window. Fear and surprise count towards the denominator only.
pub fn attitude_features(
    labels: &[EmotionLabel],
    window: &ObservationWindow,
) -> Result<AttitudeFeatures, AnalyticsError> {
    if labels.len() as u64 != window.frames() {
        return Err(AnalyticsError::WindowMismatch {
            labels: labels.len(),
            frames: window.frames(),
        });
    }
    let (mut detected, mut positive, mut negative) = (0u64, 0u64, 0u64);
    for label in labels.iter().filter(|l| l.is_detected()) {
        detected += 1;
        match label.valence() {
            Some(Valence::Positive) => positive += 1,
            Some(Valence::Negative) => negative += 1,
            None => {}
        }
    }
    if detected == 0 {
        return Err(AnalyticsError::EmptyWindow);
    }
    Ok(AttitudeFeatures {
        prop_positive: positive as f64 / detected as f64,
        prop_negative: negative as f64 / detected as f64,
        detected_coverage: detected as f64 / labels.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::segment_episodes;
    use EmotionLabel::*;
    use GazeEntity::{Elsewhere as E, Facilitator as F, Tablet as T, Undetected as U};

    fn window(n: u64) -> ObservationWindow {
        ObservationWindow::new(0, n, 1.0).unwrap()
    }

    #[test]
    fn worked_example_features() {
        let labels = [T, T, F, F, T, E];
        let eps = segment_episodes(&labels, 1.0, 0);
        let f = attention_features(&eps, &window(6), 1.0).unwrap();
        assert_eq!(f.proportion, [0.5, 1.0 / 3.0, 1.0 / 6.0]);
        let third = 1.0 / 3.0;
        assert_eq!(f.trans(T, F), third);
        assert_eq!(f.trans(F, T), third);
        assert_eq!(f.trans(T, E), third);
        assert_eq!(f.trans(F, E), 0.0);
        assert_eq!(f.trans(E, T), 0.0);
        assert_eq!(f.trans(E, F), 0.0);
        assert_eq!(f.flux_in[0], third);
        assert_eq!(f.flux_out[0], 2.0 * third);
        assert_eq!(f.episode_mean_s[0], 1.5);
        assert_eq!(f.episode_std_s[0], 0.5);
        assert_eq!(f.episode_count, [2, 1, 1]);
        assert_eq!(f.detected_coverage, 1.0);
    }

    #[test]
    fn all_tablet_is_degenerate() {
        let eps = segment_episodes(&[T; 10], 1.0, 0);
        let f = attention_features(&eps, &window(10), 1.0).unwrap();
        assert_eq!(f.proportion, [1.0, 0.0, 0.0]);
        assert_eq!(f.transition, [[0.0; 3]; 3]);
        assert_eq!(f.flux_in, [0.0; 3]);
        assert_eq!(f.flux_out, [0.0; 3]);
        assert_eq!(f.episode_std_s[0], 0.0);
        assert_eq!(f.episode_mean_s[1], 0.0);
    }

    #[test]
    fn gaps_do_not_form_transitions() {
        let eps = segment_episodes(&[T, T, U, F, F], 1.0, 0);
        let f = attention_features(&eps, &window(5), 1.0).unwrap();
        assert_eq!(f.transition_count, 0);
        assert_eq!(f.detected_coverage, 0.8);
        assert_eq!(f.proportion, [0.5, 0.5, 0.0]);
    }

    #[test]
    fn empty_window_is_flagged() {
        assert_eq!(
            attention_features(&[], &window(3), 1.0),
            Err(AnalyticsError::EmptyWindow)
        );
        assert_eq!(
            window_attention(&[U, U, U], &window(3), 1.0, SegmentOptions::default()),
            Err(AnalyticsError::EmptyWindow)
        );
    }

    #[test]
    fn episodes_must_lie_in_window() {
        let eps = segment_episodes(&[T, T, T], 1.0, 0);
        let w = ObservationWindow::new(1, 3, 1.0).unwrap();
        assert!(matches!(
            attention_features(&eps, &w, 1.0),
            Err(AnalyticsError::EpisodeOutsideWindow { .. })
        ));
    }

    #[test]
    fn streaming_matches_batch_on_example() {
        let labels = [T, T, F, U, F, T, E, E, U, U, T];
        let w = window(labels.len() as u64);
        let batch = attention_features(&segment_episodes(&labels, 2.0, 0), &w, 2.0).unwrap();
        let stream = window_attention(&labels, &w, 2.0, SegmentOptions::default()).unwrap();
        assert_eq!(batch, stream);
    }

    #[test]
    fn attitude_buckets() {
        let w = window(4);
        let a = attitude_features(&[Happiness, Sadness, Fear, Neutral], &w).unwrap();
        assert_eq!(a.prop_positive, 0.5);
        assert_eq!(a.prop_negative, 0.25);

        let a = attitude_features(&[Neutral; 4], &w).unwrap();
        assert_eq!((a.prop_positive, a.prop_negative), (1.0, 0.0));

        assert_eq!(
            attitude_features(&[EmotionLabel::Undetected; 4], &w),
            Err(AnalyticsError::EmptyWindow)
        );
        let a =
            attitude_features(&[Anger, EmotionLabel::Undetected, Disgust, Surprise], &w).unwrap();
        assert_eq!(a.prop_negative, 2.0 / 3.0);
        assert_eq!(a.detected_coverage, 0.75);
    }
}
