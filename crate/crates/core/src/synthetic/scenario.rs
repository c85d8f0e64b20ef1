//! Validation scenarios: sessions whose gaze behaviour is tied to synthetic
//! expert scores in a known direction.

use crate::model::{GazeEntity, LabelStream, MpesScore, OmePeriod};

use super::{push_frame, Generator, Regime, SeededRng, SyntheticError};

/// Frames drawn independently with the given entity probabilities.
fn iid_regime(probs: [f64; 3], dwell_min_frames: u64) -> Regime {
    Regime {
        matrix: [probs; 3],
        dwell_min_frames,
        emotions: [1.0 / 7.0; 7],
        undetected_rate: 0.0,
        positive_affect_coupling: 0.0,
        facilitator_emotions: None,
    }
}

fn split_rest(tablet: f64) -> [f64; 3] {
    let rest = (1.0 - tablet) / 2.0;
    [tablet, rest, 1.0 - tablet - rest]
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmeScenario {
    pub seed: u64,
    pub fps: f64,
    pub sessions: usize,
    /// Engaged periods per session; each is preceded by a not-engaged one
    /// and the session ends with a not-engaged stretch.
    pub engaged_per_session: usize,
    pub engaged_tablet_p: f64,
    pub other_tablet_p: f64,
    pub min_segment_s: f64,
    pub max_segment_s: f64,
}

impl Default for OmeScenario {
    fn default() -> Self {
        Self {
            seed: 2024,
            fps: 5.0,
            sessions: 7,
            engaged_per_session: 8,
            engaged_tablet_p: 0.8,
            other_tablet_p: 0.3,
            min_segment_s: 20.0,
            max_segment_s: 60.0,
        }
    }
}

/// A session with its OME engagement periods.
#[derive(Debug, Clone, PartialEq)]
pub struct OmeSession {
    pub stream: LabelStream,
    pub periods: Vec<OmePeriod>,
}

impl OmeScenario {
    /// Sessions alternating not-engaged and engaged segments of random
    /// whole-second lengths. Per frame the subject looks at the tablet with
    /// the segment's probability and splits the rest evenly.
    pub fn generate(&self) -> Result<Vec<OmeSession>, SyntheticError> {
        let mut rng = SeededRng::new(self.seed);
        let engaged = iid_regime(split_rest(self.engaged_tablet_p), 1);
        let other = iid_regime(split_rest(self.other_tablet_p), 1);
        let span = (self.max_segment_s - self.min_segment_s).max(0.0) as u64 + 1;
        (0..self.sessions)
            .map(|s| {
                let mut gen = Generator::new(rng.next_u64(), GazeEntity::Elsewhere);
                let mut records = Vec::new();
                let mut periods = Vec::new();
                let mut frame = 0u64;
                let mut seconds = 0.0;
                for k in 0..=2 * self.engaged_per_session {
                    let is_engaged = k % 2 == 1;
                    let len_s = self.min_segment_s + rng.below(span) as f64;
                    let frames = (len_s * self.fps).round() as u64;
                    let regime = if is_engaged { &engaged } else { &other };
                    for _ in 0..frames {
                        push_frame(&mut records, frame, gen.step(regime));
                        frame += 1;
                    }
                    if is_engaged {
                        periods.push(OmePeriod {
                            start_s: seconds,
                            end_s: seconds + len_s,
                            attention: 4 + rng.below(4) as u8,
                            attitude: 3 + rng.below(5) as u8,
                        });
                    }
                    seconds += len_s;
                }
                let stream = LabelStream::new(format!("ome-{s}"), self.fps, records)?;
                Ok(OmeSession { stream, periods })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpesScenario {
    pub seed: u64,
    pub fps: f64,
    pub windows: usize,
    pub window_s: f64,
    pub dwell_min_frames: u64,
}

impl Default for MpesScenario {
    fn default() -> Self {
        Self {
            seed: 130,
            fps: 2.0,
            windows: 130,
            window_s: 300.0,
            dwell_min_frames: 3,
        }
    }
}

/// One long session cut into MPES windows, plus a score per window.
#[derive(Debug, Clone, PartialEq)]
pub struct MpesSession {
    pub stream: LabelStream,
    pub scores: Vec<MpesScore>,
}

impl MpesScenario {
    /// Windows whose active-engagement score (0, 1, 2) raises tablet gaze
    /// (0.25, 0.5, 0.75 per frame) at the expense of facilitator gaze.
    /// Passive and other scores are independent noise. The pleasure score
    /// (0, 1, 2) raises the facilitator's share of happy or neutral frames,
    /// blurred by a per-window random offset.
    pub fn generate(&self) -> Result<MpesSession, SyntheticError> {
        let mut rng = SeededRng::new(self.seed);
        let mut gen = Generator::new(rng.next_u64(), GazeEntity::Tablet);
        let frames_per_window = crate::analytics::window_frames(self.window_s, self.fps);
        let mut records = Vec::new();
        let mut scores = Vec::with_capacity(self.windows);
        let mut frame = 0;
        for w in 0..self.windows {
            let active = rng.below(3) as u8;
            let passive = rng.below(3) as u8;
            let other = rng.below(3) as u8;
            let pleasure = rng.below(3) as u8;

            let tablet = 0.25 + 0.25 * f64::from(active);
            let facilitator = (1.0 - tablet) * 0.7;
            let probs = [tablet, facilitator, 1.0 - tablet - facilitator];

            let positive =
                (0.3 + 0.2 * f64::from(pleasure) + rng.range(-0.25, 0.25)).clamp(0.05, 0.95);
            // happiness and neutral share `positive`; the other five share the rest.
            let rest = (1.0 - positive) / 5.0;
            let facilitator_emotions = [
                rest,
                rest,
                rest,
                positive / 2.0,
                rest,
                rest,
                1.0 - positive / 2.0 - 5.0 * rest,
            ];
            let regime = Regime {
                facilitator_emotions: Some(facilitator_emotions),
                undetected_rate: 0.05,
                ..iid_regime(probs, self.dwell_min_frames)
            };
            for _ in 0..frames_per_window {
                push_frame(&mut records, frame, gen.step(&regime));
                frame += 1;
            }
            scores.push(MpesScore {
                window_index: w as u64,
                active,
                passive,
                other,
                pleasure: Some(f64::from(pleasure)),
            });
        }
        let stream = LabelStream::new("mpes", self.fps, records)?;
        Ok(MpesSession { stream, scores })
    }
}
