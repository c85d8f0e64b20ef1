//! Domain values shared by every stage of the pipeline.
//!
//! Everything here is an immutable value once constructed. Constructors
//! enforce the invariants; fields stay public for read access only where
//! mutation cannot break an invariant.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("unknown gaze token `{0}`")]
    UnknownGaze(String),
    #[error("unknown emotion token `{0}`")]
    UnknownEmotion(String),
    #[error("unknown subject token `{0}`")]
    UnknownSubject(String),
    #[error("label stream is empty")]
    EmptyStream,
    #[error("fps must be a positive finite number, got {0}")]
    InvalidFps(f64),
    #[error("duplicate frame {frame} for subject {subject}")]
    DuplicateFrame { subject: Subject, frame: u64 },
    #[error("frame {frame} for subject {subject} is not after frame {previous}")]
    NonMonotonicFrames {
        subject: Subject,
        frame: u64,
        previous: u64,
    },
    #[error("rect `{name}` must have positive finite width and height")]
    InvalidRect { name: String },
    #[error("rect `{name}` lies outside the {width}x{height} frame")]
    OutOfBounds {
        name: String,
        width: u32,
        height: u32,
    },
    #[error("frame dimensions must be positive")]
    InvalidFrameSize,
    #[error("window end {end} must be after start {start}")]
    EmptyWindowRange { start: u64, end: u64 },
}

/// Where the subject is looking in a given frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GazeEntity {
    Tablet,
    Facilitator,
    Elsewhere,
    Undetected,
}

impl GazeEntity {
    /// The three-entity analytics alphabet, in feature order.
    pub const ENTITIES: [GazeEntity; 3] = [
        GazeEntity::Tablet,
        GazeEntity::Facilitator,
        GazeEntity::Elsewhere,
    ];

    /// Position in [`GazeEntity::ENTITIES`]; `None` for `Undetected`.
    pub fn index(self) -> Option<usize> {
        match self {
            GazeEntity::Tablet => Some(0),
            GazeEntity::Facilitator => Some(1),
            GazeEntity::Elsewhere => Some(2),
            GazeEntity::Undetected => None,
        }
    }

    pub fn is_detected(self) -> bool {
        self != GazeEntity::Undetected
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GazeEntity::Tablet => "tablet",
            GazeEntity::Facilitator => "facilitator",
            GazeEntity::Elsewhere => "elsewhere",
            GazeEntity::Undetected => "undetected",
        }
    }
}

impl fmt::Display for GazeEntity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GazeEntity {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tablet" => Ok(GazeEntity::Tablet),
            "facilitator" => Ok(GazeEntity::Facilitator),
            "elsewhere" => Ok(GazeEntity::Elsewhere),
            "undetected" => Ok(GazeEntity::Undetected),
            other => Err(ModelError::UnknownGaze(other.to_string())),
        }
    }
}

/// Affect bucket of an emotion label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Valence {
    Positive,
    Negative,
}

/// Per-frame facial emotion: six basic emotions, neutral, or no face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionLabel {
    Anger,
    Disgust,
    Fear,
    Happiness,
    Sadness,
    Surprise,
    Neutral,
    Undetected,
}

impl EmotionLabel {
    /// The seven detector classes, in the order used by probability vectors.
    pub const CLASSES: [EmotionLabel; 7] = [
        EmotionLabel::Anger,
        EmotionLabel::Disgust,
        EmotionLabel::Fear,
        EmotionLabel::Happiness,
        EmotionLabel::Sadness,
        EmotionLabel::Surprise,
        EmotionLabel::Neutral,
    ];

    /// Neutral and happiness are positive; anger, sadness and disgust are
    /// negative. Fear and surprise belong to neither bucket.
    pub fn valence(self) -> Option<Valence> {
        match self {
            EmotionLabel::Neutral | EmotionLabel::Happiness => Some(Valence::Positive),
            EmotionLabel::Anger | EmotionLabel::Sadness | EmotionLabel::Disgust => {
                Some(Valence::Negative)
            }
            EmotionLabel::Fear | EmotionLabel::Surprise | EmotionLabel::Undetected => None,
        }
    }

    pub fn is_detected(self) -> bool {
        self != EmotionLabel::Undetected
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EmotionLabel::Anger => "anger",
            EmotionLabel::Disgust => "disgust",
            EmotionLabel::Fear => "fear",
            EmotionLabel::Happiness => "happiness",
            EmotionLabel::Sadness => "sadness",
            EmotionLabel::Surprise => "surprise",
            EmotionLabel::Neutral => "neutral",
            EmotionLabel::Undetected => "undetected",
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmotionLabel {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "anger" => Ok(EmotionLabel::Anger),
            "disgust" => Ok(EmotionLabel::Disgust),
            "fear" => Ok(EmotionLabel::Fear),
            "happiness" => Ok(EmotionLabel::Happiness),
            "sadness" => Ok(EmotionLabel::Sadness),
            "surprise" => Ok(EmotionLabel::Surprise),
            "neutral" => Ok(EmotionLabel::Neutral),
            "undetected" => Ok(EmotionLabel::Undetected),
            other => Err(ModelError::UnknownEmotion(other.to_string())),
        }
    }
}

/// Who a frame record describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subject {
    Pwd,
    Facilitator,
}

impl Subject {
    pub fn as_str(self) -> &'static str {
        match self {
            Subject::Pwd => "pwd",
            Subject::Facilitator => "facilitator",
        }
    }
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Subject {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pwd" => Ok(Subject::Pwd),
            "facilitator" => Ok(Subject::Facilitator),
            other => Err(ModelError::UnknownSubject(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameRecord {
    pub frame_index: u64,
    pub subject: Subject,
    pub gaze: GazeEntity,
    pub emotion: EmotionLabel,
}

impl FrameRecord {
    /// Timestamps are always derived, never stored.
    pub fn timestamp(&self, fps: f64) -> f64 {
        self.frame_index as f64 / fps
    }
}

/// All frame records of one recorded session.
///
/// Records are kept sorted by `(frame_index, subject)`. Frames absent for a
/// subject are treated as undetected by the dense accessors.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelStream {
    session_id: String,
    fps: f64,
    records: Vec<FrameRecord>,
}

impl LabelStream {
    /// Validates per-subject ordering and uniqueness, then sorts by frame.
    ///
    /// Records must already be strictly increasing in `frame_index` for each
    /// subject (interleaving between subjects is free).
    pub fn new(
        session_id: impl Into<String>,
        fps: f64,
        records: Vec<FrameRecord>,
    ) -> Result<Self, ModelError> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(ModelError::InvalidFps(fps));
        }
        if records.is_empty() {
            return Err(ModelError::EmptyStream);
        }
        let mut last: [Option<u64>; 2] = [None, None];
        for rec in &records {
            let slot = &mut last[rec.subject as usize];
            if let Some(previous) = *slot {
                if rec.frame_index == previous {
                    return Err(ModelError::DuplicateFrame {
                        subject: rec.subject,
                        frame: rec.frame_index,
                    });
                }
                if rec.frame_index < previous {
                    return Err(ModelError::NonMonotonicFrames {
                        subject: rec.subject,
                        frame: rec.frame_index,
                        previous,
                    });
                }
            }
            *slot = Some(rec.frame_index);
        }
        let mut records = records;
        records.sort_by_key(|r| (r.frame_index, r.subject));
        Ok(Self {
            session_id: session_id.into(),
            fps,
            records,
        })
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn records(&self) -> &[FrameRecord] {
        &self.records
    }

    /// Number of frames spanned, counting from frame 0.
    pub fn frame_count(&self) -> u64 {
        self.records.last().map_or(0, |r| r.frame_index + 1)
    }

    pub fn duration_s(&self) -> f64 {
        self.frame_count() as f64 / self.fps
    }

    pub fn has_subject(&self, subject: Subject) -> bool {
        self.records.iter().any(|r| r.subject == subject)
    }

    /// Dense gaze labels for `subject` over frames `[start, end)`.
    pub fn gaze_labels(&self, subject: Subject, start: u64, end: u64) -> Vec<GazeEntity> {
        self.dense(subject, start, end, GazeEntity::Undetected, |r| r.gaze)
    }

    /// Dense emotion labels for `subject` over frames `[start, end)`.
    pub fn emotion_labels(&self, subject: Subject, start: u64, end: u64) -> Vec<EmotionLabel> {
        self.dense(subject, start, end, EmotionLabel::Undetected, |r| r.emotion)
    }

    fn dense<T: Copy>(
        &self,
        subject: Subject,
        start: u64,
        end: u64,
        missing: T,
        pick: impl Fn(&FrameRecord) -> T,
    ) -> Vec<T> {
        let len = end.saturating_sub(start) as usize;
        let mut out = vec![missing; len];
        let first = self.records.partition_point(|r| r.frame_index < start);
        for rec in self.records[first..]
            .iter()
            .take_while(|r| r.frame_index < end)
            .filter(|r| r.subject == subject)
        {
            out[(rec.frame_index - start) as usize] = pick(rec);
        }
        out
    }
}

/// Axis-aligned box in pixel coordinates, half-open: `[x, x+w) × [y, y+h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    #[serde(rename = "w")]
    pub width: f64,
    #[serde(rename = "h")]
    pub height: f64,
}

impl Rect {
    pub fn new(x: f64, y: f64, width: f64, height: f64) -> Result<Self, ModelError> {
        let rect = Self {
            x,
            y,
            width,
            height,
        };
        rect.check("rect")?;
        Ok(rect)
    }

    fn check(&self, name: &str) -> Result<(), ModelError> {
        let finite = [self.x, self.y, self.width, self.height]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.width <= 0.0 || self.height <= 0.0 {
            return Err(ModelError::InvalidRect {
                name: name.to_string(),
            });
        }
        Ok(())
    }

    pub fn contains(&self, px: f64, py: f64) -> bool {
        px >= self.x && px < self.x + self.width && py >= self.y && py < self.y + self.height
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.width / 2.0, self.y + self.height / 2.0)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Rect {
        Rect {
            x: self.x + dx,
            y: self.y + dy,
            ..*self
        }
    }

    fn within(&self, width: f64, height: f64) -> bool {
        self.x >= 0.0
            && self.y >= 0.0
            && self.x + self.width <= width
            && self.y + self.height <= height
    }
}

/// The three boxes a user marks on the first frame of a session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionConfig {
    pub frame_width: u32,
    pub frame_height: u32,
    pub target_activity_space: Rect,
    pub facilitator: Rect,
    pub subject: Rect,
}

impl RegionConfig {
    pub fn new(
        frame_width: u32,
        frame_height: u32,
        target_activity_space: Rect,
        facilitator: Rect,
        subject: Rect,
    ) -> Result<Self, ModelError> {
        if frame_width == 0 || frame_height == 0 {
            return Err(ModelError::InvalidFrameSize);
        }
        let config = Self {
            frame_width,
            frame_height,
            target_activity_space,
            facilitator,
            subject,
        };
        for (name, rect) in config.named_rects() {
            rect.check(name)?;
            if !rect.within(frame_width as f64, frame_height as f64) {
                return Err(ModelError::OutOfBounds {
                    name: name.to_string(),
                    width: frame_width,
                    height: frame_height,
                });
            }
        }
        Ok(config)
    }

    pub fn named_rects(&self) -> [(&'static str, Rect); 3] {
        [
            ("target_activity_space", self.target_activity_space),
            ("facilitator", self.facilitator),
            ("subject", self.subject),
        ]
    }
}

/// A span of frames `[start_frame, end_frame)` analysed as one unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationWindow {
    pub start_frame: u64,
    pub end_frame: u64,
    pub duration_s: f64,
    /// Trailing window shorter than the requested length.
    pub partial: bool,
}

impl ObservationWindow {
    pub fn new(start_frame: u64, end_frame: u64, fps: f64) -> Result<Self, ModelError> {
        if end_frame <= start_frame {
            return Err(ModelError::EmptyWindowRange {
                start: start_frame,
                end: end_frame,
            });
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(ModelError::InvalidFps(fps));
        }
        Ok(Self {
            start_frame,
            end_frame,
            duration_s: (end_frame - start_frame) as f64 / fps,
            partial: false,
        })
    }

    pub fn frames(&self) -> u64 {
        self.end_frame - self.start_frame
    }
}

/// A maximal run of focus on one entity.
///
/// `start_frame..end_frame` is the span; `detected_frames` counts only the
/// frames with a detector output inside it (they differ only when gap
/// bridging is enabled). `duration_s` is `detected_frames / fps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub entity: GazeEntity,
    pub start_frame: u64,
    pub end_frame: u64,
    pub detected_frames: u64,
    pub duration_s: f64,
}

/// Number of gaze-derived attention features.
pub const ATTENTION_FEATURE_COUNT: usize = 21;

/// Column names of [`AttentionFeatures::to_vector`], in order.
pub const ATTENTION_FEATURE_NAMES: [&str; ATTENTION_FEATURE_COUNT] = [
    "prop_tablet",
    "prop_facilitator",
    "prop_elsewhere",
    "ep_mean_tablet",
    "ep_std_tablet",
    "ep_mean_facilitator",
    "ep_std_facilitator",
    "ep_mean_elsewhere",
    "ep_std_elsewhere",
    "trans_tablet_facilitator",
    "trans_tablet_elsewhere",
    "trans_facilitator_tablet",
    "trans_facilitator_elsewhere",
    "trans_elsewhere_tablet",
    "trans_elsewhere_facilitator",
    "flux_in_tablet",
    "flux_out_tablet",
    "flux_in_facilitator",
    "flux_out_facilitator",
    "flux_in_elsewhere",
    "flux_out_elsewhere",
];

/// Gaze statistics for one window. Arrays are indexed by
/// [`GazeEntity::index`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionFeatures {
    pub proportion: [f64; 3],
    pub episode_mean_s: [f64; 3],
    pub episode_std_s: [f64; 3],
    pub episode_count: [u64; 3],
    /// Joint probability of an episode of `[from][to]` followed directly by
    /// one of `to`. The diagonal is always zero.
    pub transition: [[f64; 3]; 3],
    pub flux_in: [f64; 3],
    pub flux_out: [f64; 3],
    pub transition_count: u64,
    pub detected_frames: u64,
    pub window_frames: u64,
    pub detected_coverage: f64,
}

impl AttentionFeatures {
    pub fn prop(&self, entity: GazeEntity) -> f64 {
        entity.index().map_or(0.0, |i| self.proportion[i])
    }

    pub fn trans(&self, from: GazeEntity, to: GazeEntity) -> f64 {
        match (from.index(), to.index()) {
            (Some(a), Some(b)) => self.transition[a][b],
            _ => 0.0,
        }
    }

    /// The 21 analytics values in [`ATTENTION_FEATURE_NAMES`] order.
    pub fn to_vector(&self) -> [f64; ATTENTION_FEATURE_COUNT] {
        let t = &self.transition;
        [
            self.proportion[0],
            self.proportion[1],
            self.proportion[2],
            self.episode_mean_s[0],
            self.episode_std_s[0],
            self.episode_mean_s[1],
            self.episode_std_s[1],
            self.episode_mean_s[2],
            self.episode_std_s[2],
            t[0][1],
            t[0][2],
            t[1][0],
            t[1][2],
            t[2][0],
            t[2][1],
            self.flux_in[0],
            self.flux_out[0],
            self.flux_in[1],
            self.flux_out[1],
            self.flux_in[2],
            self.flux_out[2],
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttitudeFeatures {
    pub prop_positive: f64,
    pub prop_negative: f64,
    pub detected_coverage: f64,
}

/// One MPES-coded window: three engagement items on {0, 1, 2}, plus an
/// optional pleasure rating used for the affect analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpesScore {
    pub window_index: u64,
    pub active: u8,
    pub passive: u8,
    pub other: u8,
    pub pleasure: Option<f64>,
}

/// An OME engagement period, ratings on 1..=7.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmePeriod {
    pub start_s: f64,
    pub end_s: f64,
    pub attention: u8,
    pub attitude: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scale", content = "entries")]
pub enum BosAnnotation {
    #[serde(rename = "MPES")]
    Mpes(Vec<MpesScore>),
    #[serde(rename = "OME")]
    Ome(Vec<OmePeriod>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BosScale {
    Mpes,
    Ome,
}

impl FromStr for BosScale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "MPES" => Ok(BosScale::Mpes),
            "OME" => Ok(BosScale::Ome),
            other => Err(format!("unknown scale `{other}`, expected MPES or OME")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(frame: u64, subject: Subject) -> FrameRecord {
        FrameRecord {
            frame_index: frame,
            subject,
            gaze: GazeEntity::Tablet,
            emotion: EmotionLabel::Neutral,
        }
    }

    #[test]
    fn undetected_is_outside_the_alphabet() {
        assert!(!GazeEntity::ENTITIES.contains(&GazeEntity::Undetected));
        assert_eq!(GazeEntity::Undetected.index(), None);
        for (i, e) in GazeEntity::ENTITIES.iter().enumerate() {
            assert_eq!(e.index(), Some(i));
        }
    }

    #[test]
    fn tokens_round_trip() {
        for g in GazeEntity::ENTITIES.iter().chain([&GazeEntity::Undetected]) {
            assert_eq!(g.as_str().parse::<GazeEntity>().unwrap(), *g);
        }
        for e in EmotionLabel::CLASSES
            .iter()
            .chain([&EmotionLabel::Undetected])
        {
            assert_eq!(e.as_str().parse::<EmotionLabel>().unwrap(), *e);
        }
        assert!("Tablet".parse::<GazeEntity>().is_err());
    }

    #[test]
    fn valence_buckets() {
        use EmotionLabel::*;
        assert_eq!(Happiness.valence(), Some(Valence::Positive));
        assert_eq!(Neutral.valence(), Some(Valence::Positive));
        for e in [Anger, Sadness, Disgust] {
            assert_eq!(e.valence(), Some(Valence::Negative));
        }
        for e in [Fear, Surprise, Undetected] {
            assert_eq!(e.valence(), None);
        }
    }

    #[test]
    fn stream_rejects_duplicates_and_reordering() {
        let dup = vec![rec(0, Subject::Pwd), rec(0, Subject::Pwd)];
        assert!(matches!(
            LabelStream::new("s", 1.0, dup),
            Err(ModelError::DuplicateFrame { frame: 0, .. })
        ));
        let back = vec![rec(3, Subject::Pwd), rec(1, Subject::Pwd)];
        assert!(matches!(
            LabelStream::new("s", 1.0, back),
            Err(ModelError::NonMonotonicFrames { .. })
        ));
        assert_eq!(
            LabelStream::new("s", 1.0, vec![]),
            Err(ModelError::EmptyStream)
        );
        assert!(LabelStream::new("s", 0.0, vec![rec(0, Subject::Pwd)]).is_err());
    }

    #[test]
    fn subjects_may_share_frames() {
        let s = LabelStream::new(
            "s",
            2.0,
            vec![
                rec(0, Subject::Pwd),
                rec(0, Subject::Facilitator),
                rec(2, Subject::Pwd),
            ],
        )
        .unwrap();
        assert_eq!(s.frame_count(), 3);
        assert_eq!(s.duration_s(), 1.5);
        assert_eq!(
            s.gaze_labels(Subject::Pwd, 0, 3),
            vec![
                GazeEntity::Tablet,
                GazeEntity::Undetected,
                GazeEntity::Tablet
            ]
        );
        assert_eq!(s.gaze_labels(Subject::Pwd, 1, 3).len(), 2);
    }

    #[test]
    fn rect_is_half_open() {
        let r = Rect::new(10.0, 10.0, 5.0, 5.0).unwrap();
        assert!(r.contains(10.0, 10.0));
        assert!(r.contains(14.999, 14.999));
        assert!(!r.contains(15.0, 12.0));
        assert!(!r.contains(12.0, 15.0));
        assert!(Rect::new(0.0, 0.0, -5.0, 1.0).is_err());
        assert!(Rect::new(0.0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn regions_must_fit_the_frame() {
        let ok = Rect::new(100.0, 400.0, 300.0, 200.0).unwrap();
        assert!(RegionConfig::new(1280, 720, ok, ok, ok).is_ok());
        let wide = Rect::new(1200.0, 0.0, 100.0, 10.0).unwrap();
        assert!(matches!(
            RegionConfig::new(1280, 720, ok, wide, ok),
            Err(ModelError::OutOfBounds { ref name, .. }) if name == "facilitator"
        ));
    }

    #[test]
    fn window_requires_positive_span() {
        assert!(ObservationWindow::new(5, 5, 1.0).is_err());
        let w = ObservationWindow::new(0, 300, 10.0).unwrap();
        assert_eq!(w.duration_s, 30.0);
        assert_eq!(w.frames(), 300);
    }

    #[test]
    fn feature_vector_has_21_named_slots() {
        assert_eq!(ATTENTION_FEATURE_NAMES.len(), 21);
        let mut names = ATTENTION_FEATURE_NAMES.to_vec();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 21);
    }
}
