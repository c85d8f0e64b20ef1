//! Feature table: one CSV row per window.
//!
//! Columns, in order: `session, window_index, start_frame, end_frame,
//! duration_s, partial`, the 21 attention features, `episodes_tablet,
//! episodes_facilitator, episodes_elsewhere, transition_count,
//! detected_frames, detected_coverage, attention_defined`, then
//! `pwd_positive, pwd_negative, pwd_emotion_coverage` and the same three for
//! the facilitator. Undefined values are written as empty cells.

use std::io::{self, Read, Write};

use crate::ingest::{read_csv, IngestError};
use crate::model::{
    AttentionFeatures, AttitudeFeatures, ObservationWindow, ATTENTION_FEATURE_NAMES,
};

use super::features::flux;
use super::WindowFeatures;

const LEAD: [&str; 6] = [
    "session",
    "window_index",
    "start_frame",
    "end_frame",
    "duration_s",
    "partial",
];
const TAIL: [&str; 13] = [
    "episodes_tablet",
    "episodes_facilitator",
    "episodes_elsewhere",
    "transition_count",
    "detected_frames",
    "detected_coverage",
    "attention_defined",
    "pwd_positive",
    "pwd_negative",
    "pwd_emotion_coverage",
    "facilitator_positive",
    "facilitator_negative",
    "facilitator_emotion_coverage",
];

/// Full header of the feature table.
pub fn header() -> Vec<&'static str> {
    LEAD.iter()
        .chain(ATTENTION_FEATURE_NAMES.iter())
        .chain(TAIL.iter())
        .copied()
        .collect()
}

fn attitude_cells(a: Option<&AttitudeFeatures>) -> [String; 3] {
    match a {
        Some(a) => [
            a.prop_positive.to_string(),
            a.prop_negative.to_string(),
            a.detected_coverage.to_string(),
        ],
        None => [String::new(), String::new(), "0".to_string()],
    }
}

pub fn write_features<W: Write>(rows: &[WindowFeatures], writer: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header())?;
    for row in rows {
        let win = &row.window;
        let mut rec = vec![
            row.session_id.clone(),
            row.window_index.to_string(),
            win.start_frame.to_string(),
            win.end_frame.to_string(),
            win.duration_s.to_string(),
            win.partial.to_string(),
        ];
        match &row.attention {
            Some(a) => {
                rec.extend(a.to_vector().iter().map(f64::to_string));
                rec.extend(a.episode_count.iter().map(u64::to_string));
                rec.push(a.transition_count.to_string());
                rec.push(a.detected_frames.to_string());
                rec.push(a.detected_coverage.to_string());
                rec.push("true".into());
            }
            None => {
                rec.extend(std::iter::repeat_n(
                    String::new(),
                    ATTENTION_FEATURE_NAMES.len(),
                ));
                rec.extend(["0", "0", "0", "0", "0", "0", "false"].map(String::from));
            }
        }
        rec.extend(attitude_cells(row.pwd_attitude.as_ref()));
        rec.extend(attitude_cells(row.facilitator_attitude.as_ref()));
        w.write_record(&rec)?;
    }
    w.flush()
}

fn blank_or<T>(
    row: &crate::ingest::Row<'_>,
    i: usize,
    parse: impl FnOnce() -> Result<T, IngestError>,
) -> Result<Option<T>, IngestError> {
    if row.raw(i).is_empty() {
        Ok(None)
    } else {
        parse().map(Some)
    }
}

fn read_attitude(
    row: &crate::ingest::Row<'_>,
    at: usize,
) -> Result<Option<AttitudeFeatures>, IngestError> {
    let pos = blank_or(row, at, || row.finite(at))?;
    let neg = blank_or(row, at + 1, || row.finite(at + 1))?;
    let coverage = row.finite(at + 2)?;
    match (pos, neg) {
        (Some(prop_positive), Some(prop_negative)) => Ok(Some(AttitudeFeatures {
            prop_positive,
            prop_negative,
            detected_coverage: coverage,
        })),
        (None, None) => Ok(None),
        _ => Err(IngestError::malformed(
            row.line,
            row.field_name(at),
            "positive and negative proportions must both be present or both empty",
        )),
    }
}

/// Reads a feature table written by [`write_features`].
pub fn read_features<R: Read>(reader: R) -> Result<Vec<WindowFeatures>, IngestError> {
    let names = header();
    let mut out = Vec::new();
    let first_feature = LEAD.len();
    let tail = first_feature + ATTENTION_FEATURE_NAMES.len();
    read_csv(reader, &names, &[], |row| {
        let start_frame: u64 = row.parse(2, "a frame index")?;
        let end_frame: u64 = row.parse(3, "a frame index")?;
        if end_frame <= start_frame {
            return Err(IngestError::malformed(
                row.line,
                "end_frame",
                "must exceed start_frame",
            ));
        }
        let window = ObservationWindow {
            start_frame,
            end_frame,
            duration_s: row.finite(4)?,
            partial: row.parse(5, "true or false")?,
        };
        let defined: bool = row.parse(tail + 6, "true or false")?;
        let attention = if defined {
            let mut v = [0.0; 21];
            for (k, slot) in v.iter_mut().enumerate() {
                *slot = row.finite(first_feature + k)?;
            }
            let count = |k: usize| row.parse::<u64>(tail + k, "a count");
            let detected_frames = count(4)?;
            let transition = [[0.0, v[9], v[10]], [v[11], 0.0, v[12]], [v[13], v[14], 0.0]];
            let (flux_in, flux_out) = flux(&transition);
            let stored = [v[15], v[17], v[19], v[16], v[18], v[20]];
            let derived = [
                flux_in[0],
                flux_in[1],
                flux_in[2],
                flux_out[0],
                flux_out[1],
                flux_out[2],
            ];
            if stored != derived {
                return Err(IngestError::malformed(
                    row.line,
                    "flux_in_tablet",
                    "flux columns disagree with the transition columns",
                ));
            }
            Some(AttentionFeatures {
                proportion: [v[0], v[1], v[2]],
                episode_mean_s: [v[3], v[5], v[7]],
                episode_std_s: [v[4], v[6], v[8]],
                episode_count: [count(0)?, count(1)?, count(2)?],
                transition,
                flux_in,
                flux_out,
                transition_count: count(3)?,
                detected_frames,
                window_frames: end_frame - start_frame,
                detected_coverage: row.finite(tail + 5)?,
            })
        } else {
            None
        };
        out.push(WindowFeatures {
            session_id: row.raw(0).to_string(),
            window_index: row.parse(1, "a window index")?,
            window,
            attention,
            pwd_attitude: read_attitude(&row, tail + 7)?,
            facilitator_attitude: read_attitude(&row, tail + 10)?,
        });
        Ok(())
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{session_features, SegmentOptions};
    use crate::model::{EmotionLabel, FrameRecord, GazeEntity, LabelStream, Subject};

    fn sample() -> Vec<WindowFeatures> {
        let gaze = [
            GazeEntity::Tablet,
            GazeEntity::Facilitator,
            GazeEntity::Elsewhere,
            GazeEntity::Undetected,
        ];
        let emo = [
            EmotionLabel::Happiness,
            EmotionLabel::Fear,
            EmotionLabel::Anger,
            EmotionLabel::Undetected,
        ];
        let mut records = Vec::new();
        for i in 0..70u64 {
            records.push(FrameRecord {
                frame_index: i,
                subject: Subject::Pwd,
                gaze: if i >= 60 {
                    GazeEntity::Undetected
                } else {
                    gaze[(i / 3 % 4) as usize]
                },
                emotion: emo[(i % 4) as usize],
            });
            records.push(FrameRecord {
                frame_index: i,
                subject: Subject::Facilitator,
                gaze: GazeEntity::Undetected,
                emotion: emo[(i / 2 % 4) as usize],
            });
        }
        let stream = LabelStream::new("sess,1", 3.0, records).unwrap();
        session_features(&stream, 10.0 / 3.0, SegmentOptions::default()).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let rows = sample();
        assert!(rows.iter().any(|r| r.attention.is_none()));
        let mut buf = Vec::new();
        write_features(&rows, &mut buf).unwrap();
        let back = read_features(buf.as_slice()).unwrap();
        assert_eq!(back, rows);
        let mut again = Vec::new();
        write_features(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn header_has_all_columns() {
        assert_eq!(header().len(), 6 + 21 + 13);
    }

    #[test]
    fn rejects_bad_cells() {
        let rows = sample();
        let mut buf = Vec::new();
        write_features(&rows[..1], &mut buf).unwrap();
        let text = String::from_utf8(buf)
            .unwrap()
            .replacen(",true,", ",maybe,", 1);
        let e = read_features(text.as_bytes()).unwrap_err();
        assert!(e.to_string().contains("line 2"));
    }
}
