//! Turning raw gaze points into per-frame entity labels.

use std::collections::HashMap;

use thiserror::Error;

use crate::ingest::GazePointRecord;
use crate::model::{
    EmotionLabel, FrameRecord, GazeEntity, LabelStream, ModelError, RegionConfig, Subject,
};

/// Points this far outside the frame are pulled back onto the border.
pub const CLAMP_TOLERANCE_PX: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GazeError {
    #[error("smoothing window must be odd and at least 1, got {0}")]
    InvalidWindow(usize),
    #[error("record {index} (frame {frame}): point ({x}, {y}) is more than {CLAMP_TOLERANCE_PX} px outside the frame")]
    PointOutOfFrame {
        index: usize,
        frame: u64,
        x: f64,
        y: f64,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Which entity a single gaze point falls on.
///
/// Rects are half-open. A point inside both the activity space and the
/// facilitator box goes to whichever centre is nearer; exact ties go to the
/// activity space.
pub fn assign_entity(point: &GazePointRecord, regions: &RegionConfig) -> GazeEntity {
    let Some((x, y)) = point.point else {
        return GazeEntity::Undetected;
    };
    let tablet = &regions.target_activity_space;
    let facilitator = &regions.facilitator;
    match (tablet.contains(x, y), facilitator.contains(x, y)) {
        (true, false) => GazeEntity::Tablet,
        (false, true) => GazeEntity::Facilitator,
        (false, false) => GazeEntity::Elsewhere,
        (true, true) => {
            let dist = |c: (f64, f64)| (x - c.0).powi(2) + (y - c.1).powi(2);
            if dist(facilitator.center()) < dist(tablet.center()) {
                GazeEntity::Facilitator
            } else {
                GazeEntity::Tablet
            }
        }
    }
}

/// Pulls points within [`CLAMP_TOLERANCE_PX`] of the frame back inside it.
pub fn clamp_point(
    index: usize,
    point: &GazePointRecord,
    regions: &RegionConfig,
) -> Result<GazePointRecord, GazeError> {
    let Some((x, y)) = point.point else {
        return Ok(*point);
    };
    let (w, h) = (regions.frame_width as f64, regions.frame_height as f64);
    let outside = |v: f64, max: f64| v < -CLAMP_TOLERANCE_PX || v > max + CLAMP_TOLERANCE_PX;
    if outside(x, w) || outside(y, h) {
        return Err(GazeError::PointOutOfFrame {
            index,
            frame: point.frame_index,
            x,
            y,
        });
    }
    Ok(GazePointRecord {
        point: Some((x.clamp(0.0, w), y.clamp(0.0, h))),
        ..*point
    })
}

/// Centred sliding majority vote over `window_k` labels.
///
/// Undetected labels do not vote and are never replaced. A position keeps its
/// own label unless one entity holds a strict plurality in the window.
pub fn smooth_labels(labels: &[GazeEntity], window_k: usize) -> Result<Vec<GazeEntity>, GazeError> {
    if window_k == 0 || window_k.is_multiple_of(2) {
        return Err(GazeError::InvalidWindow(window_k));
    }
    if window_k == 1 {
        return Ok(labels.to_vec());
    }
    let half = window_k / 2;
    let n = labels.len();
    let mut counts = [0usize; 3];
    let bump = |i: usize, delta: isize, counts: &mut [usize; 3]| {
        if let Some(e) = labels[i].index() {
            counts[e] = (counts[e] as isize + delta) as usize;
        }
    };
    for i in 0..half.min(n) {
        bump(i, 1, &mut counts);
    }
    let mut out = Vec::with_capacity(n);
    for (i, &label) in labels.iter().enumerate() {
        if i + half < n {
            bump(i + half, 1, &mut counts);
        }
        if i > half {
            bump(i - half - 1, -1, &mut counts);
        }
        out.push(if label.is_detected() {
            majority(&counts, label)
        } else {
            label
        });
    }
    Ok(out)
}

fn majority(counts: &[usize; 3], fallback: GazeEntity) -> GazeEntity {
    let best = *counts.iter().max().unwrap_or(&0);
    let mut winners = GazeEntity::ENTITIES
        .iter()
        .zip(counts)
        .filter(|(_, &c)| c == best && c > 0);
    match (winners.next(), winners.next()) {
        (Some((&e, _)), None) => e,
        _ => fallback,
    }
}

/// Clamp, assign and smooth a sequence of points.
pub fn label_pipeline(
    points: &[GazePointRecord],
    regions: &RegionConfig,
    window_k: usize,
) -> Result<Vec<GazeEntity>, GazeError> {
    if window_k == 0 || window_k.is_multiple_of(2) {
        return Err(GazeError::InvalidWindow(window_k));
    }
    let labels = points
        .iter()
        .enumerate()
        .map(|(i, p)| clamp_point(i, p, regions).map(|p| assign_entity(&p, regions)))
        .collect::<Result<Vec<_>, _>>()?;
    smooth_labels(&labels, window_k)
}

/// Builds a label stream from gaze points, smoothing each subject's points
/// separately. Emotions are taken from `emotions` where it has a record for
/// the same subject and frame, and are undetected otherwise.
pub fn points_to_stream(
    session_id: &str,
    fps: f64,
    points: &[GazePointRecord],
    regions: &RegionConfig,
    window_k: usize,
    emotions: Option<&LabelStream>,
) -> Result<LabelStream, GazeError> {
    let lookup: HashMap<(Subject, u64), EmotionLabel> = emotions
        .map(|s| {
            s.records()
                .iter()
                .map(|r| ((r.subject, r.frame_index), r.emotion))
                .collect()
        })
        .unwrap_or_default();

    let mut records = Vec::with_capacity(points.len());
    for subject in [Subject::Pwd, Subject::Facilitator] {
        let (positions, own): (Vec<usize>, Vec<GazePointRecord>) = points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.subject == subject)
            .map(|(i, p)| (i, *p))
            .unzip();
        let labels = label_pipeline(&own, regions, window_k).map_err(|e| match e {
            GazeError::PointOutOfFrame { index, frame, x, y } => GazeError::PointOutOfFrame {
                index: positions[index],
                frame,
                x,
                y,
            },
            other => other,
        })?;
        records.extend(own.iter().zip(labels).map(|(p, gaze)| {
            FrameRecord {
                frame_index: p.frame_index,
                subject,
                gaze,
                emotion: lookup
                    .get(&(subject, p.frame_index))
                    .copied()
                    .unwrap_or(EmotionLabel::Undetected),
            }
        }));
    }
    Ok(LabelStream::new(session_id, fps, records)?)
}
