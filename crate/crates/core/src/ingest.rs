//! Readers and writers for the on-disk formats.
//!
//! | file            | header / shape                                         |
//! |-----------------|--------------------------------------------------------|
//! | labels CSV      | `frame,subject,gaze,emotion`                           |
//! | gaze points CSV | `frame,subject,x,y,detected`                           |
//! | regions JSON    | `frame_width`, `frame_height` and three `{x,y,w,h}`    |
//! | MPES CSV        | `window_index,active,passive,other[,pleasure]`         |
//! | OME CSV         | `start_s,end_s,attention,attitude`                     |
//!
//! Every rejection names the offending line (CSV, JSON) or field (JSON).

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::{
    BosAnnotation, BosScale, FrameRecord, LabelStream, ModelError, MpesScore, OmePeriod, Rect,
    RegionConfig, Subject,
};
use crate::synthetic::GeneratorSpec;

pub const LABELS_HEADER: [&str; 4] = ["frame", "subject", "gaze", "emotion"];
pub const POINTS_HEADER: [&str; 5] = ["frame", "subject", "x", "y", "detected"];
pub const MPES_HEADER: [&str; 4] = ["window_index", "active", "passive", "other"];
pub const OME_HEADER: [&str; 4] = ["start_s", "end_s", "attention", "attitude"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line 1: file is empty")]
    EmptyFile,
    #[error("line 1: expected header `{expected}`, found `{found}`")]
    BadHeader { expected: String, found: String },
    #[error("line {line}, field `{field}`: {message}")]
    MalformedRow {
        line: u64,
        field: String,
        message: String,
    },
    #[error("line {line}: duplicate frame {frame} for subject {subject}")]
    DuplicateFrame {
        line: u64,
        subject: Subject,
        frame: u64,
    },
    #[error("line {line}: frame {frame} for subject {subject} follows frame {previous}")]
    NonMonotonicFrames {
        line: u64,
        subject: Subject,
        frame: u64,
        previous: u64,
    },
    #[error("field `{0}`: region is missing")]
    MissingRegion(String),
    #[error("field `{name}`: {message}")]
    OutOfBounds { name: String, message: String },
    #[error("line {line}, column {column}: malformed JSON: {message}")]
    MalformedJson {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("field `{field}`: {message}")]
    InvalidField { field: String, message: String },
    #[error("line {line}, field `{field}`: score {value} outside {range}")]
    OutOfRangeScore {
        line: u64,
        field: String,
        value: String,
        range: &'static str,
    },
    #[error("line {line}: period overlaps or precedes the previous one")]
    OverlappingPeriods { line: u64 },
}

impl IngestError {
    /// Line number the error refers to, when it has one.
    pub fn line(&self) -> Option<u64> {
        match self {
            IngestError::EmptyFile | IngestError::BadHeader { .. } => Some(1),
            IngestError::MalformedRow { line, .. }
            | IngestError::DuplicateFrame { line, .. }
            | IngestError::NonMonotonicFrames { line, .. }
            | IngestError::OutOfRangeScore { line, .. }
            | IngestError::OverlappingPeriods { line } => Some(*line),
            IngestError::MalformedJson { line, .. } => Some(*line as u64),
            _ => None,
        }
    }

    /// Short machine-readable name of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            IngestError::Io { .. } => "Io",
            IngestError::EmptyFile => "EmptyFile",
            IngestError::BadHeader { .. } => "BadHeader",
            IngestError::MalformedRow { .. } => "MalformedRow",
            IngestError::DuplicateFrame { .. } => "DuplicateFrame",
            IngestError::NonMonotonicFrames { .. } => "NonMonotonicFrames",
            IngestError::MissingRegion(_) => "MissingRegion",
            IngestError::OutOfBounds { .. } => "OutOfBounds",
            IngestError::MalformedJson { .. } => "MalformedJson",
            IngestError::InvalidField { .. } => "InvalidField",
            IngestError::OutOfRangeScore { .. } => "OutOfRangeScore",
            IngestError::OverlappingPeriods { .. } => "OverlappingPeriods",
        }
    }

    pub(crate) fn malformed(line: u64, field: &str, message: impl Into<String>) -> Self {
        IngestError::MalformedRow {
            line,
            field: field.to_string(),
            message: message.into(),
        }
    }
}

pub fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn create(path: &Path) -> Result<File, IngestError> {
    File::create(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// A CSV data row with its 1-based line number.
pub(crate) struct Row<'a> {
    pub line: u64,
    fields: csv::StringRecord,
    names: &'a [&'static str],
}

impl Row<'_> {
    pub fn raw(&self, i: usize) -> &str {
        self.fields.get(i).unwrap_or("")
    }

    pub fn field_name(&self, i: usize) -> &'static str {
        self.names.get(i).copied().unwrap_or("row")
    }

    pub fn parse<T: FromStr>(&self, i: usize, what: &str) -> Result<T, IngestError> {
        let raw = self.raw(i);
        raw.parse().map_err(|_| {
            IngestError::malformed(
                self.line,
                self.field_name(i),
                format!("expected {what}, found `{raw}`"),
            )
        })
    }

    pub fn finite(&self, i: usize) -> Result<f64, IngestError> {
        let v: f64 = self.parse(i, "a number")?;
        if !v.is_finite() {
            return Err(IngestError::malformed(
                self.line,
                self.field_name(i),
                "value must be finite",
            ));
        }
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }
}

/// Reads a headed CSV, checking the header against `header` (optionally
/// followed by the `optional` trailing columns), and hands each data row to
/// `each`. Returns the number of header columns found.
pub(crate) fn read_csv<R: Read>(
    reader: R,
    header: &[&'static str],
    optional: &[&'static str],
    mut each: impl FnMut(Row<'_>) -> Result<(), IngestError>,
) -> Result<usize, IngestError> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = csv.records();
    let first = match records.next() {
        None => return Err(IngestError::EmptyFile),
        Some(r) => r.map_err(|e| csv_error(e, 1))?,
    };
    let found: Vec<&str> = first.iter().collect();
    let mut names: Vec<&'static str> = header.to_vec();
    let accepted = (0..=optional.len()).find_map(|extra| {
        let candidate: Vec<&str> = header.iter().chain(&optional[..extra]).copied().collect();
        (candidate == found).then_some(candidate.len())
    });
    let Some(width) = accepted else {
        return Err(IngestError::BadHeader {
            expected: header.join(","),
            found: found.join(","),
        });
    };
    names.extend_from_slice(&optional[..width - header.len()]);

    let mut last_line = 1;
    for rec in records {
        let rec = rec.map_err(|e| csv_error(e, last_line + 1))?;
        let line = rec.position().map_or(last_line + 1, |p| p.line());
        last_line = line;
        if rec.len() != width {
            return Err(IngestError::malformed(
                line,
                "row",
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        each(Row {
            line,
            fields: rec,
            names: &names,
        })?;
    }
    Ok(width)
}

fn csv_error(e: csv::Error, fallback_line: u64) -> IngestError {
    let line = e.position().map_or(fallback_line, |p| p.line());
    let message = match e.kind() {
        csv::ErrorKind::Utf8 { .. } => "invalid UTF-8".to_string(),
        _ => e.to_string(),
    };
    IngestError::malformed(line, "row", message)
}

/// Per-subject ordering check shared by the frame-level readers.
#[derive(Default)]
struct FrameOrder {
    last: [Option<u64>; 2],
}

impl FrameOrder {
    fn check(&mut self, line: u64, subject: Subject, frame: u64) -> Result<(), IngestError> {
        let slot = &mut self.last[subject as usize];
        if let Some(previous) = *slot {
            if frame == previous {
                return Err(IngestError::DuplicateFrame {
                    line,
                    subject,
                    frame,
                });
            }
            if frame < previous {
                return Err(IngestError::NonMonotonicFrames {
                    line,
                    subject,
                    frame,
                    previous,
                });
            }
        }
        *slot = Some(frame);
        Ok(())
    }
}

fn token<T: FromStr<Err = ModelError>>(row: &Row, i: usize) -> Result<T, IngestError> {
    row.raw(i)
        .parse()
        .map_err(|e: ModelError| IngestError::malformed(row.line, row.field_name(i), e.to_string()))
}

/// Reads a labels CSV into a validated stream.
pub fn read_label_stream<R: Read>(
    reader: R,
    session_id: &str,
    fps: f64,
) -> Result<LabelStream, IngestError> {
    if !(fps.is_finite() && fps > 0.0) {
        return Err(IngestError::InvalidField {
            field: "fps".into(),
            message: format!("must be positive, got {fps}"),
        });
    }
    let mut records = Vec::new();
    let mut order = FrameOrder::default();
    read_csv(reader, &LABELS_HEADER, &[], |row| {
        let frame_index: u64 = row.parse(0, "a non-negative integer frame index")?;
        let subject: Subject = token(&row, 1)?;
        order.check(row.line, subject, frame_index)?;
        records.push(FrameRecord {
            frame_index,
            subject,
            gaze: token(&row, 2)?,
            emotion: token(&row, 3)?,
        });
        Ok(())
    })?;
    if records.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    LabelStream::new(session_id, fps, records).map_err(|e| IngestError::InvalidField {
        field: "records".into(),
        message: e.to_string(),
    })
}

/// Reads a labels CSV from disk; the session id is the file stem.
pub fn parse_label_stream(path: &Path, fps: f64) -> Result<LabelStream, IngestError> {
    read_label_stream(open(path)?, &session_name(path), fps)
}

pub fn session_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "session".to_string())
}

pub fn write_label_stream<W: Write>(stream: &LabelStream, writer: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(LABELS_HEADER)?;
    for r in stream.records() {
        w.write_record([
            r.frame_index.to_string().as_str(),
            r.subject.as_str(),
            r.gaze.as_str(),
            r.emotion.as_str(),
        ])?;
    }
    w.flush()
}

/// A raw gaze estimate for one frame; `point` is `None` when the upstream
/// detector produced nothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazePointRecord {
    pub frame_index: u64,
    pub subject: Subject,
    pub point: Option<(f64, f64)>,
}

impl GazePointRecord {
    pub fn detected(&self) -> bool {
        self.point.is_some()
    }
}

pub fn read_gaze_points<R: Read>(reader: R) -> Result<Vec<GazePointRecord>, IngestError> {
    let mut out = Vec::new();
    let mut order = FrameOrder::default();
    read_csv(reader, &POINTS_HEADER, &[], |row| {
        let frame_index: u64 = row.parse(0, "a non-negative integer frame index")?;
        let subject: Subject = token(&row, 1)?;
        order.check(row.line, subject, frame_index)?;
        let detected = match row.raw(4) {
            "true" | "1" => true,
            "false" | "0" => false,
            other => {
                return Err(IngestError::malformed(
                    row.line,
                    "detected",
                    format!("expected true or false, found `{other}`"),
                ))
            }
        };
        let point = if detected {
            Some((row.finite(2)?, row.finite(3)?))
        } else {
            None
        };
        out.push(GazePointRecord {
            frame_index,
            subject,
            point,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn parse_gaze_points(path: &Path) -> Result<Vec<GazePointRecord>, IngestError> {
    read_gaze_points(open(path)?)
}

pub fn write_gaze_points<W: Write>(points: &[GazePointRecord], writer: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(POINTS_HEADER)?;
    for p in points {
        let frame = p.frame_index.to_string();
        match p.point {
            Some((x, y)) => w.write_record([
                frame.as_str(),
                p.subject.as_str(),
                &x.to_string(),
                &y.to_string(),
                "true",
            ])?,
            None => w.write_record([frame.as_str(), p.subject.as_str(), "", "", "false"])?,
        }
    }
    w.flush()
}

pub(crate) fn json_error(e: serde_json::Error) -> IngestError {
    IngestError::MalformedJson {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

fn frame_dimension(root: &Value, field: &str) -> Result<u32, IngestError> {
    let invalid = |message: &str| IngestError::InvalidField {
        field: field.to_string(),
        message: message.to_string(),
    };
    let v = root.get(field).ok_or_else(|| invalid("missing"))?;
    let n = v
        .as_u64()
        .ok_or_else(|| invalid("expected a positive integer"))?;
    match u32::try_from(n) {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(invalid("expected a positive integer")),
    }
}

fn region(root: &Value, name: &str, width: u32, height: u32) -> Result<Rect, IngestError> {
    let obj = match root.get(name) {
        None | Some(Value::Null) => return Err(IngestError::MissingRegion(name.to_string())),
        Some(Value::Object(obj)) => obj,
        Some(_) => {
            return Err(IngestError::InvalidField {
                field: name.to_string(),
                message: "expected an object with x, y, w, h".into(),
            })
        }
    };
    let mut coords = [0.0; 4];
    for (slot, key) in coords.iter_mut().zip(["x", "y", "w", "h"]) {
        *slot = obj
            .get(key)
            .and_then(Value::as_f64)
            .ok_or_else(|| IngestError::InvalidField {
                field: format!("{name}.{key}"),
                message: "expected a number".into(),
            })?;
    }
    let [x, y, w, h] = coords;
    let rect = Rect::new(x, y, w, h).map_err(|_| IngestError::OutOfBounds {
        name: name.to_string(),
        message: format!("width and height must be positive, got {w}x{h}"),
    })?;
    if x < 0.0 || y < 0.0 || x + w > width as f64 || y + h > height as f64 {
        return Err(IngestError::OutOfBounds {
            name: name.to_string(),
            message: format!("rect ({x}, {y}, {w}, {h}) exceeds the {width}x{height} frame"),
        });
    }
    Ok(rect)
}

pub fn read_region_config<R: Read>(reader: R) -> Result<RegionConfig, IngestError> {
    let root: Value = serde_json::from_reader(reader).map_err(json_error)?;
    if !root.is_object() {
        return Err(IngestError::InvalidField {
            field: "(root)".into(),
            message: "expected a JSON object".into(),
        });
    }
    let width = frame_dimension(&root, "frame_width")?;
    let height = frame_dimension(&root, "frame_height")?;
    let target = region(&root, "target_activity_space", width, height)?;
    let facilitator = region(&root, "facilitator", width, height)?;
    let subject = region(&root, "subject", width, height)?;
    RegionConfig::new(width, height, target, facilitator, subject).map_err(|e| {
        IngestError::InvalidField {
            field: "(root)".into(),
            message: e.to_string(),
        }
    })
}

pub fn parse_region_config(path: &Path) -> Result<RegionConfig, IngestError> {
    read_region_config(open(path)?)
}

/// Reads a generator spec. Only the JSON shape is checked here; see
/// [`GeneratorSpec::validate`] for the parameter rules.
pub fn read_generator_spec<R: Read>(reader: R) -> Result<GeneratorSpec, IngestError> {
    serde_json::from_reader(reader).map_err(json_error)
}

pub fn parse_generator_spec(path: &Path) -> Result<GeneratorSpec, IngestError> {
    read_generator_spec(open(path)?)
}

pub fn write_region_config<W: Write>(config: &RegionConfig, writer: W) -> io::Result<()> {
    serde_json::to_writer_pretty(writer, config).map_err(io::Error::from)
}

fn score(row: &Row, i: usize, range: std::ops::RangeInclusive<u8>) -> Result<u8, IngestError> {
    let label: &'static str = if *range.start() == 0 {
        "0..=2"
    } else {
        "1..=7"
    };
    let raw = row.raw(i);
    let v: i64 = raw.parse().map_err(|_| {
        IngestError::malformed(
            row.line,
            row.field_name(i),
            format!("expected an integer score, found `{raw}`"),
        )
    })?;
    match u8::try_from(v) {
        Ok(v) if range.contains(&v) => Ok(v),
        _ => Err(IngestError::OutOfRangeScore {
            line: row.line,
            field: row.field_name(i).to_string(),
            value: raw.to_string(),
            range: label,
        }),
    }
}

pub fn read_mpes<R: Read>(reader: R) -> Result<Vec<MpesScore>, IngestError> {
    let mut out = Vec::new();
    read_csv(reader, &MPES_HEADER, &["pleasure"], |row| {
        let pleasure = if row.len() > 4 {
            let p = row.finite(4)?;
            if p < 0.0 {
                return Err(IngestError::OutOfRangeScore {
                    line: row.line,
                    field: "pleasure".into(),
                    value: row.raw(4).to_string(),
                    range: "non-negative values",
                });
            }
            Some(p)
        } else {
            None
        };
        out.push(MpesScore {
            window_index: row.parse(0, "a non-negative integer")?,
            active: score(&row, 1, 0..=2)?,
            passive: score(&row, 2, 0..=2)?,
            other: score(&row, 3, 0..=2)?,
            pleasure,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn read_ome<R: Read>(reader: R) -> Result<Vec<OmePeriod>, IngestError> {
    let mut out: Vec<OmePeriod> = Vec::new();
    read_csv(reader, &OME_HEADER, &[], |row| {
        let start_s = row.finite(0)?;
        let end_s = row.finite(1)?;
        if start_s < 0.0 {
            return Err(IngestError::malformed(
                row.line,
                "start_s",
                "must be non-negative",
            ));
        }
        if end_s <= start_s {
            return Err(IngestError::malformed(
                row.line,
                "end_s",
                "must be after start_s",
            ));
        }
        if out.last().is_some_and(|prev| start_s < prev.end_s) {
            return Err(IngestError::OverlappingPeriods { line: row.line });
        }
        out.push(OmePeriod {
            start_s,
            end_s,
            attention: score(&row, 2, 1..=7)?,
            attitude: score(&row, 3, 1..=7)?,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn read_bos<R: Read>(reader: R, scale: BosScale) -> Result<BosAnnotation, IngestError> {
    match scale {
        BosScale::Mpes => read_mpes(reader).map(BosAnnotation::Mpes),
        BosScale::Ome => read_ome(reader).map(BosAnnotation::Ome),
    }
}

pub fn parse_bos(path: &Path, scale: BosScale) -> Result<BosAnnotation, IngestError> {
    read_bos(open(path)?, scale)
}

pub fn write_mpes<W: Write>(scores: &[MpesScore], writer: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let with_pleasure = scores.iter().any(|s| s.pleasure.is_some());
    let mut header = MPES_HEADER.to_vec();
    if with_pleasure {
        header.push("pleasure");
    }
    w.write_record(&header)?;
    for s in scores {
        let mut rec = vec![
            s.window_index.to_string(),
            s.active.to_string(),
            s.passive.to_string(),
            s.other.to_string(),
        ];
        if with_pleasure {
            rec.push(s.pleasure.map(|p| p.to_string()).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush()
}

pub fn write_ome<W: Write>(periods: &[OmePeriod], writer: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(OME_HEADER)?;
    for p in periods {
        w.write_record([
            p.start_s.to_string(),
            p.end_s.to_string(),
            p.attention.to_string(),
            p.attitude.to_string(),
        ])?;
    }
    w.flush()
}
