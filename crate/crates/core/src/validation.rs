//! Comparing attention features against expert behaviour-scale codings.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{
    complement_features, period_features, AnalyticsError, SegmentOptions, WindowFeatures,
};
use crate::model::{AttitudeFeatures, LabelStream, MpesScore, OmePeriod, ATTENTION_FEATURE_NAMES};
use crate::stats::{
    ks_two_sample, pearson, spearman, CorrelationResult, KsResult, Significance, StatsError,
};

/// Row labels of the correlation matrix.
pub const MPES_ITEMS: [&str; 3] = ["active", "passive", "other"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("session `{session}` has no engaged periods")]
    NoEngagedPeriods { session: String },
    #[error("{features} feature windows but {scores} scores")]
    AlignmentMismatch { features: usize, scores: usize },
    #[error("no sessions given")]
    NoSessions,
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationMethod {
    #[default]
    Pearson,
    Spearman,
}

impl CorrelationMethod {
    pub fn apply(self, x: &[f64], y: &[f64]) -> Result<CorrelationResult, StatsError> {
        match self {
            CorrelationMethod::Pearson => pearson(x, y),
            CorrelationMethod::Spearman => spearman(x, y),
        }
    }
}

/// Engaged vs not-engaged tablet-gaze proportions, pooled over sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmeComparison {
    pub sessions: usize,
    /// `prop_tablet` of every engaged period with at least one detected frame.
    pub engaged: Vec<f64>,
    /// `prop_tablet` of every complement stretch with a detected frame.
    pub not_engaged: Vec<f64>,
    /// Segments left out of the samples for lack of detected frames.
    pub undefined_engaged: usize,
    pub undefined_not_engaged: usize,
    /// Set when the periods cover every session entirely.
    pub not_engaged_empty: bool,
    /// Absent when either sample is empty.
    pub ks: Option<KsResult>,
}

/// Pools per-segment `prop_tablet` over engaged periods and the stretches
/// between them, then compares the two samples with a two-sample KS test.
pub fn ome_comparison(
    sessions: &[(&LabelStream, &[OmePeriod])],
    opts: SegmentOptions,
) -> Result<OmeComparison, ValidationError> {
    if sessions.is_empty() {
        return Err(ValidationError::NoSessions);
    }
    let mut out = OmeComparison {
        sessions: sessions.len(),
        engaged: Vec::new(),
        not_engaged: Vec::new(),
        undefined_engaged: 0,
        undefined_not_engaged: 0,
        not_engaged_empty: false,
        ks: None,
    };
    for (stream, periods) in sessions {
        if periods.is_empty() {
            return Err(ValidationError::NoEngagedPeriods {
                session: stream.session_id().to_string(),
            });
        }
        let spans: Vec<(f64, f64)> = periods.iter().map(|p| (p.start_s, p.end_s)).collect();
        for f in period_features(stream, &spans, opts)? {
            match f {
                Some(f) => out.engaged.push(f.proportion[0]),
                None => out.undefined_engaged += 1,
            }
        }
        for f in complement_features(stream, &spans, opts)? {
            match f {
                Some(f) => out.not_engaged.push(f.proportion[0]),
                None => out.undefined_not_engaged += 1,
            }
        }
    }
    out.not_engaged_empty = out.not_engaged.is_empty() && out.undefined_not_engaged == 0;
    if !out.engaged.is_empty() && !out.not_engaged.is_empty() {
        out.ks = Some(ks_two_sample(&out.engaged, &out.not_engaged)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellFlag {
    Significant,
    Marginal,
    None,
    Undefined,
}

impl CellFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            CellFlag::Significant => "significant",
            CellFlag::Marginal => "marginal",
            CellFlag::None => "none",
            CellFlag::Undefined => "undefined",
        }
    }
}

impl From<Significance> for CellFlag {
    fn from(s: Significance) -> Self {
        match s {
            Significance::Significant => CellFlag::Significant,
            Significance::Marginal => CellFlag::Marginal,
            Significance::None => CellFlag::None,
        }
    }
}

/// One correlation; `r` and `p` are null when it is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCell {
    pub r: Option<f64>,
    pub p: Option<f64>,
    pub n: usize,
    pub flag: CellFlag,
}

impl CorrelationCell {
    fn from_result(
        res: Result<CorrelationResult, StatsError>,
        n: usize,
    ) -> Result<Self, StatsError> {
        match res {
            Ok(c) => Ok(CorrelationCell {
                r: Some(c.r),
                p: Some(c.p_value),
                n: c.n,
                flag: c.significance.into(),
            }),
            Err(StatsError::ConstantInput | StatsError::TooFewSamples { .. }) => {
                Ok(CorrelationCell {
                    r: None,
                    p: None,
                    n,
                    flag: CellFlag::Undefined,
                })
            }
            Err(e) => Err(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub method: CorrelationMethod,
    pub sessions: usize,
    /// Windows used in the correlations.
    pub windows: usize,
    /// Windows dropped because no gaze was detected in them.
    pub excluded_windows: usize,
    /// Pleasure against the facilitator's positive-affect share, when
    /// pleasure scores are available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub facilitator_affect: Option<CorrelationCell>,
}

/// Correlations of the three MPES items against the 21 attention features.
/// `cells` is row-major: `cells[row * 21 + col]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrixReport {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub cells: Vec<CorrelationCell>,
    pub meta: ReportMeta,
}

impl CorrelationMatrixReport {
    pub fn cell(&self, row: usize, col: usize) -> &CorrelationCell {
        &self.cells[row * self.cols.len() + col]
    }

    /// Looks a cell up by item and feature name.
    pub fn get(&self, item: &str, feature: &str) -> Option<&CorrelationCell> {
        let r = self.rows.iter().position(|x| x == item)?;
        let c = self.cols.iter().position(|x| x == feature)?;
        Some(self.cell(r, c))
    }
}

/// Correlates each MPES item with each attention feature over windows
/// matched by position. Windows without detected gaze are dropped from
/// every cell; constant columns give undefined cells.
pub fn mpes_correlation(
    windows: &[WindowFeatures],
    scores: &[MpesScore],
    method: CorrelationMethod,
) -> Result<CorrelationMatrixReport, ValidationError> {
    if windows.len() != scores.len() {
        return Err(ValidationError::AlignmentMismatch {
            features: windows.len(),
            scores: scores.len(),
        });
    }
    let used: Vec<_> = windows
        .iter()
        .zip(scores)
        .filter_map(|(w, s)| w.attention.as_ref().map(|a| (a.to_vector(), s)))
        .collect();
    let n = used.len();
    if n < 3 {
        return Err(StatsError::TooFewSamples { needed: 3, got: n }.into());
    }

    let items: [Vec<f64>; 3] = [
        used.iter().map(|(_, s)| f64::from(s.active)).collect(),
        used.iter().map(|(_, s)| f64::from(s.passive)).collect(),
        used.iter().map(|(_, s)| f64::from(s.other)).collect(),
    ];
    let columns: Vec<Vec<f64>> = (0..ATTENTION_FEATURE_NAMES.len())
        .map(|k| used.iter().map(|(v, _)| v[k]).collect())
        .collect();
    let mut cells = Vec::with_capacity(3 * columns.len());
    for item in &items {
        for col in &columns {
            cells.push(CorrelationCell::from_result(method.apply(col, item), n)?);
        }
    }

    let sessions = windows
        .iter()
        .map(|w| w.session_id.as_str())
        .collect::<BTreeSet<_>>()
        .len();
    let facilitator_affect = facilitator_affect_cell(windows, scores, method)?;
    Ok(CorrelationMatrixReport {
        rows: MPES_ITEMS.iter().map(|s| s.to_string()).collect(),
        cols: ATTENTION_FEATURE_NAMES
            .iter()
            .map(|s| s.to_string())
            .collect(),
        cells,
        meta: ReportMeta {
            method,
            sessions,
            windows: n,
            excluded_windows: windows.len() - n,
            facilitator_affect,
        },
    })
}

fn facilitator_affect_cell(
    windows: &[WindowFeatures],
    scores: &[MpesScore],
    method: CorrelationMethod,
) -> Result<Option<CorrelationCell>, StatsError> {
    if scores.iter().all(|s| s.pleasure.is_none()) {
        return Ok(None);
    }
    let (x, y): (Vec<f64>, Vec<f64>) = windows
        .iter()
        .zip(scores)
        .filter_map(|(w, s)| Some((w.facilitator_attitude?.prop_positive, s.pleasure?)))
        .unzip();
    let n = x.len();
    CorrelationCell::from_result(method.apply(&x, &y), n).map(Some)
}

/// Pearson correlation of pleasure scores with the facilitator's share of
/// positive facial affect, window by window.
pub fn attitude_correlation(
    facilitator_attitude: &[AttitudeFeatures],
    pleasure: &[f64],
) -> Result<CorrelationResult, ValidationError> {
    if facilitator_attitude.len() != pleasure.len() {
        return Err(ValidationError::AlignmentMismatch {
            features: facilitator_attitude.len(),
            scores: pleasure.len(),
        });
    }
    let x: Vec<f64> = facilitator_attitude
        .iter()
        .map(|a| a.prop_positive)
        .collect();
    Ok(pearson(&x, pleasure)?)
}

/// Grey level for a correlation: −1 → 0, 0 → 128, 1 → 255. Undefined
/// cells are mid-grey.
pub fn intensity(r: Option<f64>) -> u8 {
    match r {
        Some(r) if r.is_finite() => ((r.clamp(-1.0, 1.0) + 1.0) / 2.0 * 255.0).round() as u8,
        _ => 128,
    }
}

/// Binary PGM with one pixel per cell: 21 wide, 3 high.
pub fn report_pgm(report: &CorrelationMatrixReport) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", report.cols.len(), report.rows.len()).into_bytes();
    out.extend(report.cells.iter().map(|c| intensity(c.r)));
    out
}

pub fn report_json(report: &CorrelationMatrixReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// `item,feature,r,p,n,flag`, one line per cell.
pub fn report_flags_csv(report: &CorrelationMatrixReport) -> String {
    let mut out = String::from("item,feature,r,p,n,flag\n");
    let num = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for (i, item) in report.rows.iter().enumerate() {
        for (j, feature) in report.cols.iter().enumerate() {
            let c = report.cell(i, j);
            let _ = writeln!(
                out,
                "{item},{feature},{},{},{},{}",
                num(c.r),
                num(c.p),
                c.n,
                c.flag.as_str()
            );
        }
    }
    out
}

/// Where the flags listing for `image` goes: `report.pgm` → `report.flags.csv`.
pub fn flags_path(image: &Path) -> PathBuf {
    image.with_extension("flags.csv")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ValidationError> {
    std::fs::write(path, bytes).map_err(|e| ValidationError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Writes the JSON report, the PGM image and the flags listing next to the
/// image.
pub fn render_report(
    report: &CorrelationMatrixReport,
    json_path: &Path,
    image_path: &Path,
) -> Result<(), ValidationError> {
    write_file(json_path, report_json(report).as_bytes())?;
    write_file(image_path, &report_pgm(report))?;
    write_file(&flags_path(image_path), report_flags_csv(report).as_bytes())
}
