use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use log::{debug, info, warn};
use serde_json::{json, Value};

use aveid::analytics::{session_features, table, AnalyticsError, SegmentOptions, WindowFeatures};
use aveid::gaze::{points_to_stream, GazeError};
use aveid::ingest::{self, IngestError};
use aveid::model::LabelStream;
use aveid::synthetic::scenario::MpesScenario;
use aveid::synthetic::{gaze_points_for, generate, SyntheticError};
use aveid::validation::{self, CorrelationMethod, ValidationError};

#[derive(Parser, Debug)]
#[command(
    name = "aveid",
    version,
    about = "Gaze and affect engagement analytics"
)]
struct Cli {
    /// JSON object of flag values; explicit flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Turn gaze points into per-frame labels.
    Assign(AssignArgs),
    /// Per-window attention and attitude features.
    Features(FeaturesArgs),
    /// Compare features against behaviour-scale codings.
    #[command(subcommand)]
    Validate(ValidateCommand),
    /// Generate a synthetic label stream.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
#[group(id = "output", required = true, multiple = false, args = ["out", "stdout"])]
struct Output {
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Write the result to standard output.
    #[arg(long)]
    stdout: bool,
}

#[derive(Args, Debug)]
struct AssignArgs {
    #[arg(long, value_name = "FILE")]
    gaze: PathBuf,
    #[arg(long, value_name = "FILE")]
    regions: PathBuf,
    /// Majority-vote window in frames (odd).
    #[arg(long, default_value_t = 1, value_parser = odd_window)]
    smooth: usize,
    /// Labels file whose emotion column is copied onto matching frames.
    #[arg(long, value_name = "FILE")]
    emotions: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct FeaturesArgs {
    /// Labels file; repeat for several sessions.
    #[arg(long, value_name = "FILE", required = true)]
    labels: Vec<PathBuf>,
    #[arg(long, value_parser = positive)]
    fps: f64,
    /// Window length in seconds.
    #[arg(long, value_parser = positive)]
    window: f64,
    #[command(flatten)]
    segment: SegmentArgs,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug, Clone, Copy)]
struct SegmentArgs {
    /// Runs shorter than this many frames are merged into the previous episode.
    #[arg(long, default_value_t = 0)]
    min_episode: u64,
    /// Undetected gaps up to this many frames do not split an episode.
    #[arg(long, default_value_t = 0)]
    max_gap: u64,
}

impl From<SegmentArgs> for SegmentOptions {
    fn from(a: SegmentArgs) -> Self {
        SegmentOptions {
            min_episode_frames: a.min_episode,
            max_gap_frames: a.max_gap,
        }
    }
}

#[derive(Subcommand, Debug)]
enum ValidateCommand {
    /// Correlate MPES scores with the attention features of each window.
    Mpes(MpesArgs),
    /// Compare tablet gaze in OME engaged periods against the rest.
    Ome(OmeArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Pearson,
    Spearman,
}

#[derive(Args, Debug)]
struct MpesArgs {
    #[arg(long, value_name = "FILE")]
    features: PathBuf,
    #[arg(long, value_name = "FILE")]
    scores: PathBuf,
    /// Grey-level image of the matrix; defaults to the report path with a
    /// `.pgm` extension.
    #[arg(long, value_name = "FILE")]
    image: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "pearson")]
    method: Method,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct OmeArgs {
    /// Labels file; repeat for several sessions, paired with `--periods`.
    #[arg(long, value_name = "FILE", required = true)]
    labels: Vec<PathBuf>,
    #[arg(long, value_name = "FILE", required = true)]
    periods: Vec<PathBuf>,
    #[arg(long, value_parser = positive)]
    fps: f64,
    #[command(flatten)]
    segment: SegmentArgs,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Scenario {
    Mpes,
}

#[derive(Args, Debug)]
#[group(id = "source", required = true, multiple = false, args = ["spec", "scenario"])]
struct SynthArgs {
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,
    /// Built-in validation scenario instead of a spec.
    #[arg(long, value_enum, requires = "scores_out")]
    scenario: Option<Scenario>,
    /// Seed of the built-in scenario.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of MPES windows in the scenario.
    #[arg(long, default_value_t = 130)]
    windows: usize,
    /// Where the scenario's MPES scores go.
    #[arg(long, value_name = "FILE")]
    scores_out: Option<PathBuf>,
    /// Also write gaze points that map back onto the generated labels.
    #[arg(long, value_name = "FILE", requires = "regions")]
    points_out: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    regions: Option<PathBuf>,
    /// Seed for the gaze points; defaults to the stream seed.
    #[arg(long)]
    point_seed: Option<u64>,
    #[command(flatten)]
    output: Output,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        Ok(v) => Err(format!("must be a positive number, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn odd_window(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(k) if k % 2 == 1 => Ok(k),
        Ok(k) => Err(format!("must be odd and at least 1, got {k}")),
        Err(e) => Err(e.to_string()),
    }
}

/// A runtime failure reported as one JSON line on stderr.
#[derive(Debug)]
struct Failure {
    kind: &'static str,
    message: String,
    line: Option<u64>,
}

impl Failure {
    fn new(kind: &'static str, message: impl ToString) -> Self {
        Failure {
            kind,
            message: message.to_string(),
            line: None,
        }
    }

    fn to_json(&self) -> Value {
        let mut v = json!({ "error": self.kind, "message": self.message });
        if let Some(line) = self.line {
            v["line"] = json!(line);
        }
        v
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        Failure {
            kind: e.kind(),
            line: e.line(),
            message: e.to_string(),
        }
    }
}

impl From<AnalyticsError> for Failure {
    fn from(e: AnalyticsError) -> Self {
        Failure::new("Analytics", e)
    }
}

impl From<GazeError> for Failure {
    fn from(e: GazeError) -> Self {
        let kind = match e {
            GazeError::InvalidWindow(_) => "InvalidWindow",
            GazeError::PointOutOfFrame { .. } => "PointOutOfFrame",
            GazeError::Model(_) => "Model",
        };
        Failure::new(kind, e)
    }
}

impl From<SyntheticError> for Failure {
    fn from(e: SyntheticError) -> Self {
        let kind = match e {
            SyntheticError::InvalidSpec { .. } => "InvalidSpec",
            _ => "Synthetic",
        };
        Failure::new(kind, e)
    }
}

impl From<ValidationError> for Failure {
    fn from(e: ValidationError) -> Self {
        let kind = match e {
            ValidationError::AlignmentMismatch { .. } => "AlignmentMismatch",
            ValidationError::NoEngagedPeriods { .. } => "NoEngagedPeriods",
            ValidationError::Io { .. } => "Io",
            _ => "Validation",
        };
        Failure::new(kind, e)
    }
}

fn write_to(
    path: &Path,
    write: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<(), Failure> {
    let io_failure = |e: io::Error| Failure::new("Io", format!("{}: {e}", path.display()));
    let mut file = io::BufWriter::new(ingest::create(path)?);
    write(&mut file).map_err(io_failure)?;
    file.flush().map_err(io_failure)?;
    info!("wrote {}", path.display());
    Ok(())
}

fn emit(
    output: &Output,
    write: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<(), Failure> {
    match &output.out {
        Some(path) => write_to(path, write),
        None => {
            let mut out = io::stdout().lock();
            write(&mut out)
                .and_then(|_| out.flush())
                .map_err(|e| Failure::new("Io", format!("stdout: {e}")))
        }
    }
}

fn assign(args: &AssignArgs) -> Result<(), Failure> {
    let regions = ingest::parse_region_config(&args.regions)?;
    let points = ingest::parse_gaze_points(&args.gaze)?;
    // Labels files carry no rate; frame indices are all that is matched on.
    let emotions = match &args.emotions {
        Some(p) => Some(ingest::parse_label_stream(p, 1.0)?),
        None => None,
    };
    let session = ingest::session_name(&args.gaze);
    let stream = points_to_stream(
        &session,
        1.0,
        &points,
        &regions,
        args.smooth,
        emotions.as_ref(),
    )?;
    debug!("{} records assigned", stream.records().len());
    emit(&args.output, |w| ingest::write_label_stream(&stream, w))
}

/// Loads and processes each labels file on its own thread, keeping order.
fn per_session<T: Send>(
    paths: &[PathBuf],
    fps: f64,
    work: impl Fn(LabelStream) -> Result<T, Failure> + Sync,
) -> Result<Vec<T>, Failure> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = paths
            .iter()
            .map(|p| {
                let work = &work;
                scope.spawn(move || work(ingest::parse_label_stream(p, fps)?))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("session worker panicked"))
            .collect()
    })
}

fn features(args: &FeaturesArgs) -> Result<(), Failure> {
    let opts = SegmentOptions::from(args.segment);
    let rows: Vec<WindowFeatures> = per_session(&args.labels, args.fps, |stream| {
        Ok(session_features(&stream, args.window, opts)?)
    })?
    .into_iter()
    .flatten()
    .collect();
    info!("{} windows from {} sessions", rows.len(), args.labels.len());
    emit(&args.output, |w| table::write_features(&rows, w))
}

fn validate_mpes(args: &MpesArgs) -> Result<(), Failure> {
    let rows = table::read_features(ingest::open(&args.features)?)?;
    let scores = ingest::read_mpes(ingest::open(&args.scores)?)?;
    let method = match args.method {
        Method::Pearson => CorrelationMethod::Pearson,
        Method::Spearman => CorrelationMethod::Spearman,
    };
    let report = validation::mpes_correlation(&rows, &scores, method)?;
    if report.meta.excluded_windows > 0 {
        warn!(
            "{} windows without detected gaze left out",
            report.meta.excluded_windows
        );
    }
    let image = args
        .image
        .clone()
        .or_else(|| args.output.out.as_ref().map(|p| p.with_extension("pgm")));
    emit(&args.output, |w| {
        w.write_all(validation::report_json(&report).as_bytes())
    })?;
    if let Some(image) = image {
        write_to(&image, |w| w.write_all(&validation::report_pgm(&report)))?;
        let flags = validation::flags_path(&image);
        write_to(&flags, |w| {
            w.write_all(validation::report_flags_csv(&report).as_bytes())
        })?;
    }
    Ok(())
}

fn validate_ome(args: &OmeArgs) -> Result<(), Failure> {
    if args.labels.len() != args.periods.len() {
        return Err(Failure::new(
            "AlignmentMismatch",
            format!(
                "{} labels files but {} periods files",
                args.labels.len(),
                args.periods.len()
            ),
        ));
    }
    let streams = per_session(&args.labels, args.fps, Ok)?;
    let periods = args
        .periods
        .iter()
        .map(|p| ingest::read_ome(ingest::open(p)?))
        .collect::<Result<Vec<_>, _>>()?;
    let sessions: Vec<_> = streams
        .iter()
        .zip(&periods)
        .map(|(s, p)| (s, p.as_slice()))
        .collect();
    let cmp = validation::ome_comparison(&sessions, args.segment.into())?;
    let mut text = serde_json::to_string_pretty(&cmp).expect("comparison serializes");
    text.push('\n');
    emit(&args.output, |w| w.write_all(text.as_bytes()))
}

fn synth(args: &SynthArgs) -> Result<(), Failure> {
    let (stream, seed) = match (&args.spec, args.scenario) {
        (Some(path), _) => {
            let spec = ingest::parse_generator_spec(path)?;
            (generate(&spec)?, spec.seed)
        }
        (None, Some(Scenario::Mpes)) => {
            let sc = MpesScenario {
                seed: args.seed,
                windows: args.windows,
                ..MpesScenario::default()
            };
            let session = sc.generate()?;
            if let Some(path) = &args.scores_out {
                write_to(path, |w| ingest::write_mpes(&session.scores, w))?;
            }
            (session.stream, args.seed)
        }
        (None, None) => unreachable!("clap requires a source"),
    };
    info!("{} records generated", stream.records().len());
    emit(&args.output, |w| ingest::write_label_stream(&stream, w))?;
    if let (Some(out), Some(regions)) = (&args.points_out, &args.regions) {
        let regions = ingest::parse_region_config(regions)?;
        let points = gaze_points_for(&stream, &regions, args.point_seed.unwrap_or(seed))?;
        write_to(out, |w| ingest::write_gaze_points(&points, w))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Assign(a) => assign(a),
        Command::Features(a) => features(a),
        Command::Validate(ValidateCommand::Mpes(a)) => validate_mpes(a),
        Command::Validate(ValidateCommand::Ome(a)) => validate_ome(a),
        Command::Synth(a) => synth(a),
    }
}

/// Position and value of `--config` in the raw arguments.
fn config_arg(args: &[OsString]) -> Option<(usize, PathBuf)> {
    args.iter().enumerate().find_map(|(i, a)| {
        let s = a.to_str()?;
        if s == "--config" {
            args.get(i + 1).map(|p| (i, PathBuf::from(p)))
        } else {
            s.strip_prefix("--config=").map(|p| (i, PathBuf::from(p)))
        }
    })
}

/// Splices flags from the config file in after the subcommand, skipping any
/// flag already given on the command line.
fn apply_config(args: Vec<OsString>) -> Result<Vec<OsString>, Failure> {
    let Some((_, path)) = config_arg(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| Failure::new("Io", format!("{}: {e}", path.display())))?;
    let root: Value = serde_json::from_str(&text).map_err(|e| {
        let mut f = Failure::new("MalformedJson", format!("{}: {e}", path.display()));
        f.line = Some(e.line() as u64);
        f
    })?;
    let Value::Object(map) = root else {
        return Err(Failure::new(
            "InvalidField",
            format!("{}: expected a JSON object", path.display()),
        ));
    };

    // Find the (possibly nested) subcommand named on the command line.
    let mut cmd = Cli::command();
    let mut insert_at = None;
    let mut i = 1;
    while i < args.len() {
        let token = args[i].to_string_lossy();
        if token == "--config" {
            i += 2;
            continue;
        }
        if let Some(sub) = cmd.find_subcommand(token.as_ref()).cloned() {
            cmd = sub;
            insert_at = Some(i + 1);
        } else if insert_at.is_some() {
            break;
        }
        i += 1;
    }
    let Some(at) = insert_at else {
        return Ok(args);
    };

    let given = |name: &str| {
        let flag = format!("--{name}");
        args.iter().any(|a| {
            let a = a.to_string_lossy();
            a == flag || a.starts_with(&format!("{flag}="))
        })
    };
    let mut extra: Vec<OsString> = Vec::new();
    for (key, value) in &map {
        let name = key.replace('_', "-");
        if name == "config" {
            continue;
        }
        if !cmd
            .get_arguments()
            .any(|a| a.get_long() == Some(name.as_str()))
        {
            warn!("config key `{key}` does not apply to `{}`", cmd.get_name());
            continue;
        }
        // `--out` and `--stdout` are alternatives: either one on the command
        // line overrides both.
        let taken = match name.as_str() {
            "out" | "stdout" => given("out") || given("stdout"),
            _ => given(&name),
        };
        if taken {
            continue;
        }
        let values = match value {
            Value::Array(items) => items.clone(),
            other => vec![other.clone()],
        };
        for v in values {
            match v {
                Value::Bool(true) => extra.push(format!("--{name}").into()),
                Value::Bool(false) | Value::Null => {}
                Value::String(s) => extra.extend([format!("--{name}").into(), s.into()]),
                other => extra.extend([format!("--{name}").into(), other.to_string().into()]),
            }
        }
    }
    let mut out = args;
    out.splice(at..at, extra);
    Ok(out)
}

fn fail(f: Failure) -> ExitCode {
    eprintln!("{}", f.to_json());
    ExitCode::from(1)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("AVEID_LOG", "warn")).init();
    let args = match apply_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(f) => return fail(f),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => fail(f),
    }
}
