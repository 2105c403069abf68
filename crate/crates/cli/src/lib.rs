//! Headless scenario runner: loads a scene and a behavior, registers task
//! frames from simulated detections, runs the sequence automatically and
//! reports a timing log and an exit status.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use behavior_forge::executor::{ActionStatus, StatusEvent};
use behavior_forge::session::Session;
use behavior_forge::sim::{Scene, DT};
use behavior_forge::{assets, json, ActionSequence, RobotModel};
use thiserror::Error;

/// Sim-time ceiling for one headless run, seconds.
pub const MAX_SIM_TIME: f64 = 900.0;
/// Snapshot log cadence, ticks.
pub const RECORD_EVERY: u64 = 10;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("scene `{name}`: {message}")]
    Scene { name: String, message: String },
    #[error("behavior `{name}`: {message}")]
    Behavior { name: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Scene { .. } | CliError::Behavior { .. } => 2,
        }
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn stem(arg: &str) -> String {
    let name = Path::new(arg)
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| arg.to_string());
    name.trim_end_matches(".json").trim_end_matches(".behavior").to_string()
}

/// Loads a scene from a path, or by bundled name (`door_scene`, `table_scene`).
pub fn resolve_scene(arg: &str) -> Result<(String, Scene), CliError> {
    let name = stem(arg);
    let path = Path::new(arg);
    let scene = if path.exists() {
        Scene::load(path).map_err(|e| CliError::Scene {
            name: arg.to_string(),
            message: e.to_string(),
        })?
    } else {
        match name.as_str() {
            "door_scene" => assets::door_scene(),
            "table_scene" => assets::table_scene(),
            _ => return Err(io_error(path)(std::io::ErrorKind::NotFound.into())),
        }
    };
    Ok((name, scene))
}

/// Loads a behavior from a path, or by bundled name (`push_door`, `pick_place_can`).
pub fn resolve_behavior(arg: &str) -> Result<(String, ActionSequence), CliError> {
    let name = stem(arg);
    let path = Path::new(arg);
    let seq = if path.exists() {
        ActionSequence::load(path).map_err(|e| CliError::Behavior {
            name: arg.to_string(),
            message: e.to_string(),
        })?
    } else {
        match name.as_str() {
            "push_door" => assets::push_door(),
            "pick_place_can" => assets::pick_place_can(),
            _ => return Err(io_error(path)(std::io::ErrorKind::NotFound.into())),
        }
    };
    Ok((name, seq))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Success,
    ValidationFailed(String),
    ActionFailed {
        index: usize,
        description: String,
        reason: String,
    },
    PredicateFailed(String),
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::ValidationFailed(_) => 2,
            Outcome::ActionFailed { .. } => 3,
            Outcome::PredicateFailed(_) => 4,
        }
    }

    pub fn summary(&self) -> String {
        match self {
            Outcome::Success => "success".into(),
            Outcome::ValidationFailed(m) => format!("validation failed: {m}"),
            Outcome::ActionFailed {
                index,
                description,
                reason,
            } => format!("action {index} \"{description}\" failed: {reason}"),
            Outcome::PredicateFailed(m) => format!("success predicate failed: {m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    /// Completion time, simulated seconds since the run started.
    pub time_s: f64,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingLog {
    pub behavior: String,
    pub scene: String,
    pub seed: u64,
    pub outcome: String,
    pub rows: Vec<TimingRow>,
}

/// Formats seconds as `m:ss`.
pub fn clock(seconds: f64) -> String {
    let total = seconds.round() as u64;
    format!("{}:{:02}", total / 60, total % 60)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn comment(s: &str) -> String {
    s.replace(['\n', '\r'], " ")
}

impl TimingLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# behavior: {}", comment(&self.behavior));
        let _ = writeln!(out, "# scene: {}", comment(&self.scene));
        let _ = writeln!(out, "# seed: {}", self.seed);
        let _ = writeln!(out, "# outcome: {}", comment(&self.outcome));
        out.push_str("time_s,description\n");
        for row in &self.rows {
            let _ = writeln!(out, "{:.2},{}", row.time_s, csv_field(&row.description));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, self.to_csv()).map_err(io_error(path))
    }

    /// Human-readable table for the terminal.
    pub fn table(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let _ = writeln!(out, "{:>6}  {}", clock(row.time_s), row.description);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub seed: u64,
    /// Simulated seconds per wall second; 0 runs as fast as possible.
    pub realtime_factor: f64,
    pub record: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            realtime_factor: 0.0,
            record: None,
        }
    }
}

#[derive(Debug)]
pub struct RunReport {
    pub outcome: Outcome,
    pub log: TimingLog,
    pub events: Vec<StatusEvent>,
    pub session: Option<Session>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        self.outcome.exit_code()
    }
}

struct Recorder {
    out: Option<(PathBuf, BufWriter<fs::File>)>,
}

impl Recorder {
    fn open(path: Option<&Path>) -> Result<Self, CliError> {
        let out = match path {
            Some(p) => Some((p.to_path_buf(), BufWriter::new(fs::File::create(p).map_err(io_error(p))?))),
            None => None,
        };
        Ok(Self { out })
    }

    fn record(&mut self, session: &Session) -> Result<(), CliError> {
        if let Some((path, w)) = &mut self.out {
            let value = serde_json::to_value(session.world().snapshot()).expect("snapshots serialize");
            writeln!(w, "{}", json::to_compact(&value)).map_err(io_error(path))?;
        }
        Ok(())
    }

    fn finish(self) -> Result<(), CliError> {
        if let Some((path, mut w)) = self.out {
            w.flush().map_err(io_error(&path))?;
        }
        Ok(())
    }
}

/// Builds a session and checks the behavior against the registered frames.
pub fn prepare(scene: Scene, behavior: &ActionSequence, seed: u64) -> Result<Session, String> {
    let violations = behavior.violations();
    if let Some(v) = violations.first() {
        return Err(v.to_string());
    }
    let session = Session::new(RobotModel::bundled(), scene, behavior.clone(), seed).map_err(|e| e.to_string())?;
    let issues = behavior.validate_against_frames(session.world().frames());
    if !issues.is_empty() {
        let list: Vec<String> = issues.iter().map(|i| i.to_string()).collect();
        return Err(list.join("; "));
    }
    Ok(session)
}

/// Runs `behavior` in `scene` automatically until it finishes, fails or
/// reaches the sim-time ceiling.
pub fn run_scenario(
    scene_name: &str,
    scene: Scene,
    behavior_name: &str,
    behavior: &ActionSequence,
    options: &RunOptions,
) -> Result<RunReport, CliError> {
    let mut log = TimingLog {
        behavior: behavior_name.to_string(),
        scene: scene_name.to_string(),
        seed: options.seed,
        outcome: String::new(),
        rows: Vec::new(),
    };
    let mut session = match prepare(scene, behavior, options.seed) {
        Ok(s) => s,
        Err(message) => {
            let outcome = Outcome::ValidationFailed(message);
            log.outcome = outcome.summary();
            return Ok(RunReport {
                outcome,
                log,
                events: Vec::new(),
                session: None,
            });
        }
    };

    let mut recorder = Recorder::open(options.record.as_deref())?;
    recorder.record(&session)?;
    let start = Instant::now();
    let mut events = Vec::new();
    let mut failure = None;
    session.set_automatic(true);
    let max_ticks = (MAX_SIM_TIME / DT).round() as u64;
    while !session.executor().is_exhausted() && failure.is_none() {
        if session.world().ticks() >= max_ticks {
            failure = Some(Outcome::ActionFailed {
                index: session.executor().selected(),
                description: session
                    .sequence()
                    .get(session.executor().selected())
                    .map(|a| a.description.clone())
                    .unwrap_or_default(),
                reason: format!("run exceeded {MAX_SIM_TIME} s of simulated time"),
            });
            break;
        }
        session.step();
        for e in session.take_events() {
            match e.status {
                ActionStatus::Succeeded => log.rows.push(TimingRow {
                    time_s: e.sim_time,
                    description: e.description.clone(),
                }),
                ActionStatus::Failed => {
                    failure = Some(Outcome::ActionFailed {
                        index: e.index,
                        description: e.description.clone(),
                        reason: e.reason.clone().unwrap_or_else(|| "unknown".into()),
                    })
                }
                _ => {}
            }
            events.push(e);
        }
        if session.world().ticks() % RECORD_EVERY == 0 {
            recorder.record(&session)?;
        }
        if options.realtime_factor > 0.0 {
            let due = Duration::from_secs_f64(session.world().sim_time() / options.realtime_factor);
            if let Some(wait) = due.checked_sub(start.elapsed()) {
                std::thread::sleep(wait);
            }
        }
    }
    if session.world().ticks() % RECORD_EVERY != 0 {
        recorder.record(&session)?;
    }
    recorder.finish()?;

    let outcome = failure.unwrap_or_else(|| match session.world().success() {
        Ok(()) => Outcome::Success,
        Err(m) => Outcome::PredicateFailed(m),
    });
    log.outcome = outcome.summary();
    Ok(RunReport {
        outcome,
        log,
        events,
        session: Some(session),
    })
}

/// Resolves both arguments and runs the scenario.
pub fn run_files(scene: &str, behavior: &str, options: &RunOptions) -> Result<RunReport, CliError> {
    let (scene_name, scene) = resolve_scene(scene)?;
    let (behavior_name, seq) = resolve_behavior(behavior)?;
    run_scenario(&scene_name, scene, &behavior_name, &seq, options)
}
