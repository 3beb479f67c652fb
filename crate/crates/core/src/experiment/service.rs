use std::collections::HashMap;
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::log::read_events;
use super::{
    replay, sample_schedule, Durability, Event, EventLog, NextPair, PairSpec, PointerTrace,
    ServiceError, SessionState,
};
use crate::eval::{DecisionRecord, Source, Verdict};
use crate::gaze::parse_gaze_log;
use crate::saliency::{load_saliency_grid, normalize_map, overlap_q, prepare_cam, OverlapReport, SaliencyGrid};

const LOG_FILE: &str = "events.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServiceConfig {
    pub default_k: usize,
    pub default_seed: u64,
    pub durability: Durability,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            default_k: 20,
            default_seed: 0,
            durability: Durability::Sync,
        }
    }
}

/// Called after a decision is durably appended and before the session
/// state advances. Returning `true` simulates a process crash at that point.
pub type CrashHook = Arc<dyn Fn(&str, usize) -> bool + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub subject_id: String,
    pub total: usize,
    pub cursor: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSubmission {
    pub pair_id: String,
    pub verdict: Verdict,
    #[serde(default)]
    pub elapsed_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pointer_trace: Option<PointerTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub session_id: String,
    pub pair_id: String,
    pub index: usize,
    /// Cursor after the decision.
    pub cursor: usize,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub pair_id: String,
    pub verdict: Verdict,
    pub ground_truth: Verdict,
    pub correct: bool,
    pub elapsed_ms: u64,
    pub pmi_days: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub session_id: String,
    pub subject_id: String,
    pub total: usize,
    pub answered: usize,
    pub complete: bool,
    /// Absent until at least one pair is answered.
    pub accuracy: Option<f64>,
    pub mean_elapsed_ms: Option<f64>,
    pub pairs: Vec<PairOutcome>,
}

impl SessionReport {
    /// Client-facing form: drops accuracy and per-pair outcomes while the
    /// session is still running, since both reveal ground truth.
    pub fn redacted(mut self) -> Self {
        if !self.complete {
            self.accuracy = None;
            self.pairs.clear();
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

impl std::str::FromStr for Side {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            _ => Err(ServiceError::InvalidRequest(format!("unknown side {s:?}"))),
        }
    }
}

/// Runs examiner sessions over a fixed pair pool. All state lives in the
/// event log under the data root; in-memory session state is a cache rebuilt
/// from it on open.
pub struct ExperimentService {
    root: PathBuf,
    pool: Vec<PairSpec>,
    config: ServiceConfig,
    log: EventLog,
    sessions: RwLock<HashMap<String, Arc<Mutex<SessionState>>>>,
    /// Next session number; held while a session is created so ids and log
    /// order agree.
    next_session: Mutex<u64>,
    crash_hook: Option<CrashHook>,
    crashed: AtomicBool,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// Accepts ids usable as a single path segment.
fn check_segment(kind: &str, s: &str) -> Result<(), ServiceError> {
    let ok = !s.is_empty()
        && !s.starts_with('.')
        && s.len() <= 128
        && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(ServiceError::InvalidRequest(format!("invalid {kind} {s:?}")))
    }
}

impl ExperimentService {
    /// Opens the service over `root`, replaying `root/events.jsonl`.
    pub fn open(root: impl AsRef<Path>, pool: Vec<PairSpec>, config: ServiceConfig) -> Result<Self, ServiceError> {
        let root = root.as_ref().to_path_buf();
        std::fs::create_dir_all(&root)?;
        for p in &pool {
            p.validate()?;
        }
        let (log, events) = EventLog::open(root.join(LOG_FILE), config.durability)?;
        let sessions = replay(&events)?;
        let next = sessions.len() as u64 + 1;
        let sessions = sessions
            .into_iter()
            .map(|(k, v)| (k, Arc::new(Mutex::new(v))))
            .collect();
        Ok(Self {
            root,
            pool,
            config,
            log,
            sessions: RwLock::new(sessions),
            next_session: Mutex::new(next),
            crash_hook: None,
            crashed: AtomicBool::new(false),
        })
    }

    pub fn with_crash_hook(mut self, hook: CrashHook) -> Self {
        self.crash_hook = Some(hook);
        self
    }

    pub fn log_path(&self) -> &Path {
        self.log.path()
    }

    pub fn pool(&self) -> &[PairSpec] {
        &self.pool
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    fn ensure_alive(&self) -> Result<(), ServiceError> {
        if self.crashed.load(Ordering::SeqCst) {
            Err(ServiceError::Crashed)
        } else {
            Ok(())
        }
    }

    fn session(&self, session_id: &str) -> Result<Arc<Mutex<SessionState>>, ServiceError> {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(session_id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("session {session_id}")))
    }

    /// Snapshot of every session's in-memory state.
    pub fn sessions(&self) -> Vec<SessionState> {
        let map = self.sessions.read().unwrap_or_else(|e| e.into_inner());
        let mut out: Vec<SessionState> = map
            .values()
            .map(|s| s.lock().unwrap_or_else(|e| e.into_inner()).clone())
            .collect();
        out.sort_by(|a, b| a.session_id.cmp(&b.session_id));
        out
    }

    pub fn create_session(
        &self,
        subject_id: &str,
        k: Option<usize>,
        seed: Option<u64>,
    ) -> Result<SessionSummary, ServiceError> {
        self.ensure_alive()?;
        check_segment("subject id", subject_id)?;
        let k = k.unwrap_or(self.config.default_k);
        let seed = seed.unwrap_or(self.config.default_seed);
        let schedule = sample_schedule(&self.pool, k, seed)?;

        let mut next = self.next_session.lock().unwrap_or_else(|e| e.into_inner());
        let session_id = format!("s{:06}", *next);
        self.log.append(&Event::SessionCreated {
            session_id: session_id.clone(),
            subject_id: subject_id.to_owned(),
            seed,
            schedule: schedule.clone(),
            ts_ms: now_ms(),
        })?;
        *next += 1;
        let state = SessionState::new(session_id.clone(), subject_id.to_owned(), seed, schedule);
        let summary = SessionSummary {
            session_id: session_id.clone(),
            subject_id: subject_id.to_owned(),
            total: state.schedule.len(),
            cursor: 0,
        };
        self.sessions
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(session_id, Arc::new(Mutex::new(state)));
        Ok(summary)
    }

    /// The pair at the cursor, without advancing. Never carries ground truth.
    pub fn next_pair(&self, session_id: &str) -> Result<NextPair, ServiceError> {
        self.ensure_alive()?;
        let session = self.session(session_id)?;
        let s = session.lock().unwrap_or_else(|e| e.into_inner());
        Ok(match s.current() {
            Some(p) => NextPair::Pair(p.view(s.cursor, s.schedule.len())),
            None => NextPair::Complete { answered: s.cursor },
        })
    }

    /// Records a verdict for the pair at the cursor. The record is durable in
    /// the log before the cursor moves and before this returns.
    pub fn record_decision(&self, session_id: &str, submission: DecisionSubmission) -> Result<Ack, ServiceError> {
        self.ensure_alive()?;
        let session = self.session(session_id)?;
        let mut s = session.lock().unwrap_or_else(|e| e.into_inner());
        if s.is_answered(&submission.pair_id) {
            return Err(ServiceError::Conflict(submission.pair_id));
        }
        let pair = match s.current() {
            Some(p) if p.pair_id == submission.pair_id => p.clone(),
            other => {
                return Err(ServiceError::Sequence {
                    expected: other.map(|p| p.pair_id.clone()),
                    got: submission.pair_id,
                })
            }
        };
        if let Some(trace) = &submission.pointer_trace {
            trace.validate()?;
        }

        let index = s.cursor;
        let record = DecisionRecord {
            pair_id: pair.pair_id.clone(),
            source: Source::Human(s.subject_id.clone()),
            verdict: submission.verdict,
            ground_truth: pair.ground_truth,
            pmi_days: pair.pmi_days(),
            elapsed_ms: submission.elapsed_ms,
        };
        self.log.append(&Event::Decision {
            session_id: session_id.to_owned(),
            index,
            record,
            pointer_trace: submission.pointer_trace,
            ts_ms: now_ms(),
        })?;
        if let Some(hook) = &self.crash_hook {
            if hook(session_id, index) {
                self.crashed.store(true, Ordering::SeqCst);
                return Err(ServiceError::Crashed);
            }
        }
        s.cursor += 1;
        s.elapsed_ms.push(submission.elapsed_ms);
        Ok(Ack {
            session_id: session_id.to_owned(),
            pair_id: pair.pair_id,
            index,
            cursor: s.cursor,
            complete: s.is_complete(),
        })
    }

    /// Session outcome computed from the event log on disk.
    pub fn session_report(&self, session_id: &str) -> Result<SessionReport, ServiceError> {
        report_from_events(&read_events(self.log.path())?, session_id)
    }

    pub fn is_complete(&self, session_id: &str) -> Result<bool, ServiceError> {
        let session = self.session(session_id)?;
        let s = session.lock().unwrap_or_else(|e| e.into_inner());
        Ok(s.is_complete())
    }

    fn pair_dir(&self, pair_id: &str) -> Result<PathBuf, ServiceError> {
        check_segment("pair id", pair_id)?;
        Ok(self.root.join("pairs").join(pair_id))
    }

    /// Stores a saliency grid (JSON or 16-bit PNG) for a pair under `name`,
    /// after validating it. Stored as JSON.
    pub fn put_grid(&self, pair_id: &str, name: &str, raw: &[u8]) -> Result<SaliencyGrid, ServiceError> {
        check_segment("grid name", name)?;
        let grid = load_saliency_grid(raw)?;
        let dir = self.pair_dir(pair_id)?.join("grids");
        std::fs::create_dir_all(&dir)?;
        write_atomic(&dir.join(format!("{name}.json")), grid.to_json().as_bytes())?;
        Ok(grid)
    }

    pub fn get_grid(&self, pair_id: &str, name: &str) -> Result<SaliencyGrid, ServiceError> {
        check_segment("grid name", name)?;
        let path = self.pair_dir(pair_id)?.join("grids").join(format!("{name}.json"));
        let raw = read_existing(&path, || format!("grid {name} for pair {pair_id}"))?;
        Ok(load_saliency_grid(&raw)?)
    }

    /// Stores a gaze log (gaze-log CSV) for a pair under `name`.
    pub fn put_gaze_log(&self, pair_id: &str, name: &str, raw: &str) -> Result<usize, ServiceError> {
        check_segment("gaze log name", name)?;
        let samples = parse_gaze_log(raw)?;
        let dir = self.pair_dir(pair_id)?.join("gaze");
        std::fs::create_dir_all(&dir)?;
        write_atomic(&dir.join(format!("{name}.csv")), raw.as_bytes())?;
        Ok(samples.len())
    }

    pub fn get_gaze_log(&self, pair_id: &str, name: &str) -> Result<String, ServiceError> {
        check_segment("gaze log name", name)?;
        let path = self.pair_dir(pair_id)?.join("gaze").join(format!("{name}.csv"));
        let raw = read_existing(&path, || format!("gaze log {name} for pair {pair_id}"))?;
        String::from_utf8(raw).map_err(|e| ServiceError::InvalidRequest(e.to_string()))
    }

    /// Overlap between the stored `cam_<side>` and `human_<side>` grids.
    pub fn pair_overlap(&self, pair_id: &str, side: Side) -> Result<OverlapReport, ServiceError> {
        let cam = self.get_grid(pair_id, &format!("cam_{}", side.as_str()))?;
        let human = self.get_grid(pair_id, &format!("human_{}", side.as_str()))?;
        let pe = normalize_map(&human)?;
        let pc = prepare_cam(&cam, pe.width(), pe.height())?;
        let mut report = overlap_q(&pc, &pe)?;
        report.pair_id = Some(pair_id.to_owned());
        Ok(report)
    }

    /// Raw bytes of one image of a pool pair. Relative URIs resolve against
    /// the data root; the bytes are passed through undecoded.
    pub fn image_bytes(&self, pair_id: &str, side: Side) -> Result<Vec<u8>, ServiceError> {
        let pair = self
            .pool
            .iter()
            .find(|p| p.pair_id == pair_id)
            .ok_or_else(|| ServiceError::NotFound(format!("pair {pair_id}")))?;
        let uri = match side {
            Side::Left => &pair.left.uri,
            Side::Right => &pair.right.uri,
        };
        let uri = uri.strip_prefix("file://").unwrap_or(uri);
        let rel = Path::new(uri);
        let path = if rel.is_absolute() {
            rel.to_path_buf()
        } else {
            if rel.components().any(|c| matches!(c, Component::ParentDir)) {
                return Err(ServiceError::InvalidRequest(format!("image path escapes data root: {uri}")));
            }
            self.root.join(rel)
        };
        read_existing(&path, || format!("image {uri}"))
    }
}

fn read_existing(path: &Path, what: impl FnOnce() -> String) -> Result<Vec<u8>, ServiceError> {
    match std::fs::read(path) {
        Ok(b) => Ok(b),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(ServiceError::NotFound(what())),
        Err(e) => Err(e.into()),
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(tmp, path)
}

/// Builds a session report from log events alone.
pub(crate) fn report_from_events(events: &[Event], session_id: &str) -> Result<SessionReport, ServiceError> {
    let mut header = None;
    let mut pairs = Vec::new();
    for e in events.iter().filter(|e| e.session_id() == session_id) {
        match e {
            Event::SessionCreated {
                subject_id,
                schedule,
                ..
            } => header = Some((subject_id.clone(), schedule.len())),
            Event::Decision { record, .. } => pairs.push(PairOutcome {
                pair_id: record.pair_id.clone(),
                verdict: record.verdict,
                ground_truth: record.ground_truth,
                correct: record.is_correct(),
                elapsed_ms: record.elapsed_ms,
                pmi_days: record.pmi_days,
            }),
        }
    }
    let (subject_id, total) =
        header.ok_or_else(|| ServiceError::NotFound(format!("session {session_id}")))?;
    let answered = pairs.len();
    let (accuracy, mean_elapsed_ms) = if answered == 0 {
        (None, None)
    } else {
        let n = answered as f64;
        (
            Some(pairs.iter().filter(|p| p.correct).count() as f64 / n),
            Some(pairs.iter().map(|p| p.elapsed_ms as f64).sum::<f64>() / n),
        )
    };
    Ok(SessionReport {
        session_id: session_id.to_owned(),
        subject_id,
        total,
        answered,
        complete: answered == total,
        accuracy,
        mean_elapsed_ms,
        pairs,
    })
}
