use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{PairSpec, ServiceError};
use crate::eval::DecisionRecord;
use crate::gaze::{parse_gaze_log, GazeError, ScreenToImageTransform};

/// Origin tag for an attention trace. Pointer traces are a mouse-movement
/// proxy and are never stored as eye-tracker gaze.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceSource {
    Pointer,
}

/// Pointer samples captured while a pair was on screen, in the gaze-log CSV
/// layout, with the panel geometry that was rendered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointerTrace {
    pub source: TraceSource,
    pub samples_csv: String,
    #[serde(default)]
    pub panels: Vec<ScreenToImageTransform>,
}

impl PointerTrace {
    pub fn validate(&self) -> Result<(), GazeError> {
        parse_gaze_log(&self.samples_csv)?;
        self.panels.iter().try_for_each(|p| p.validate())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    SessionCreated {
        session_id: String,
        subject_id: String,
        seed: u64,
        schedule: Vec<PairSpec>,
        ts_ms: u64,
    },
    Decision {
        session_id: String,
        /// Schedule position answered by this decision.
        index: usize,
        record: DecisionRecord,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pointer_trace: Option<PointerTrace>,
        ts_ms: u64,
    },
}

impl Event {
    pub fn session_id(&self) -> &str {
        match self {
            Event::SessionCreated { session_id, .. } | Event::Decision { session_id, .. } => {
                session_id
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Durability {
    /// `fsync` data after every append.
    #[default]
    Sync,
    /// Flush to the OS only.
    Flush,
}

/// Append-only JSONL event file. Each event is one line written with a
/// single `write_all` under a lock, so concurrent readers only ever see whole
/// records plus at most one torn tail, which they skip.
pub struct EventLog {
    path: PathBuf,
    file: Mutex<File>,
    durability: Durability,
}

impl EventLog {
    /// Opens (creating if needed) the log at `path`, truncates a torn final
    /// line left by a crash mid-write, and returns the events it holds.
    pub fn open(path: impl AsRef<Path>, durability: Durability) -> Result<(Self, Vec<Event>), ServiceError> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)?;
        let mut raw = Vec::new();
        file.seek(SeekFrom::Start(0))?;
        file.read_to_end(&mut raw)?;
        let complete = raw.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        if complete < raw.len() {
            file.set_len(complete as u64)?;
            file.sync_data()?;
        }
        let events = parse_events(&raw[..complete])?;
        Ok((
            Self {
                path,
                file: Mutex::new(file),
                durability,
            },
            events,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends one event; returns once it is durable per the configured policy.
    pub fn append(&self, event: &Event) -> io::Result<()> {
        let mut line = serde_json::to_vec(event).map_err(io::Error::other)?;
        line.push(b'\n');
        let mut file = self.file.lock().unwrap_or_else(|e| e.into_inner());
        file.write_all(&line)?;
        match self.durability {
            Durability::Sync => file.sync_data(),
            Durability::Flush => file.flush(),
        }
    }

    /// Reads every complete event currently on disk.
    pub fn read_all(&self) -> Result<Vec<Event>, ServiceError> {
        read_events(&self.path)
    }
}

/// Reads complete events from a log file, ignoring a torn final line.
pub fn read_events(path: &Path) -> Result<Vec<Event>, ServiceError> {
    let raw = std::fs::read(path)?;
    let complete = raw.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    parse_events(&raw[..complete])
}

fn parse_events(raw: &[u8]) -> Result<Vec<Event>, ServiceError> {
    raw.split(|&b| b == b'\n')
        .enumerate()
        .filter(|(_, l)| !l.iter().all(u8::is_ascii_whitespace))
        .map(|(i, l)| {
            serde_json::from_slice(l).map_err(|e| ServiceError::Corrupt {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
