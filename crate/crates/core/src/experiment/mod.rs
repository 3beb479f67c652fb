//! Examiner sessions: pair scheduling, verdict capture and an append-only
//! JSONL event log that is the single source of truth for every session.

mod log;
mod pair;
mod service;
mod session;

pub use log::{Durability, Event, EventLog, PointerTrace, TraceSource};
pub use pair::{load_pool, ImageRef, ImageView, NextPair, PairSpec, PairView};
pub use service::{
    Ack, CrashHook, DecisionSubmission, ExperimentService, PairOutcome, ServiceConfig,
    SessionReport, SessionSummary, Side,
};
pub use session::{replay, sample_schedule, SessionState};

use crate::gaze::GazeError;
use crate::saliency::GridError;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("pool holds {available} pairs, {requested} requested")]
    Capacity { requested: usize, available: usize },
    #[error("out of sequence: expected {expected:?}, got {got}")]
    Sequence { expected: Option<String>, got: String },
    #[error("pair {0} already answered")]
    Conflict(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid pair pool: {0}")]
    InvalidPool(String),
    #[error("event log line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("service stopped after an injected crash; reopen it")]
    Crashed,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Gaze(#[from] GazeError),
}
