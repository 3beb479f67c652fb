//! Recognition metrics: closed-set accuracy, ROC/EER, OR-rule ensembles and
//! accuracy bucketed by post-mortem interval.

mod decisions;
mod roc;
mod scores;

pub use decisions::{
    accuracy_by_pmi, ensemble_accuracy, ensemble_accuracy_by_pmi, ensemble_or, parse_decision_log, pmi_buckets_from_data,
    DecisionRecord, EnsembleVerdict, PmiAccuracy, PmiBucket, Source, Verdict,
};
pub use roc::{roc_eer, RocCurve, RocPoint};
pub use scores::{
    classification_accuracy, scores_to_comparisons, AccuracyReport, Comparisons, ScoreMatrix,
    ScoreRow, SOFTMAX_TOLERANCE,
};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("malformed score matrix: {0}")]
    ScoreFormat(String),
    #[error("row {row}: {message}")]
    InvalidRow { row: usize, message: String },
    #[error("score matrix has no rows")]
    EmptyMatrix,
    #[error("{0} score list is empty")]
    EmptyScores(&'static str),
    #[error("decision log line {line}: {message}")]
    DecisionFormat { line: usize, message: String },
    #[error("unknown source {0:?}; expected `machine` or `human:<id>`")]
    InvalidSource(String),
    #[error("pairs missing a verdict from a selected member: {0:?}")]
    IncompleteGroup(Vec<String>),
    #[error("pair {pair_id}: {message}")]
    ConflictingRecords { pair_id: String, message: String },
    #[error("no ensemble members selected")]
    NoMembers,
}
