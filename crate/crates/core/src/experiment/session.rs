use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Event, PairSpec, ServiceError};
use crate::eval::Verdict;

/// Live state of one examiner session. Answered pairs are always the prefix
/// `schedule[..cursor]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub subject_id: String,
    pub seed: u64,
    pub schedule: Vec<PairSpec>,
    pub cursor: usize,
    /// Decision time per answered pair, ms.
    pub elapsed_ms: Vec<u64>,
}

impl SessionState {
    pub fn new(session_id: String, subject_id: String, seed: u64, schedule: Vec<PairSpec>) -> Self {
        Self {
            session_id,
            subject_id,
            seed,
            schedule,
            cursor: 0,
            elapsed_ms: Vec::new(),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.cursor == self.schedule.len()
    }

    pub fn current(&self) -> Option<&PairSpec> {
        self.schedule.get(self.cursor)
    }

    pub(crate) fn is_answered(&self, pair_id: &str) -> bool {
        self.schedule[..self.cursor]
            .iter()
            .any(|p| p.pair_id == pair_id)
    }

    fn apply_decision(&mut self, index: usize, pair_id: &str, elapsed_ms: u64) -> Result<(), String> {
        if index != self.cursor {
            return Err(format!(
                "decision for index {index} while cursor is at {}",
                self.cursor
            ));
        }
        match self.current() {
            Some(p) if p.pair_id == pair_id => {}
            Some(p) => return Err(format!("decision for {pair_id}, scheduled {}", p.pair_id)),
            None => return Err(format!("decision for {pair_id} after completion")),
        }
        self.cursor += 1;
        self.elapsed_ms.push(elapsed_ms);
        Ok(())
    }
}

/// Draws `k` pairs without replacement, balanced between genuine and impostor
/// to within one (when the pool allows it), in a seeded random order.
pub fn sample_schedule(pool: &[PairSpec], k: usize, seed: u64) -> Result<Vec<PairSpec>, ServiceError> {
    if k == 0 {
        return Err(ServiceError::InvalidRequest("k must be at least 1".into()));
    }
    if k > pool.len() {
        return Err(ServiceError::Capacity {
            requested: k,
            available: pool.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (genuine, impostor): (Vec<usize>, Vec<usize>) =
        (0..pool.len()).partition(|&i| pool[i].ground_truth == Verdict::Genuine);

    let mut want_genuine = k / 2;
    if k % 2 == 1 && rng.random_bool(0.5) {
        want_genuine += 1;
    }
    let mut n_genuine = want_genuine.min(genuine.len());
    let mut n_impostor = k - n_genuine;
    if n_impostor > impostor.len() {
        n_impostor = impostor.len();
        n_genuine = k - n_impostor;
    }

    let mut picked: Vec<usize> = index::sample(&mut rng, genuine.len(), n_genuine)
        .into_iter()
        .map(|i| genuine[i])
        .chain(
            index::sample(&mut rng, impostor.len(), n_impostor)
                .into_iter()
                .map(|i| impostor[i]),
        )
        .collect();
    picked.shuffle(&mut rng);
    Ok(picked.into_iter().map(|i| pool[i].clone()).collect())
}

/// Rebuilds every session from the event sequence, checking that decisions
/// arrive in schedule order.
pub fn replay(events: &[Event]) -> Result<BTreeMap<String, SessionState>, ServiceError> {
    let mut sessions = BTreeMap::new();
    for (i, event) in events.iter().enumerate() {
        let corrupt = |message: String| ServiceError::Corrupt {
            line: i + 1,
            message,
        };
        match event {
            Event::SessionCreated {
                session_id,
                subject_id,
                seed,
                schedule,
                ..
            } => {
                let state = SessionState::new(
                    session_id.clone(),
                    subject_id.clone(),
                    *seed,
                    schedule.clone(),
                );
                if sessions.insert(session_id.clone(), state).is_some() {
                    return Err(corrupt(format!("session {session_id} created twice")));
                }
            }
            Event::Decision {
                session_id,
                index,
                record,
                ..
            } => {
                let state = sessions
                    .get_mut(session_id)
                    .ok_or_else(|| corrupt(format!("decision for unknown session {session_id}")))?;
                state
                    .apply_decision(*index, &record.pair_id, record.elapsed_ms)
                    .map_err(corrupt)?;
            }
        }
    }
    Ok(sessions)
}
