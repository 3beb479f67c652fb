use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::ServiceError;
use crate::eval::Verdict;
use crate::gaze::ScreenToImageTransform;

/// One displayed image. `uri` is opaque to the service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRef {
    pub uri: String,
    pub eye_id: String,
    pub pmi_days: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<ScreenToImageTransform>,
}

/// A scheduled iris pair with known ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSpec {
    pub pair_id: String,
    pub left: ImageRef,
    pub right: ImageRef,
    pub ground_truth: Verdict,
}

impl PairSpec {
    pub fn validate(&self) -> Result<(), ServiceError> {
        let same_eye = self.left.eye_id == self.right.eye_id;
        let consistent = match self.ground_truth {
            Verdict::Genuine => same_eye,
            Verdict::Impostor => !same_eye,
        };
        if !consistent {
            return Err(ServiceError::InvalidPool(format!(
                "pair {}: ground truth {:?} contradicts eye ids {} / {}",
                self.pair_id, self.ground_truth, self.left.eye_id, self.right.eye_id
            )));
        }
        for t in [&self.left.transform, &self.right.transform].into_iter().flatten() {
            t.validate()
                .map_err(|e| ServiceError::InvalidPool(format!("pair {}: {e}", self.pair_id)))?;
        }
        Ok(())
    }

    /// PMI attached to decisions on this pair: the later of the two acquisitions.
    pub fn pmi_days(&self) -> u32 {
        self.left.pmi_days.max(self.right.pmi_days)
    }

    pub fn view(&self, index: usize, total: usize) -> PairView {
        PairView {
            pair_id: self.pair_id.clone(),
            index,
            total,
            left: ImageView::from(&self.left),
            right: ImageView::from(&self.right),
        }
    }
}

/// Client-facing image description. Eye identities are withheld since they
/// would reveal the ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageView {
    pub uri: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<ScreenToImageTransform>,
}

impl From<&ImageRef> for ImageView {
    fn from(r: &ImageRef) -> Self {
        Self {
            uri: r.uri.clone(),
            transform: r.transform,
        }
    }
}

/// What the examiner UI sees for the current pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairView {
    pub pair_id: String,
    pub index: usize,
    pub total: usize,
    pub left: ImageView,
    pub right: ImageView,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NextPair {
    Pair(PairView),
    Complete { answered: usize },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PoolFile {
    List(Vec<PairSpec>),
    Wrapped { pairs: Vec<PairSpec> },
}

/// Parses and validates a pair pool (a JSON array or `{"pairs": [...]}`).
pub fn load_pool(raw: &str) -> Result<Vec<PairSpec>, ServiceError> {
    let file: PoolFile =
        serde_json::from_str(raw).map_err(|e| ServiceError::InvalidPool(e.to_string()))?;
    let pool = match file {
        PoolFile::List(p) | PoolFile::Wrapped { pairs: p } => p,
    };
    let mut seen = HashSet::new();
    for p in &pool {
        p.validate()?;
        if !seen.insert(p.pair_id.as_str()) {
            return Err(ServiceError::InvalidPool(format!(
                "duplicate pair id {}",
                p.pair_id
            )));
        }
    }
    Ok(pool)
}
