use serde::{Deserialize, Serialize};

use super::EvalError;

/// Allowed deviation of a softmax row sum from one.
pub const SOFTMAX_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub softmax: Vec<f64>,
    pub label: usize,
    #[serde(default)]
    pub split: usize,
}

/// Per-test-sample softmax outputs with true labels, tagged by train/test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub classes: usize,
    pub splits: usize,
    pub rows: Vec<ScoreRow>,
}

impl ScoreMatrix {
    pub fn new(classes: usize, splits: usize, rows: Vec<ScoreRow>) -> Result<Self, EvalError> {
        let m = Self {
            classes,
            splits,
            rows,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn from_json(raw: &str) -> Result<Self, EvalError> {
        let m: Self =
            serde_json::from_str(raw).map_err(|e| EvalError::ScoreFormat(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.classes < 2 {
            return Err(EvalError::ScoreFormat(format!(
                "need at least 2 classes, got {}",
                self.classes
            )));
        }
        if self.splits == 0 {
            return Err(EvalError::ScoreFormat("need at least one split".into()));
        }
        for (row, r) in self.rows.iter().enumerate() {
            let bad = |message: String| Err(EvalError::InvalidRow { row, message });
            if r.softmax.len() != self.classes {
                return bad(format!(
                    "softmax has {} entries, expected {}",
                    r.softmax.len(),
                    self.classes
                ));
            }
            if r.label >= self.classes {
                return bad(format!("label {} out of range", r.label));
            }
            if r.split >= self.splits {
                return bad(format!("split {} out of range", r.split));
            }
            if r.softmax.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return bad("softmax entry outside [0, 1]".into());
            }
            let sum: f64 = r.softmax.iter().sum();
            if (sum - 1.0).abs() > SOFTMAX_TOLERANCE {
                return bad(format!("softmax sums to {sum}"));
            }
        }
        Ok(())
    }

    /// Rows of one split, as a standalone matrix.
    pub fn split(&self, split: usize) -> ScoreMatrix {
        ScoreMatrix {
            classes: self.classes,
            splits: self.splits,
            rows: self.rows.iter().filter(|r| r.split == split).cloned().collect(),
        }
    }
}

/// Index of the largest entry; lowest index wins ties.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in v.iter().enumerate() {
        if p > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    /// `None` for splits with no rows.
    pub per_split: Vec<Option<f64>>,
    /// Mean over nonempty splits.
    pub mean: f64,
    pub empty_splits: Vec<usize>,
}

/// Fraction of rows whose argmax equals the label, per split and averaged
/// over the nonempty splits.
pub fn classification_accuracy(m: &ScoreMatrix) -> Result<AccuracyReport, EvalError> {
    if m.rows.is_empty() {
        return Err(EvalError::EmptyMatrix);
    }
    let mut correct = vec![0usize; m.splits];
    let mut total = vec![0usize; m.splits];
    for r in &m.rows {
        total[r.split] += 1;
        if argmax(&r.softmax) == r.label {
            correct[r.split] += 1;
        }
    }
    let per_split: Vec<Option<f64>> = correct
        .iter()
        .zip(&total)
        .map(|(&c, &t)| (t > 0).then(|| c as f64 / t as f64))
        .collect();
    let empty_splits = (0..m.splits).filter(|&s| total[s] == 0).collect();
    let present: Vec<f64> = per_split.iter().flatten().copied().collect();
    let mean = present.iter().sum::<f64>() / present.len() as f64;
    Ok(AccuracyReport {
        per_split,
        mean,
        empty_splits,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Comparisons {
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
}

/// True-class softmax entries become genuine scores; every other entry of
/// the row becomes an impostor score.
pub fn scores_to_comparisons(m: &ScoreMatrix) -> Comparisons {
    let mut out = Comparisons {
        genuine: Vec::with_capacity(m.rows.len()),
        impostor: Vec::with_capacity(m.rows.len() * (m.classes - 1)),
    };
    for r in &m.rows {
        for (c, &p) in r.softmax.iter().enumerate() {
            if c == r.label {
                out.genuine.push(p);
            } else {
                out.impostor.push(p);
            }
        }
    }
    out
}
