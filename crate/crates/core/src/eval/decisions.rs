use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    /// Same eye.
    Genuine,
    /// Different eyes.
    Impostor,
}

/// Who made a decision: the classifier or a human examiner.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Source {
    Machine,
    Human(String),
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Machine => f.write_str("machine"),
            Source::Human(id) => write!(f, "human:{id}"),
        }
    }
}

impl FromStr for Source {
    type Err = EvalError;

    /// Accepts `machine`, `human:<id>`, and the shorthand `human<id>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "machine" {
            return Ok(Source::Machine);
        }
        match s.strip_prefix("human") {
            Some(rest) => {
                let id = rest.strip_prefix(':').unwrap_or(rest);
                if id.is_empty() {
                    Err(EvalError::InvalidSource(s.to_owned()))
                } else {
                    Ok(Source::Human(id.to_owned()))
                }
            }
            None => Err(EvalError::InvalidSource(s.to_owned())),
        }
    }
}

impl TryFrom<String> for Source {
    type Error = EvalError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Source> for String {
    fn from(s: Source) -> String {
        s.to_string()
    }
}

/// One genuine/impostor verdict on an iris pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub pair_id: String,
    pub source: Source,
    pub verdict: Verdict,
    pub ground_truth: Verdict,
    /// Days since death.
    pub pmi_days: u32,
    #[serde(default)]
    pub elapsed_ms: u64,
}

impl DecisionRecord {
    pub fn is_correct(&self) -> bool {
        self.verdict == self.ground_truth
    }
}

/// Reads a decision log: one JSON object per line, either a bare
/// [`DecisionRecord`] or an experiment event. Decision events contribute
/// their `record`; other events are skipped. A torn final line (no trailing
/// newline) is ignored.
pub fn parse_decision_log(raw: &str) -> Result<Vec<DecisionRecord>, EvalError> {
    let torn_tail = !raw.is_empty() && !raw.ends_with('\n');
    let lines: Vec<&str> = raw.lines().collect();
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(_) if torn_tail && line_no == lines.len() => break,
            Err(e) => {
                return Err(EvalError::DecisionFormat {
                    line: line_no,
                    message: e.to_string(),
                })
            }
        };
        let record = match value.get("event").and_then(|e| e.as_str()) {
            Some("decision") => value.get("record").cloned().ok_or_else(|| {
                EvalError::DecisionFormat {
                    line: line_no,
                    message: "decision event without record".into(),
                }
            })?,
            Some(_) => continue,
            None => value,
        };
        let record = serde_json::from_value(record).map_err(|e| EvalError::DecisionFormat {
            line: line_no,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleVerdict {
    pub pair_id: String,
    pub verdict: Verdict,
    pub ground_truth: Verdict,
    pub pmi_days: u32,
}

/// OR-rule fusion: a pair is declared genuine when any selected member says
/// genuine. Every pair that at least one member judged must have exactly one
/// verdict from each member. Output is sorted by pair id.
pub fn ensemble_or(
    records: &[DecisionRecord],
    members: &[Source],
) -> Result<Vec<EnsembleVerdict>, EvalError> {
    if members.is_empty() {
        return Err(EvalError::NoMembers);
    }
    let mut by_pair: BTreeMap<&str, Vec<Option<&DecisionRecord>>> = BTreeMap::new();
    for r in records {
        let Some(slot) = members.iter().position(|m| *m == r.source) else {
            continue;
        };
        let entry = by_pair
            .entry(&r.pair_id)
            .or_insert_with(|| vec![None; members.len()]);
        if entry[slot].replace(r).is_some() {
            return Err(EvalError::ConflictingRecords {
                pair_id: r.pair_id.clone(),
                message: format!("more than one verdict from {}", r.source),
            });
        }
    }

    let missing: Vec<String> = by_pair
        .iter()
        .filter(|(_, v)| v.iter().any(Option::is_none))
        .map(|(k, _)| k.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(EvalError::IncompleteGroup(missing));
    }

    by_pair
        .into_iter()
        .map(|(pair_id, votes)| {
            let votes: Vec<&DecisionRecord> = votes.into_iter().flatten().collect();
            let first = votes[0];
            if votes.iter().any(|v| v.ground_truth != first.ground_truth) {
                return Err(EvalError::ConflictingRecords {
                    pair_id: pair_id.to_owned(),
                    message: "members disagree on ground truth".into(),
                });
            }
            let verdict = if votes.iter().any(|v| v.verdict == Verdict::Genuine) {
                Verdict::Genuine
            } else {
                Verdict::Impostor
            };
            Ok(EnsembleVerdict {
                pair_id: pair_id.to_owned(),
                verdict,
                ground_truth: first.ground_truth,
                pmi_days: votes.iter().map(|v| v.pmi_days).max().unwrap_or(0),
            })
        })
        .collect()
}

/// Fraction of ensemble verdicts matching ground truth; `None` when empty.
pub fn ensemble_accuracy(verdicts: &[EnsembleVerdict]) -> Option<f64> {
    if verdicts.is_empty() {
        return None;
    }
    let correct = verdicts.iter().filter(|v| v.verdict == v.ground_truth).count();
    Some(correct as f64 / verdicts.len() as f64)
}

/// Half-open day interval `[lo, hi)`; `hi = None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PmiBucket {
    pub lo: u32,
    pub hi: Option<u32>,
}

impl PmiBucket {
    pub fn contains(&self, days: u32) -> bool {
        days >= self.lo && self.hi.is_none_or(|hi| days < hi)
    }
}

impl fmt::Display for PmiBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hi {
            Some(hi) => write!(f, "[{}, {})", self.lo, hi),
            None => write!(f, "[{}, inf)", self.lo),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmiAccuracy {
    pub bucket: PmiBucket,
    pub source: String,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

fn buckets(edges: &[u32]) -> Vec<PmiBucket> {
    let mut edges: Vec<u32> = edges.iter().copied().filter(|&e| e > 0).collect();
    edges.sort_unstable();
    edges.dedup();
    let mut out = Vec::with_capacity(edges.len() + 1);
    let mut lo = 0;
    for e in edges {
        out.push(PmiBucket { lo, hi: Some(e) });
        lo = e;
    }
    out.push(PmiBucket { lo, hi: None });
    out
}

/// Distinct PMI values in the data, usable as bucket edges so that each
/// acquisition session lands in its own bucket.
pub fn pmi_buckets_from_data(records: &[DecisionRecord]) -> Vec<u32> {
    let mut v: Vec<u32> = records.iter().map(|r| r.pmi_days).collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Accuracy per PMI bucket and source. `edges` split the day axis into
/// `[0, e0), [e0, e1), …, [e_last, ∞)`. Buckets without records for a source
/// are omitted rather than reported as zero. Rows come out ordered by bucket,
/// then source label.
pub fn accuracy_by_pmi(records: &[DecisionRecord], edges: &[u32]) -> Vec<PmiAccuracy> {
    tally_by_pmi(
        records
            .iter()
            .map(|r| (r.source.to_string(), r.pmi_days, r.is_correct())),
        edges,
    )
}

/// Same bucketing as [`accuracy_by_pmi`] for OR-ensemble output, labeled
/// `ensemble`.
pub fn ensemble_accuracy_by_pmi(verdicts: &[EnsembleVerdict], edges: &[u32]) -> Vec<PmiAccuracy> {
    tally_by_pmi(
        verdicts
            .iter()
            .map(|v| ("ensemble".to_owned(), v.pmi_days, v.verdict == v.ground_truth)),
        edges,
    )
}

fn tally_by_pmi(
    items: impl Iterator<Item = (String, u32, bool)>,
    edges: &[u32],
) -> Vec<PmiAccuracy> {
    let buckets = buckets(edges);
    let mut tally: BTreeMap<(PmiBucket, String), (usize, usize)> = BTreeMap::new();
    for (source, days, correct) in items {
        let bucket = *buckets
            .iter()
            .find(|b| b.contains(days))
            .expect("buckets cover every day count");
        let e = tally.entry((bucket, source)).or_default();
        e.1 += 1;
        if correct {
            e.0 += 1;
        }
    }
    tally
        .into_iter()
        .map(|((bucket, source), (correct, total))| PmiAccuracy {
            bucket,
            source,
            correct,
            total,
            accuracy: correct as f64 / total as f64,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Verdict::{Genuine as G, Impostor as I};

    fn rec(pair: &str, source: &str, verdict: Verdict, truth: Verdict, pmi: u32) -> DecisionRecord {
        DecisionRecord {
            pair_id: pair.into(),
            source: source.parse().unwrap(),
            verdict,
            ground_truth: truth,
            pmi_days: pmi,
            elapsed_ms: 1000,
        }
    }

    #[test]
    fn source_parsing() {
        assert_eq!("machine".parse::<Source>().unwrap(), Source::Machine);
        assert_eq!("human:A".parse::<Source>().unwrap(), Source::Human("A".into()));
        assert_eq!("humanB".parse::<Source>().unwrap(), Source::Human("B".into()));
        assert!("human".parse::<Source>().is_err());
        assert!("robot".parse::<Source>().is_err());
        assert_eq!(Source::Human("7".into()).to_string(), "human:7");
    }

    #[test]
    fn or_rule_basic() {
        let recs = vec![
            rec("p1", "machine", G, G, 5),
            rec("p1", "human:A", I, G, 5),
            rec("p1", "human:B", I, G, 5),
            rec("p2", "machine", I, I, 9),
            rec("p2", "human:A", I, I, 9),
            rec("p2", "human:B", I, I, 9),
        ];
        let members: Vec<Source> = ["machine", "human:A", "human:B"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        let e = ensemble_or(&recs, &members).unwrap();
        assert_eq!(e[0].verdict, G);
        assert_eq!(e[1].verdict, I);
        assert_eq!(ensemble_accuracy(&e), Some(1.0));
    }

    #[test]
    fn missing_member_lists_pairs() {
        let recs = vec![
            rec("p1", "machine", G, G, 1),
            rec("p2", "machine", G, G, 1),
            rec("p2", "human:A", G, G, 1),
        ];
        let members = vec![Source::Machine, Source::Human("A".into())];
        match ensemble_or(&recs, &members) {
            Err(EvalError::IncompleteGroup(p)) => assert_eq!(p, vec!["p1".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_member_vote_is_conflict() {
        let recs = vec![rec("p1", "machine", G, G, 1), rec("p1", "machine", I, G, 1)];
        assert!(matches!(
            ensemble_or(&recs, &[Source::Machine]),
            Err(EvalError::ConflictingRecords { .. })
        ));
    }

    #[test]
    fn unselected_sources_are_ignored() {
        let recs = vec![rec("p1", "machine", I, G, 1), rec("p1", "human:Z", G, G, 1)];
        let e = ensemble_or(&recs, &[Source::Machine]).unwrap();
        assert_eq!(e[0].verdict, I);
    }

    #[test]
    fn pmi_all_correct() {
        let recs = vec![
            rec("a", "machine", G, G, 1),
            rec("b", "machine", I, I, 10),
            rec("c", "machine", G, G, 40),
        ];
        let rows = accuracy_by_pmi(&recs, &[2, 7, 14, 30]);
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.accuracy == 1.0));
    }

    #[test]
    fn pmi_single_bucket_equals_overall() {
        let recs = vec![
            rec("a", "machine", G, G, 1),
            rec("b", "machine", G, I, 10),
            rec("c", "machine", G, G, 40),
            rec("d", "machine", I, G, 400),
        ];
        let rows = accuracy_by_pmi(&recs, &[]);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].accuracy, 0.5);
        assert_eq!(rows[0].bucket, PmiBucket { lo: 0, hi: None });
    }

    #[test]
    fn pmi_hand_built_table() {
        // Buckets [0,5) [5,20) [20,inf); 12 records, two sources.
        let t = [
            ("m", 1, true), ("m", 3, false), ("m", 4, true),
            ("h", 2, true), ("h", 4, true),
            ("m", 5, true), ("m", 19, false),
            ("h", 7, false), ("h", 12, false), ("h", 18, true),
            ("m", 20, true), ("h", 90, false),
        ];
        let recs: Vec<_> = t
            .iter()
            .enumerate()
            .map(|(i, &(s, pmi, ok))| {
                let source = if s == "m" { "machine" } else { "human:A" };
                rec(&format!("p{i}"), source, G, if ok { G } else { I }, pmi)
            })
            .collect();
        // Brute-force tally.
        let edges = [5u32, 20];
        let bucket_of = |d: u32| if d < 5 { 0 } else if d < 20 { 1 } else { 2 };
        let mut expected = BTreeMap::new();
        for &(s, pmi, ok) in &t {
            let e = expected.entry((bucket_of(pmi), s)).or_insert((0usize, 0usize));
            e.1 += 1;
            e.0 += ok as usize;
        }
        let rows = accuracy_by_pmi(&recs, &edges);
        assert_eq!(rows.len(), expected.len());
        for r in &rows {
            let b = bucket_of(r.bucket.lo);
            let s = if r.source == "machine" { "m" } else { "h" };
            let (c, n) = expected[&(b, s)];
            assert_eq!((r.correct, r.total), (c, n));
            assert_eq!(r.accuracy, c as f64 / n as f64);
        }
        let h_mid = rows
            .iter()
            .find(|r| r.source == "human:A" && r.bucket.lo == 5)
            .unwrap();
        assert!((h_mid.accuracy - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn buckets_from_data_are_sessions() {
        let recs = vec![rec("a", "machine", G, G, 12), rec("b", "machine", G, G, 5), rec("c", "machine", G, G, 12)];
        assert_eq!(pmi_buckets_from_data(&recs), vec![5, 12]);
        let rows = accuracy_by_pmi(&recs, &pmi_buckets_from_data(&recs));
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].bucket, PmiBucket { lo: 5, hi: Some(12) });
        assert_eq!(rows[1].total, 2);
    }

    #[test]
    fn decision_log_mixes_events_and_records() {
        let raw = concat!(
            r#"{"event":"session_created","session_id":"s1"}"#, "\n",
            r#"{"event":"decision","session_id":"s1","record":{"pair_id":"p1","source":"human:A","verdict":"genuine","ground_truth":"impostor","pmi_days":3,"elapsed_ms":500}}"#, "\n",
            r#"{"pair_id":"p1","source":"machine","verdict":"impostor","ground_truth":"impostor","pmi_days":3}"#, "\n",
            r#"{"pair_id":"p2","sou"#,
        );
        let recs = parse_decision_log(raw).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].source, Source::Human("A".into()));
        assert!(!recs[0].is_correct());
        assert_eq!(recs[1].elapsed_ms, 0);
    }

    #[test]
    fn decision_log_bad_line_reports_number() {
        let raw = "{\"pair_id\":\"p\"}\n";
        assert!(matches!(
            parse_decision_log(raw),
            Err(EvalError::DecisionFormat { line: 1, .. })
        ));
    }

    proptest! {
        #[test]
        fn or_verdict_independent_of_member_order(votes in prop::collection::vec(prop::collection::vec(any::<bool>(), 3), 1..20)) {
            let names = ["machine", "human:A", "human:B"];
            let mut recs = Vec::new();
            for (p, v) in votes.iter().enumerate() {
                for (m, &g) in v.iter().enumerate() {
                    recs.push(rec(&format!("p{p:02}"), names[m], if g { G } else { I }, G, 0));
                }
            }
            let fwd: Vec<Source> = names.iter().map(|s| s.parse().unwrap()).collect();
            let rev: Vec<Source> = fwd.iter().rev().cloned().collect();
            prop_assert_eq!(ensemble_or(&recs, &fwd).unwrap(), ensemble_or(&recs, &rev).unwrap());
        }

        #[test]
        fn or_dominates_members_on_genuine_truth(votes in prop::collection::vec(prop::collection::vec(any::<bool>(), 3), 1..30)) {
            let names = ["machine", "human:A", "human:B"];
            let mut recs = Vec::new();
            for (p, v) in votes.iter().enumerate() {
                for (m, &g) in v.iter().enumerate() {
                    recs.push(rec(&format!("p{p:02}"), names[m], if g { G } else { I }, G, 0));
                }
            }
            let members: Vec<Source> = names.iter().map(|s| s.parse().unwrap()).collect();
            let acc = ensemble_accuracy(&ensemble_or(&recs, &members).unwrap()).unwrap();
            for m in &members {
                let mine: Vec<_> = recs.iter().filter(|r| &r.source == m).collect();
                let a = mine.iter().filter(|r| r.is_correct()).count() as f64 / mine.len() as f64;
                prop_assert!(acc >= a);
            }
        }
    }
}
