//! Ranking metrics, run re-ranking, and pairwise preference accuracy.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{grade, JudgmentSet, RunRanking};
use crate::error::{Error, Result};

/// Model or baseline scores: query id → doc id → score.
pub type ScoreTable = BTreeMap<String, BTreeMap<String, f64>>;

/// Default cut-off for both metrics.
pub const DEFAULT_K: usize = 20;
/// Default maximum grade in the ERR gain denominator.
pub const DEFAULT_G_MAX: i32 = 4;

/// Four-level label scale used for pair accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MergedLabel {
    NRel,
    Rel,
    HRel,
    Nav,
}

impl MergedLabel {
    pub const ALL: [MergedLabel; 4] = [Self::Nav, Self::HRel, Self::Rel, Self::NRel];

    pub fn name(self) -> &'static str {
        match self {
            Self::Nav => "Nav",
            Self::HRel => "HRel",
            Self::Rel => "Rel",
            Self::NRel => "NRel",
        }
    }
}

/// Nav stays Nav, Key and HRel become HRel, Rel stays, NRel and Junk become NRel.
pub fn merge_grades(g: i32) -> Result<MergedLabel> {
    match g {
        grade::NAV => Ok(MergedLabel::Nav),
        grade::KEY | grade::HREL => Ok(MergedLabel::HRel),
        grade::REL => Ok(MergedLabel::Rel),
        grade::NREL | grade::JUNK => Ok(MergedLabel::NRel),
        other => Err(Error::UnknownGrade(other)),
    }
}

/// Expected reciprocal rank over the first `k` grades.
///
/// Grades are clamped to `0..=g_max`; the stopping probability at a grade
/// `g` is `(2^g − 1) / 2^g_max`.
pub fn err_at_k(grades: &[i32], k: usize, g_max: i32) -> f64 {
    assert!(g_max >= 1, "g_max must be at least 1");
    let denom = 2f64.powi(g_max);
    let mut not_stopped = 1.0;
    let mut err = 0.0;
    for (r, &g) in grades.iter().take(k).enumerate() {
        let g = g.clamp(0, g_max);
        let stop = (2f64.powi(g) - 1.0) / denom;
        err += not_stopped * stop / (r + 1) as f64;
        not_stopped *= 1.0 - stop;
    }
    err
}

fn dcg(grades: impl Iterator<Item = i32>, k: usize) -> f64 {
    grades
        .take(k)
        .enumerate()
        .map(|(r, g)| (2f64.powi(g.max(0)) - 1.0) / ((r + 2) as f64).log2())
        .sum()
}

/// nDCG@k with the ideal list built from every judged grade of the query.
/// Zero when nothing judged is relevant.
pub fn ndcg_at_k(ranked: &[i32], judged: &[i32], k: usize) -> f64 {
    let mut ideal = judged.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg(ideal.into_iter(), k);
    if idcg == 0.0 {
        return 0.0;
    }
    dcg(ranked.iter().copied(), k) / idcg
}

/// Keeps judged, scored documents and sorts them by score, falling back to
/// the original rank on ties. New ranks run from 1.
pub fn rerank_run(run: &RunRanking, scores: &HashMap<String, f64>, qrels: &JudgmentSet) -> RunRanking {
    let mut kept: Vec<(usize, &str, f64)> = run
        .entries
        .iter()
        .filter(|e| qrels.get(&run.query_id, &e.doc_id).is_some())
        .filter_map(|e| scores.get(&e.doc_id).map(|&s| (e.rank, e.doc_id.as_str(), s)))
        .collect();
    kept.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    RunRanking::from_scored(
        &run.query_id,
        kept.into_iter().map(|(_, d, s)| (d.to_string(), s)),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub query_id: String,
    pub err: f64,
    pub ndcg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub k: usize,
    pub per_query: Vec<QueryMetrics>,
    pub mean_err: f64,
    pub mean_ndcg: f64,
}

impl MetricReport {
    pub fn get(&self, query_id: &str) -> Option<&QueryMetrics> {
        self.per_query.iter().find(|m| m.query_id == query_id)
    }
}

/// ERR@k and nDCG@k for every run query that has judgments. Unjudged
/// documents count as grade 0.
pub fn evaluate_run(rankings: &[RunRanking], qrels: &JudgmentSet, k: usize, g_max: i32) -> MetricReport {
    let per_query: Vec<QueryMetrics> = rankings
        .iter()
        .filter_map(|r| {
            let judged = qrels.for_query(&r.query_id)?;
            let grades: Vec<i32> = r
                .doc_ids()
                .map(|d| judged.get(d).copied().unwrap_or(0))
                .collect();
            let all: Vec<i32> = judged.values().copied().collect();
            Some(QueryMetrics {
                query_id: r.query_id.clone(),
                err: err_at_k(&grades, k, g_max),
                ndcg: ndcg_at_k(&grades, &all, k),
            })
        })
        .collect();
    let n = per_query.len().max(1) as f64;
    MetricReport {
        k,
        mean_err: per_query.iter().map(|m| m.err).sum::<f64>() / n,
        mean_ndcg: per_query.iter().map(|m| m.ndcg).sum::<f64>() / n,
        per_query,
    }
}

#[derive(Serialize)]
struct MetricRecord<'a> {
    query_id: &'a str,
    k: usize,
    err20: f64,
    ndcg20: f64,
}

/// One JSON line per query, then an aggregate line with query id `all`.
pub fn write_metrics(path: &Path, report: &MetricReport) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let records = report
        .per_query
        .iter()
        .map(|m| MetricRecord {
            query_id: &m.query_id,
            k: report.k,
            err20: m.err,
            ndcg20: m.ndcg,
        })
        .chain(std::iter::once(MetricRecord {
            query_id: "all",
            k: report.k,
            err20: report.mean_err,
            ndcg20: report.mean_ndcg,
        }));
    for rec in records {
        let line = serde_json::to_string(&rec).expect("metrics serialize");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelPairStats {
    /// e.g. `"Nav-HRel"`, higher label first.
    pub label_pair: String,
    pub higher: MergedLabel,
    pub lower: MergedLabel,
    pub queries: usize,
    pub pairs: usize,
    pub correct: usize,
    /// Share of all compared pairs that carry this label combination.
    pub volume: f64,
    /// `None` when no pair of this kind exists.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAccuracyReport {
    pub label_pairs: Vec<LabelPairStats>,
    pub total_pairs: usize,
    /// Volume-weighted mean accuracy over all label pairs.
    pub weighted_accuracy: f64,
}

impl PairAccuracyReport {
    pub fn pair(&self, higher: MergedLabel, lower: MergedLabel) -> Option<&LabelPairStats> {
        self.label_pairs
            .iter()
            .find(|p| p.higher == higher && p.lower == lower)
    }
}

/// Within each query, compares every two scored documents whose merged
/// labels differ. A pair is correct when the higher-labelled document scores
/// strictly higher.
pub fn pair_accuracy(scores: &ScoreTable, qrels: &JudgmentSet) -> Result<PairAccuracyReport> {
    type Key = (MergedLabel, MergedLabel);
    let mut counts: BTreeMap<Key, (usize, usize)> = BTreeMap::new();
    let mut queries: BTreeMap<Key, BTreeSet<&str>> = BTreeMap::new();
    for (qid, doc_scores) in scores {
        let Some(judged) = qrels.for_query(qid) else {
            continue;
        };
        let docs: Vec<(MergedLabel, f64)> = doc_scores
            .iter()
            .filter_map(|(d, &s)| judged.get(d).map(|&g| (g, s)))
            .map(|(g, s)| merge_grades(g).map(|l| (l, s)))
            .collect::<Result<_>>()?;
        for (a, &(la, sa)) in docs.iter().enumerate() {
            for &(lb, sb) in &docs[a + 1..] {
                if la == lb {
                    continue;
                }
                let (hi, lo, s_hi, s_lo) = if la > lb { (la, lb, sa, sb) } else { (lb, la, sb, sa) };
                let entry = counts.entry((hi, lo)).or_default();
                entry.0 += 1;
                if s_hi > s_lo {
                    entry.1 += 1;
                }
                queries.entry((hi, lo)).or_default().insert(qid);
            }
        }
    }
    let total: usize = counts.values().map(|c| c.0).sum();
    let mut label_pairs = Vec::new();
    let mut correct_total = 0;
    for (i, &hi) in MergedLabel::ALL.iter().enumerate() {
        for &lo in &MergedLabel::ALL[i + 1..] {
            let (pairs, correct) = counts.get(&(hi, lo)).copied().unwrap_or((0, 0));
            correct_total += correct;
            label_pairs.push(LabelPairStats {
                label_pair: format!("{}-{}", hi.name(), lo.name()),
                higher: hi,
                lower: lo,
                queries: queries.get(&(hi, lo)).map_or(0, BTreeSet::len),
                pairs,
                correct,
                volume: if total == 0 { 0.0 } else { pairs as f64 / total as f64 },
                accuracy: (pairs > 0).then(|| correct as f64 / pairs as f64),
            });
        }
    }
    Ok(PairAccuracyReport {
        label_pairs,
        total_pairs: total,
        weighted_accuracy: if total == 0 {
            0.0
        } else {
            correct_total as f64 / total as f64
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::RunEntry;

    #[test]
    fn merge_mapping() {
        assert_eq!(merge_grades(3).unwrap(), MergedLabel::HRel);
        assert_eq!(merge_grades(4).unwrap(), MergedLabel::Nav);
        assert_eq!(merge_grades(-2).unwrap(), MergedLabel::NRel);
        assert_eq!(merge_grades(2).unwrap(), MergedLabel::HRel);
        assert!(merge_grades(-1).is_err());
        assert!(merge_grades(7).is_err());
    }

    #[test]
    fn err_hand_values() {
        assert_eq!(err_at_k(&[0, 0, 0], 20, 4), 0.0);
        assert!((err_at_k(&[4], 20, 4) - 0.9375).abs() < 1e-12);
        assert!((err_at_k(&[4, 1], 20, 4) - 0.939453125).abs() < 1e-12);
        assert_eq!(err_at_k(&[-2, 0], 20, 4), 0.0);
    }

    #[test]
    fn err_respects_cutoff() {
        assert_eq!(err_at_k(&[0, 4], 1, 4), 0.0);
    }

    #[test]
    fn ndcg_hand_values() {
        assert!((ndcg_at_k(&[2, 1, 0], &[0, 1, 2], 20) - 1.0).abs() < 1e-12);
        assert_eq!(ndcg_at_k(&[0, 0], &[0, 0, -2], 20), 0.0);
        assert!((ndcg_at_k(&[0, 1], &[1, 0], 20) - 0.6309297535714575).abs() < 1e-12);
    }

    fn run(q: &str, docs: &[&str]) -> RunRanking {
        RunRanking {
            query_id: q.into(),
            entries: docs
                .iter()
                .enumerate()
                .map(|(i, d)| RunEntry {
                    doc_id: d.to_string(),
                    rank: i + 1,
                    score: -(i as f64),
                })
                .collect(),
        }
    }

    fn qrels(items: &[(&str, &str, i32)]) -> JudgmentSet {
        let mut j = JudgmentSet::new();
        for (q, d, g) in items {
            j.insert(q, d, *g).unwrap();
        }
        j
    }

    #[test]
    fn rerank_reverses_and_keeps_ties() {
        let r = run("q", &["a", "b", "c"]);
        let j = qrels(&[("q", "a", 0), ("q", "b", 1), ("q", "c", 2)]);
        let rev: HashMap<String, f64> =
            [("a", 1.0), ("b", 2.0), ("c", 3.0)].map(|(d, s)| (d.to_string(), s)).into();
        let out = rerank_run(&r, &rev, &j);
        assert_eq!(out.doc_ids().collect::<Vec<_>>(), vec!["c", "b", "a"]);
        assert_eq!(out.entries.iter().map(|e| e.rank).collect::<Vec<_>>(), vec![1, 2, 3]);

        let flat: HashMap<String, f64> = ["a", "b", "c"].map(|d| (d.to_string(), 0.5)).into();
        let out = rerank_run(&r, &flat, &j);
        assert_eq!(out.doc_ids().collect::<Vec<_>>(), vec!["a", "b", "c"]);
    }

    #[test]
    fn rerank_drops_unjudged() {
        let r = run("q", &["a", "x", "b"]);
        let j = qrels(&[("q", "a", 0), ("q", "b", 1)]);
        let s: HashMap<String, f64> = ["a", "x", "b"].map(|d| (d.to_string(), 0.0)).into();
        let out = rerank_run(&r, &s, &j);
        assert_eq!(out.doc_ids().collect::<Vec<_>>(), vec!["a", "b"]);
    }

    fn table(q: &str, items: &[(&str, f64)]) -> ScoreTable {
        let mut t = ScoreTable::new();
        t.insert(q.into(), items.iter().map(|(d, s)| (d.to_string(), *s)).collect());
        t
    }

    #[test]
    fn pair_accuracy_hand_example() {
        let j = qrels(&[("q", "a", 4), ("q", "b", 1), ("q", "c", 0)]);
        let r = pair_accuracy(&table("q", &[("a", 3.0), ("b", 1.0), ("c", 2.0)]), &j).unwrap();
        use MergedLabel::*;
        assert_eq!(r.pair(Nav, Rel).unwrap().accuracy, Some(1.0));
        assert_eq!(r.pair(Nav, NRel).unwrap().accuracy, Some(1.0));
        assert_eq!(r.pair(Rel, NRel).unwrap().accuracy, Some(0.0));
        assert_eq!(r.pair(Nav, HRel).unwrap().accuracy, None);
        assert!((r.weighted_accuracy - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.label_pairs.len(), 6);
        let vol: f64 = r.label_pairs.iter().map(|p| p.volume).sum();
        assert!((vol - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pair_ties_are_wrong() {
        let j = qrels(&[("q", "a", 2), ("q", "b", 0)]);
        let r = pair_accuracy(&table("q", &[("a", 1.0), ("b", 1.0)]), &j).unwrap();
        assert_eq!(r.weighted_accuracy, 0.0);
    }

    #[test]
    fn pairs_do_not_cross_queries() {
        let j = qrels(&[("q1", "a", 2), ("q2", "b", 0)]);
        let mut t = table("q1", &[("a", 0.0)]);
        t.extend(table("q2", &[("b", 1.0)]));
        let r = pair_accuracy(&t, &j).unwrap();
        assert_eq!(r.total_pairs, 0);
    }
}
