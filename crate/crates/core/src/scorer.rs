//! Interchangeable document scorers, selected by name.
//!
//! `pacrr` scores with a trained checkpoint, `overlap` counts query-term
//! occurrences (the unigram baseline), and `constant` gives every document
//! the same score so re-ranking leaves the input order untouched.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use crate::corpus::{Query, RunRanking, TokenizedDocument};
use crate::error::{Error, Result};
use crate::eval::ScoreTable;
use crate::features::Dataset;
use crate::model::{load_params, score, PacrrParams};
use crate::simmat::{build_sim_matrix, Distiller, DistillerRegistry};

pub trait RelevanceScorer: Send + Sync {
    fn name(&self) -> &str;

    fn score(&self, data: &Dataset, query: &Query, doc: &TokenizedDocument) -> Result<f64>;
}

pub struct PacrrScorer {
    params: PacrrParams<f32>,
    distiller: Arc<dyn Distiller>,
}

impl PacrrScorer {
    pub fn new(params: PacrrParams<f32>) -> Result<Self> {
        let distiller = DistillerRegistry::default().get(&params.config.mode)?;
        Ok(Self { params, distiller })
    }

    pub fn params(&self) -> &PacrrParams<f32> {
        &self.params
    }
}

impl RelevanceScorer for PacrrScorer {
    fn name(&self) -> &str {
        "pacrr"
    }

    fn score(&self, data: &Dataset, query: &Query, doc: &TokenizedDocument) -> Result<f64> {
        let cfg = &self.params.config;
        let query = query.truncated(cfg.l_q);
        let sim = build_sim_matrix(&query, doc, &data.embeddings);
        let input = self.distiller.distill(&sim, cfg.shape())?;
        let idf = data.idf.query_idf(&query);
        Ok(score(&self.params, &input, &idf)? as f64)
    }
}

/// Number of document tokens equal to some query token.
#[derive(Debug, Default, Clone, Copy)]
pub struct OverlapScorer;

impl OverlapScorer {
    pub fn count(query: &Query, doc: &TokenizedDocument) -> usize {
        doc.tokens
            .iter()
            .filter(|t| query.tokens.contains(t))
            .count()
    }
}

impl RelevanceScorer for OverlapScorer {
    fn name(&self) -> &str {
        "overlap"
    }

    fn score(&self, _: &Dataset, query: &Query, doc: &TokenizedDocument) -> Result<f64> {
        Ok(Self::count(query, doc) as f64)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantScorer(pub f64);

impl RelevanceScorer for ConstantScorer {
    fn name(&self) -> &str {
        "constant"
    }

    fn score(&self, _: &Dataset, _: &Query, _: &TokenizedDocument) -> Result<f64> {
        Ok(self.0)
    }
}

/// What a scorer factory may draw on.
#[derive(Debug, Clone, Default)]
pub struct ScorerOptions {
    pub checkpoint: Option<PathBuf>,
}

type Factory = Box<dyn Fn(&ScorerOptions) -> Result<Box<dyn RelevanceScorer>> + Send + Sync>;

pub struct ScorerRegistry {
    factories: BTreeMap<String, Factory>,
}

impl fmt::Debug for ScorerRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScorerRegistry")
            .field("names", &self.names())
            .finish()
    }
}

impl ScorerRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn register(
        &mut self,
        name: &str,
        factory: impl Fn(&ScorerOptions) -> Result<Box<dyn RelevanceScorer>> + Send + Sync + 'static,
    ) {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn create(&self, name: &str, options: &ScorerOptions) -> Result<Box<dyn RelevanceScorer>> {
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| Error::UnknownStrategy(name.to_string()))?;
        factory(options)
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }
}

impl Default for ScorerRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register("pacrr", |o| {
            let path = o
                .checkpoint
                .as_ref()
                .ok_or_else(|| Error::Config("the pacrr scorer needs a checkpoint".into()))?;
            Ok(Box::new(PacrrScorer::new(load_params(path)?)?))
        });
        r.register("overlap", |_| Ok(Box::new(OverlapScorer)));
        r.register("constant", |_| Ok(Box::new(ConstantScorer(0.0))));
        r
    }
}

/// Scores every document of every ranking. Documents or queries without
/// text are skipped; the second value counts them.
pub fn score_run(
    scorer: &dyn RelevanceScorer,
    data: &Dataset,
    run: &[RunRanking],
) -> Result<(ScoreTable, usize)> {
    let mut table = ScoreTable::new();
    let mut missing = 0;
    for ranking in run {
        let Some(query) = data.queries.get(&ranking.query_id) else {
            log::warn!("run query {} has no text; skipping", ranking.query_id);
            missing += ranking.entries.len();
            continue;
        };
        let row = table.entry(ranking.query_id.clone()).or_default();
        for doc_id in ranking.doc_ids() {
            match data.docs.get(doc_id) {
                Some(doc) => {
                    row.insert(doc_id.to_string(), scorer.score(data, query, doc)?);
                }
                None => {
                    log::warn!("document {doc_id} not in corpus; skipping");
                    missing += 1;
                }
            }
        }
    }
    Ok((table, missing))
}

/// Scores every judged document of the given queries.
pub fn score_judged(
    scorer: &dyn RelevanceScorer,
    data: &Dataset,
    query_ids: &[String],
) -> Result<ScoreTable> {
    let mut table = ScoreTable::new();
    for qid in query_ids {
        let (Some(query), Some(judged)) = (data.queries.get(qid), data.qrels.for_query(qid)) else {
            continue;
        };
        let row = table.entry(qid.clone()).or_default();
        for doc_id in judged.keys() {
            if let Some(doc) = data.docs.get(doc_id) {
                row.insert(doc_id.clone(), scorer.score(data, query, doc)?);
            }
        }
    }
    Ok(table)
}

/// Scores as the per-query map [`crate::eval::rerank_run`] expects.
pub fn scores_for(table: &ScoreTable, query_id: &str) -> HashMap<String, f64> {
    table
        .get(query_id)
        .map(|m| m.iter().map(|(d, s)| (d.clone(), *s)).collect())
        .unwrap_or_default()
}
