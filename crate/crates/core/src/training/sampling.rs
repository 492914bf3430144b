use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::JudgmentSet;
use crate::error::{Error, Result};

/// Consecutive rejections tolerated before sampling gives up.
pub const MAX_REJECTIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub query_id: String,
    pub pos_doc_id: String,
    pub neg_doc_id: String,
}

/// One query's judged documents split into three disjoint lists.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryGroups {
    /// Canonical grade above Rel (HRel, Key, Nav).
    pub highly_relevant: Vec<String>,
    /// Grade exactly Rel.
    pub relevant: Vec<String>,
    /// NRel and Junk.
    pub non_relevant: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelevanceGroups {
    pub per_query: BTreeMap<String, QueryGroups>,
}

impl RelevanceGroups {
    /// Drops documents for which `keep` is false (e.g. not in the corpus).
    pub fn retain_docs(&mut self, mut keep: impl FnMut(&str, &str) -> bool) {
        for (q, g) in self.per_query.iter_mut() {
            g.highly_relevant.retain(|d| keep(q, d));
            g.relevant.retain(|d| keep(q, d));
            g.non_relevant.retain(|d| keep(q, d));
        }
    }

    pub fn highly_count(&self) -> usize {
        self.per_query.values().map(|g| g.highly_relevant.len()).sum()
    }

    pub fn relevant_count(&self) -> usize {
        self.per_query.values().map(|g| g.relevant.len()).sum()
    }
}

pub fn build_groups(qrels: &JudgmentSet, query_ids: &[String]) -> RelevanceGroups {
    let mut per_query = BTreeMap::new();
    for qid in query_ids {
        let Some(judged) = qrels.for_query(qid) else {
            continue;
        };
        let mut g = QueryGroups::default();
        for (doc, &grade) in judged {
            match grade {
                g_ if g_ > 1 => g.highly_relevant.push(doc.clone()),
                1 => g.relevant.push(doc.clone()),
                _ => g.non_relevant.push(doc.clone()),
            }
        }
        per_query.insert(qid.clone(), g);
    }
    RelevanceGroups { per_query }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositiveGroup {
    Highly,
    Relevant,
}

/// Draws training triples: a positive group with probability proportional
/// to its size, a positive uniformly from that group across all queries, and
/// a negative from the positive's query one level down.
#[derive(Debug, Clone)]
pub struct TripleSampler<'a> {
    groups: &'a RelevanceGroups,
    highly: Vec<(&'a str, &'a str)>,
    relevant: Vec<(&'a str, &'a str)>,
}

impl<'a> TripleSampler<'a> {
    pub fn new(groups: &'a RelevanceGroups) -> Self {
        let mut highly = Vec::new();
        let mut relevant = Vec::new();
        for (q, g) in &groups.per_query {
            highly.extend(g.highly_relevant.iter().map(|d| (q.as_str(), d.as_str())));
            relevant.extend(g.relevant.iter().map(|d| (q.as_str(), d.as_str())));
        }
        Self {
            groups,
            highly,
            relevant,
        }
    }

    /// Probability of drawing the positive from the highly-relevant group.
    pub fn highly_probability(&self) -> f64 {
        let total = self.highly.len() + self.relevant.len();
        if total == 0 {
            0.0
        } else {
            self.highly.len() as f64 / total as f64
        }
    }

    pub fn choose_group<R: Rng>(&self, rng: &mut R) -> Result<PositiveGroup> {
        let total = self.highly.len() + self.relevant.len();
        if total == 0 {
            return Err(Error::Sampling("no relevant documents to use as positives".into()));
        }
        Ok(if rng.gen_range(0..total) < self.highly.len() {
            PositiveGroup::Highly
        } else {
            PositiveGroup::Relevant
        })
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<Triple> {
        let group = self.choose_group(rng)?;
        let pool = match group {
            PositiveGroup::Highly => &self.highly,
            PositiveGroup::Relevant => &self.relevant,
        };
        for _ in 0..MAX_REJECTIONS {
            let (qid, pos) = pool[rng.gen_range(0..pool.len())];
            let g = &self.groups.per_query[qid];
            let negatives = match group {
                PositiveGroup::Highly => &g.relevant,
                PositiveGroup::Relevant => &g.non_relevant,
            };
            if negatives.is_empty() {
                continue;
            }
            let neg = &negatives[rng.gen_range(0..negatives.len())];
            return Ok(Triple {
                query_id: qid.to_string(),
                pos_doc_id: pos.to_string(),
                neg_doc_id: neg.clone(),
            });
        }
        Err(Error::Sampling(format!(
            "{MAX_REJECTIONS} consecutive draws found no negative; training set is degenerate"
        )))
    }
}

/// Draws one triple. Prefer [`TripleSampler`] when sampling repeatedly.
pub fn sample_triple<R: Rng>(rng: &mut R, groups: &RelevanceGroups) -> Result<Triple> {
    TripleSampler::new(groups).sample(rng)
}
