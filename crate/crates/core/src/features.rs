//! Loaded collections and precomputed model inputs.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::corpus::{
    compute_idf, load_corpus, load_embeddings, load_qrels, load_queries, EmbeddingTable, GradeMap,
    IdfTable, JudgmentSet, Query, TokenizedDocument,
};
use crate::error::Result;
use crate::model::PacrrConfig;
use crate::simmat::{build_sim_matrix, DistilledInput, DistillerRegistry};

/// Everything needed to turn (query id, doc id) pairs into model inputs.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub docs: BTreeMap<String, TokenizedDocument>,
    pub queries: BTreeMap<String, Query>,
    pub qrels: JudgmentSet,
    pub embeddings: EmbeddingTable,
    pub idf: IdfTable,
}

impl Dataset {
    /// Assembles a dataset and computes IDF over `docs`.
    pub fn new(
        docs: Vec<TokenizedDocument>,
        queries: Vec<Query>,
        qrels: JudgmentSet,
        embeddings: EmbeddingTable,
    ) -> Result<Self> {
        let idf = compute_idf(&docs)?;
        Ok(Self {
            docs: docs.into_iter().map(|d| (d.doc_id.clone(), d)).collect(),
            queries: queries.into_iter().map(|q| (q.query_id.clone(), q)).collect(),
            qrels,
            embeddings,
            idf,
        })
    }

    pub fn load(
        corpus: &Path,
        queries: &Path,
        qrels: &Path,
        embeddings: &Path,
        grades: &GradeMap,
    ) -> Result<Self> {
        Self::new(
            load_corpus(corpus)?,
            load_queries(queries)?,
            load_qrels(qrels, grades)?,
            load_embeddings(embeddings)?,
        )
    }
}

/// Distilled inputs keyed by (query id, doc id), plus each query's IDF vector.
#[derive(Debug, Clone, Default)]
pub struct FeatureStore {
    inputs: HashMap<(String, String), DistilledInput>,
    query_idf: HashMap<String, Vec<f64>>,
    missing: usize,
}

impl FeatureStore {
    /// Builds inputs for every requested pair. Pairs whose query or document
    /// is absent from the dataset are skipped and counted in
    /// [`missing`](Self::missing).
    pub fn build<'a>(
        config: &PacrrConfig,
        data: &Dataset,
        pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self> {
        let distiller = DistillerRegistry::default().get(&config.mode)?;
        let shape = config.shape();
        let mut store = FeatureStore::default();
        for (qid, did) in pairs {
            let key = (qid.to_string(), did.to_string());
            if store.inputs.contains_key(&key) {
                continue;
            }
            let (Some(query), Some(doc)) = (data.queries.get(qid), data.docs.get(did)) else {
                log::warn!("no text for ({qid}, {did}); skipping");
                store.missing += 1;
                continue;
            };
            let query = query.truncated(config.l_q);
            let sim = build_sim_matrix(&query, doc, &data.embeddings);
            store.inputs.insert(key, distiller.distill(&sim, shape)?);
            store
                .query_idf
                .entry(qid.to_string())
                .or_insert_with(|| data.idf.query_idf(&query));
        }
        Ok(store)
    }

    pub fn get(&self, query_id: &str, doc_id: &str) -> Option<(&DistilledInput, &[f64])> {
        let input = self.inputs.get(&(query_id.to_string(), doc_id.to_string()))?;
        let idf = self.query_idf.get(query_id)?;
        Some((input, idf))
    }

    pub fn contains(&self, query_id: &str, doc_id: &str) -> bool {
        self.inputs
            .contains_key(&(query_id.to_string(), doc_id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Pairs that could not be built.
    pub fn missing(&self) -> usize {
        self.missing
    }
}
