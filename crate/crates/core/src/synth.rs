//! Desk-scale synthetic benchmark with planted positional relevance.
//!
//! Every document is written for one query. A document holding two
//! consecutive query terms in query order is grade 2, one holding at least
//! two distinct query terms with no such bigram is grade 1, and anything else
//! is grade 0. Some grade-0 documents repeat a single query term several
//! times, so the unigram-overlap baseline run ranks them first.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::corpus::{
    write_corpus, write_embeddings, write_id_list, write_qrels, write_queries, write_run,
    EmbeddingTable, JudgmentSet, Query, RunRanking, TokenizedDocument,
};
use crate::error::{Error, Result};
use crate::model::PacrrConfig;
use crate::scorer::OverlapScorer;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub num_docs: usize,
    pub train_queries: usize,
    pub validation_queries: usize,
    /// Filler words, disjoint from query terms.
    pub vocab_size: usize,
    pub embedding_dim: usize,
    pub doc_len_min: usize,
    pub doc_len_max: usize,
    pub query_len_min: usize,
    pub query_len_max: usize,
    /// Target share of grade-2 documents.
    pub p_highly: f64,
    /// Target share of grade-1 documents.
    pub p_relevant: f64,
    /// Share of grade-0 documents that repeat one query term.
    pub p_distractor: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            num_docs: 500,
            train_queries: 30,
            validation_queries: 10,
            vocab_size: 2000,
            embedding_dim: 32,
            doc_len_min: 15,
            doc_len_max: 40,
            query_len_min: 2,
            query_len_max: 4,
            p_highly: 0.2,
            p_relevant: 0.3,
            p_distractor: 0.5,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synth: {m}")));
        let queries = self.train_queries + self.validation_queries;
        if queries == 0 || self.num_docs < 2 * queries {
            return bad("need at least one query and two documents per query");
        }
        if self.query_len_min < 2 || self.query_len_max < self.query_len_min {
            return bad("query lengths must satisfy 2 <= min <= max");
        }
        if self.doc_len_min < 2 * self.query_len_max + 6 || self.doc_len_max < self.doc_len_min {
            return bad("document lengths too short for planting");
        }
        if self.vocab_size == 0 || self.embedding_dim == 0 {
            return bad("vocabulary and embedding dimension must be positive");
        }
        let ps = [self.p_highly, self.p_relevant, self.p_distractor];
        if ps.iter().any(|p| !(0.0..=1.0).contains(p)) || self.p_highly + self.p_relevant > 1.0 {
            return bad("probabilities must lie in [0, 1] and grade shares sum to at most 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub docs: Vec<TokenizedDocument>,
    pub queries: Vec<Query>,
    pub qrels: JudgmentSet,
    pub baseline: Vec<RunRanking>,
    pub embeddings: EmbeddingTable,
    pub train_ids: Vec<String>,
    pub validation_ids: Vec<String>,
}

/// Grade of `doc` for `query` under the planted rule.
pub fn planted_grade(query: &[String], doc: &[String]) -> i32 {
    let has_bigram = doc
        .windows(2)
        .any(|w| query.windows(2).any(|q| q[0] == w[0] && q[1] == w[1]));
    if has_bigram {
        return 2;
    }
    let distinct: HashSet<&String> = doc.iter().filter(|t| query.contains(t)).collect();
    if distinct.len() >= 2 {
        1
    } else {
        0
    }
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            return v.iter().map(|x| (x / norm) as f32).collect();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Plan {
    Bigram,
    Scattered,
    Distractor,
    Plain,
}

/// Picks distinct, pairwise non-adjacent positions in `0..len`.
fn spaced_positions(rng: &mut ChaCha8Rng, len: usize, count: usize) -> Vec<usize> {
    loop {
        let mut pos: Vec<usize> = rand::seq::index::sample(rng, len, count).into_vec();
        pos.sort_unstable();
        if pos.windows(2).all(|w| w[1] - w[0] >= 2) {
            return pos;
        }
    }
}

fn plant(rng: &mut ChaCha8Rng, plan: Plan, query: &[String], filler: &[String], len: usize) -> Vec<String> {
    let mut doc: Vec<String> = (0..len)
        .map(|_| filler[rng.gen_range(0..filler.len())].clone())
        .collect();
    match plan {
        Plan::Bigram => {
            let i = rng.gen_range(0..query.len() - 1);
            let p = rng.gen_range(0..len - 1);
            doc[p] = query[i].clone();
            doc[p + 1] = query[i + 1].clone();
        }
        Plan::Scattered => {
            let mut terms: Vec<usize> = rand::seq::index::sample(rng, query.len(), 2).into_vec();
            terms.sort_unstable();
            for (t, p) in terms.into_iter().zip(spaced_positions(rng, len, 2)) {
                doc[p] = query[t].clone();
            }
        }
        Plan::Distractor => {
            let t = &query[rng.gen_range(0..query.len())];
            let reps = rng.gen_range(3..=6);
            for p in spaced_positions(rng, len, reps) {
                doc[p] = t.clone();
            }
        }
        Plan::Plain => {
            if rng.gen_bool(0.5) {
                let p = rng.gen_range(0..len);
                doc[p] = query[rng.gen_range(0..query.len())].clone();
            }
        }
    }
    doc
}

/// Generates a benchmark; identical seeds give identical data.
pub fn generate(config: &SynthConfig) -> Result<SynthData> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_queries = config.train_queries + config.validation_queries;

    let filler: Vec<String> = (0..config.vocab_size).map(|i| format!("w{i:05}")).collect();
    let mut term_id = 0;
    let queries: Vec<Query> = (0..n_queries)
        .map(|i| {
            let len = rng.gen_range(config.query_len_min..=config.query_len_max);
            let tokens = (0..len)
                .map(|_| {
                    term_id += 1;
                    format!("t{term_id:04}")
                })
                .collect();
            Query {
                query_id: format!("q{:03}", i + 1),
                tokens,
            }
        })
        .collect();

    let mut embeddings = EmbeddingTable::new(config.embedding_dim);
    for token in filler.iter().chain(queries.iter().flat_map(|q| &q.tokens)) {
        embeddings.insert(token, unit_vector(&mut rng, config.embedding_dim))?;
    }

    let mut docs = Vec::with_capacity(config.num_docs);
    let mut qrels = JudgmentSet::new();
    let mut per_query: Vec<Vec<usize>> = vec![Vec::new(); n_queries];
    for i in 0..config.num_docs {
        let qi = i % n_queries;
        let slot = i / n_queries;
        // Each query gets at least one grade-2 document and one distractor.
        let plan = match slot {
            0 => Plan::Bigram,
            1 => Plan::Distractor,
            _ => {
                let u: f64 = rng.gen();
                if u < config.p_highly {
                    Plan::Bigram
                } else if u < config.p_highly + config.p_relevant {
                    Plan::Scattered
                } else if rng.gen_bool(config.p_distractor) {
                    Plan::Distractor
                } else {
                    Plan::Plain
                }
            }
        };
        let query = &queries[qi];
        let len = rng.gen_range(config.doc_len_min..=config.doc_len_max);
        let tokens = plant(&mut rng, plan, &query.tokens, &filler, len);
        let doc_id = format!("d{:05}", i + 1);
        qrels.insert(&query.query_id, &doc_id, planted_grade(&query.tokens, &tokens))?;
        per_query[qi].push(docs.len());
        docs.push(TokenizedDocument { doc_id, tokens });
    }

    let baseline = queries
        .iter()
        .zip(&per_query)
        .map(|(q, idx)| {
            let mut scored: Vec<(String, f64)> = idx
                .iter()
                .map(|&d| (docs[d].doc_id.clone(), OverlapScorer::count(q, &docs[d]) as f64))
                .collect();
            scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            RunRanking::from_scored(&q.query_id, scored)
        })
        .collect();

    let mut ids: Vec<String> = queries.iter().map(|q| q.query_id.clone()).collect();
    ids.shuffle(&mut rng);
    let validation_ids = ids.split_off(config.train_queries);
    let mut train_ids = ids;
    train_ids.sort();
    let mut validation_ids = validation_ids;
    validation_ids.sort();

    Ok(SynthData {
        docs,
        queries,
        qrels,
        baseline,
        embeddings,
        train_ids,
        validation_ids,
    })
}

/// Config written alongside synthetic data: tiny kwindow model, file names
/// relative to the data directory.
pub fn synth_run_config(seed: u64) -> RunConfig {
    RunConfig {
        model: PacrrConfig {
            seed,
            learning_rate: 0.01,
            ..PacrrConfig::tiny("kwindow")
        },
        iterations: 50,
        ..RunConfig::default()
    }
}

/// Writes the benchmark files plus `pacrr.conf` into `dir`.
pub fn write_synth(dir: &Path, data: &SynthData, run_config: &RunConfig) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_corpus(&dir.join("corpus.jsonl"), &data.docs)?;
    write_queries(&dir.join("queries.jsonl"), &data.queries)?;
    write_qrels(&dir.join("qrels.txt"), &data.qrels)?;
    write_run(&dir.join("run.txt"), &data.baseline, "overlap")?;
    write_embeddings(&dir.join("embeddings.txt"), &data.embeddings)?;
    write_id_list(&dir.join("train_ids.txt"), &data.train_ids)?;
    write_id_list(&dir.join("validation_ids.txt"), &data.validation_ids)?;
    let conf = dir.join("pacrr.conf");
    fs::write(&conf, run_config.to_text()).map_err(|e| Error::io(conf, e))
}
