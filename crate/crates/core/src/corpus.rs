//! Ingestion of pre-tokenized documents and queries, TREC judgments and
//! runs, plain-text word vectors, and IDF statistics.
//!
//! All loaders are pure functions of their input file and return immutable
//! structures. Every text format has a matching writer so that ingested data
//! can be persisted and reloaded without loss.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical relevance grades.
pub mod grade {
    pub const JUNK: i32 = -2;
    pub const NREL: i32 = 0;
    pub const REL: i32 = 1;
    pub const HREL: i32 = 2;
    pub const KEY: i32 = 3;
    pub const NAV: i32 = 4;

    pub const CANONICAL: [i32; 6] = [JUNK, NREL, REL, HREL, KEY, NAV];

    pub fn is_canonical(g: i32) -> bool {
        CANONICAL.contains(&g)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDocument {
    pub doc_id: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub query_id: String,
    pub tokens: Vec<String>,
}

impl Query {
    /// Returns the query cut to its first `max_len` tokens, logging a warning
    /// when anything is dropped.
    pub fn truncated(&self, max_len: usize) -> Query {
        if self.tokens.len() <= max_len {
            return self.clone();
        }
        log::warn!(
            "query {} has {} tokens; truncating to {}",
            self.query_id,
            self.tokens.len(),
            max_len
        );
        Query {
            query_id: self.query_id.clone(),
            tokens: self.tokens[..max_len].to_vec(),
        }
    }
}

/// Graded judgments keyed by query, then document.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentSet {
    entries: BTreeMap<String, BTreeMap<String, i32>>,
}

impl JudgmentSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a judgment. The grade must be canonical and the pair new.
    pub fn insert(&mut self, query_id: &str, doc_id: &str, grade: i32) -> Result<()> {
        if !grade::is_canonical(grade) {
            return Err(Error::UnknownGrade(grade));
        }
        let per_query = self.entries.entry(query_id.to_string()).or_default();
        if per_query.contains_key(doc_id) {
            return Err(Error::MissingData(format!(
                "judgment ({query_id}, {doc_id}) given twice"
            )));
        }
        per_query.insert(doc_id.to_string(), grade);
        Ok(())
    }

    pub fn get(&self, query_id: &str, doc_id: &str) -> Option<i32> {
        self.entries.get(query_id)?.get(doc_id).copied()
    }

    pub fn for_query(&self, query_id: &str) -> Option<&BTreeMap<String, i32>> {
        self.entries.get(query_id)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, i32)> {
        self.entries
            .iter()
            .flat_map(|(q, docs)| docs.iter().map(move |(d, g)| (q.as_str(), d.as_str(), *g)))
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Maps raw grades found in a qrels file onto the canonical scale.
///
/// Canonical values map to themselves unless overridden.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GradeMap {
    overrides: HashMap<i32, i32>,
}

impl GradeMap {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn with(mut self, raw: i32, canonical: i32) -> Result<Self> {
        if !grade::is_canonical(canonical) {
            return Err(Error::UnknownGrade(canonical));
        }
        self.overrides.insert(raw, canonical);
        Ok(self)
    }

    /// Parses `raw:canonical` pairs separated by commas, e.g. `"-1:0,5:4"`.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut map = Self::identity();
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (raw, canon) = item
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("grade_map entry `{item}` is not raw:canonical")))?;
            let raw: i32 = raw
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad raw grade in `{item}`")))?;
            let canon: i32 = canon
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad canonical grade in `{item}`")))?;
            map = map.with(raw, canon)?;
        }
        Ok(map)
    }

    pub fn map(&self, raw: i32) -> Result<i32> {
        match self.overrides.get(&raw) {
            Some(&g) => Ok(g),
            None if grade::is_canonical(raw) => Ok(raw),
            None => Err(Error::UnknownGrade(raw)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub doc_id: String,
    pub rank: usize,
    pub score: f64,
}

/// One query's ranked result list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRanking {
    pub query_id: String,
    pub entries: Vec<RunEntry>,
}

impl RunRanking {
    /// Builds a ranking from doc ids in rank order with descending scores.
    pub fn from_scored(query_id: &str, scored: impl IntoIterator<Item = (String, f64)>) -> Self {
        let entries = scored
            .into_iter()
            .enumerate()
            .map(|(i, (doc_id, score))| RunEntry {
                doc_id,
                rank: i + 1,
                score,
            })
            .collect();
        Self {
            query_id: query_id.to_string(),
            entries,
        }
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.doc_id.as_str())
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let mut seen = HashSet::new();
        for pair in self.entries.windows(2) {
            if pair[1].rank <= pair[0].rank {
                return Err(format!(
                    "query {}: ranks not strictly increasing at {}",
                    self.query_id, pair[1].doc_id
                ));
            }
        }
        for e in &self.entries {
            if !seen.insert(e.doc_id.as_str()) {
                return Err(format!("query {}: doc {} ranked twice", self.query_id, e.doc_id));
            }
        }
        Ok(())
    }
}

/// Frozen word vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f32>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn insert(&mut self, token: &str, vector: Vec<f32>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::InconsistentDim {
                token: token.to_string(),
                expected: self.dim,
                got: vector.len(),
            });
        }
        self.vectors.insert(token.to_string(), vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Tokens in lexicographic order.
    pub fn tokens(&self) -> Vec<&str> {
        let mut t: Vec<&str> = self.vectors.keys().map(String::as_str).collect();
        t.sort_unstable();
        t
    }
}

/// Smoothed inverse document frequencies, `ln((N+1)/(df+1))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdfTable {
    pub doc_count: usize,
    pub df: BTreeMap<String, usize>,
    pub values: BTreeMap<String, f64>,
}

impl IdfTable {
    fn smoothed(n: usize, df: usize) -> f64 {
        ((n as f64 + 1.0) / (df as f64 + 1.0)).ln()
    }

    /// IDF of `token`; unseen tokens get `ln(N+1)`.
    pub fn idf(&self, token: &str) -> f64 {
        self.values
            .get(token)
            .copied()
            .unwrap_or_else(|| Self::smoothed(self.doc_count, 0))
    }

    pub fn query_idf(&self, query: &Query) -> Vec<f64> {
        query.tokens.iter().map(|t| self.idf(t)).collect()
    }
}

pub fn compute_idf(corpus: &[TokenizedDocument]) -> Result<IdfTable> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for doc in corpus {
        let unique: HashSet<&str> = doc.tokens.iter().map(String::as_str).collect();
        for t in unique {
            *df.entry(t.to_string()).or_default() += 1;
        }
    }
    let n = corpus.len();
    let values = df
        .iter()
        .map(|(t, &d)| (t.clone(), IdfTable::smoothed(n, d)))
        .collect();
    Ok(IdfTable {
        doc_count: n,
        df,
        values,
    })
}

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Iterates over non-blank lines with 1-based line numbers.
fn lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

pub fn load_corpus(path: &Path) -> Result<Vec<TokenizedDocument>> {
    let mut seen = HashSet::new();
    let mut docs = Vec::new();
    for (no, line) in lines(path)? {
        let doc: TokenizedDocument =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, no, e.to_string()))?;
        if doc.doc_id.is_empty() {
            return Err(Error::parse(path, no, "empty doc_id"));
        }
        if !seen.insert(doc.doc_id.clone()) {
            return Err(Error::DuplicateId {
                path: path.to_path_buf(),
                id: doc.doc_id,
            });
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn load_queries(path: &Path) -> Result<Vec<Query>> {
    let mut seen = HashSet::new();
    let mut queries = Vec::new();
    for (no, line) in lines(path)? {
        let q: Query =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, no, e.to_string()))?;
        if q.query_id.is_empty() {
            return Err(Error::parse(path, no, "empty query_id"));
        }
        if q.tokens.is_empty() {
            return Err(Error::parse(path, no, "query has no tokens"));
        }
        if !seen.insert(q.query_id.clone()) {
            return Err(Error::DuplicateId {
                path: path.to_path_buf(),
                id: q.query_id,
            });
        }
        queries.push(q);
    }
    Ok(queries)
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = create(path)?;
    for item in items {
        let line = serde_json::to_string(item).expect("plain records serialize");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_corpus(path: &Path, docs: &[TokenizedDocument]) -> Result<()> {
    write_jsonl(path, docs)
}

pub fn write_queries(path: &Path, queries: &[Query]) -> Result<()> {
    write_jsonl(path, queries)
}

/// Reads `query_id 0 doc_id grade` lines.
pub fn load_qrels(path: &Path, grades: &GradeMap) -> Result<JudgmentSet> {
    let mut set = JudgmentSet::new();
    for (no, line) in lines(path)? {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::parse(path, no, "expected `query_id 0 doc_id grade`"));
        }
        let raw: i32 = fields[3]
            .parse()
            .map_err(|_| Error::parse(path, no, format!("bad grade `{}`", fields[3])))?;
        let g = grades
            .map(raw)
            .map_err(|e| Error::parse(path, no, e.to_string()))?;
        set.insert(fields[0], fields[2], g)
            .map_err(|e| Error::parse(path, no, e.to_string()))?;
    }
    Ok(set)
}

pub fn write_qrels(path: &Path, qrels: &JudgmentSet) -> Result<()> {
    let mut w = create(path)?;
    for (q, d, g) in qrels.iter() {
        writeln!(w, "{q} 0 {d} {g}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads `query_id Q0 doc_id rank score tag` lines. Rankings come back
/// ordered by query id, entries by rank.
pub fn load_run(path: &Path) -> Result<Vec<RunRanking>> {
    let mut per_query: BTreeMap<String, Vec<RunEntry>> = BTreeMap::new();
    for (no, line) in lines(path)? {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(Error::parse(
                path,
                no,
                "expected `query_id Q0 doc_id rank score tag`",
            ));
        }
        let rank: usize = fields[3]
            .parse()
            .map_err(|_| Error::parse(path, no, format!("bad rank `{}`", fields[3])))?;
        let score: f64 = fields[4]
            .parse()
            .map_err(|_| Error::parse(path, no, format!("bad score `{}`", fields[4])))?;
        if rank == 0 {
            return Err(Error::parse(path, no, "ranks are 1-based"));
        }
        per_query.entry(fields[0].to_string()).or_default().push(RunEntry {
            doc_id: fields[2].to_string(),
            rank,
            score,
        });
    }
    per_query
        .into_iter()
        .map(|(query_id, mut entries)| {
            entries.sort_by_key(|e| e.rank);
            let ranking = RunRanking { query_id, entries };
            ranking
                .validate()
                .map_err(|m| Error::parse(path, 0, m))?;
            Ok(ranking)
        })
        .collect()
}

pub fn write_run(path: &Path, rankings: &[RunRanking], tag: &str) -> Result<()> {
    let mut w = create(path)?;
    for r in rankings {
        for e in &r.entries {
            writeln!(w, "{} Q0 {} {} {} {}", r.query_id, e.doc_id, e.rank, e.score, tag)
                .map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads `token v1 .. vdim` lines with an optional `count dim` header.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let all = lines(path)?;
    let mut rows = all.iter().peekable();
    let mut header_dim = None;
    if let Some((_, first)) = rows.peek() {
        let f: Vec<&str> = first.split_whitespace().collect();
        if f.len() == 2 && f[0].parse::<usize>().is_ok() {
            if let Ok(d) = f[1].parse::<usize>() {
                header_dim = Some(d);
                rows.next();
            }
        }
    }
    let mut table: Option<EmbeddingTable> = header_dim.map(EmbeddingTable::new);
    for (no, line) in rows {
        let mut fields = line.split_whitespace();
        let token = fields.next().expect("non-blank line has a field");
        let vector: Vec<f32> = fields
            .map(|v| {
                v.parse::<f32>()
                    .map_err(|_| Error::parse(path, *no, format!("bad component `{v}`")))
            })
            .collect::<Result<_>>()?;
        if vector.is_empty() {
            return Err(Error::parse(path, *no, format!("`{token}` has no vector")));
        }
        let table = table.get_or_insert_with(|| EmbeddingTable::new(vector.len()));
        if table.get(token).is_some() {
            return Err(Error::DuplicateId {
                path: path.to_path_buf(),
                id: token.to_string(),
            });
        }
        table.insert(token, vector)?;
    }
    table.ok_or_else(|| Error::MissingData(format!("{} holds no vectors", path.display())))
}

pub fn write_embeddings(path: &Path, table: &EmbeddingTable) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{} {}", table.len(), table.dim()).map_err(io)?;
    for token in table.tokens() {
        write!(w, "{token}").map_err(io)?;
        for v in table.get(token).expect("listed token") {
            write!(w, " {v}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads one id per line.
pub fn load_id_list(path: &Path) -> Result<Vec<String>> {
    Ok(lines(path)?
        .into_iter()
        .map(|(_, l)| l.trim().to_string())
        .collect())
}

pub fn write_id_list(path: &Path, ids: &[String]) -> Result<()> {
    let mut w = create(path)?;
    for id in ids {
        writeln!(w, "{id}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file_with(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn corpus_line_parses() {
        let f = file_with("{\"doc_id\":\"d1\",\"tokens\":[\"dog\",\"adoption\"]}\n");
        let docs = load_corpus(f.path()).unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].doc_id, "d1");
        assert_eq!(docs[0].tokens, vec!["dog", "adoption"]);
    }

    #[test]
    fn empty_corpus_file_is_empty_list() {
        let f = file_with("");
        assert!(load_corpus(f.path()).unwrap().is_empty());
    }

    #[test]
    fn duplicate_doc_id_rejected() {
        let f = file_with(
            "{\"doc_id\":\"d1\",\"tokens\":[]}\n{\"doc_id\":\"d1\",\"tokens\":[\"x\"]}\n",
        );
        assert!(matches!(
            load_corpus(f.path()),
            Err(Error::DuplicateId { id, .. }) if id == "d1"
        ));
    }

    #[test]
    fn malformed_line_names_line_number() {
        let f = file_with("{\"doc_id\":\"d1\",\"tokens\":[]}\n{not json\n");
        match load_corpus(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn qrels_identity_and_junk() {
        let f = file_with("101 0 d7 2\n101 0 d8 -2\n");
        let q = load_qrels(f.path(), &GradeMap::identity()).unwrap();
        assert_eq!(q.get("101", "d7"), Some(grade::HREL));
        assert_eq!(q.get("101", "d8"), Some(grade::JUNK));
    }

    #[test]
    fn qrels_unknown_grade_rejected() {
        let f = file_with("101 0 d9 5\n");
        assert!(load_qrels(f.path(), &GradeMap::identity()).is_err());
        let mapped = GradeMap::parse("5:4").unwrap();
        assert_eq!(load_qrels(f.path(), &mapped).unwrap().get("101", "d9"), Some(4));
    }

    #[test]
    fn embeddings_plain_and_header() {
        let f = file_with("cat 0.1 0.2 0.3\n");
        let t = load_embeddings(f.path()).unwrap();
        assert_eq!(t.dim(), 3);
        assert_eq!(t.get("cat").unwrap(), &[0.1f32, 0.2, 0.3]);

        let f = file_with("2 3\ncat 1 0 0\ndog 0 1 0\n");
        let t = load_embeddings(f.path()).unwrap();
        assert_eq!((t.dim(), t.len()), (3, 2));
    }

    #[test]
    fn embeddings_mixed_dims_rejected() {
        let f = file_with("cat 0.1 0.2 0.3\ndog 0.1 0.2 0.3 0.4\n");
        assert!(matches!(
            load_embeddings(f.path()),
            Err(Error::InconsistentDim { .. })
        ));
    }

    fn doc(id: &str, toks: &[&str]) -> TokenizedDocument {
        TokenizedDocument {
            doc_id: id.into(),
            tokens: toks.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn idf_values() {
        let idf = compute_idf(&[doc("a", &["dog"])]).unwrap();
        assert_eq!(idf.idf("dog"), 0.0);

        let mut corpus: Vec<_> = (0..100).map(|i| doc(&format!("d{i}"), &["x"])).collect();
        corpus[0].tokens.push("rare".into());
        let idf = compute_idf(&corpus).unwrap();
        assert!((idf.idf("rare") - 3.921973336281314).abs() < 1e-12);

        let corpus: Vec<_> = (0..9).map(|i| doc(&format!("d{i}"), &["x"])).collect();
        let idf = compute_idf(&corpus).unwrap();
        assert!((idf.idf("unseen") - std::f64::consts::LN_10).abs() < 1e-12);
    }

    #[test]
    fn idf_of_empty_corpus_is_error() {
        assert!(matches!(compute_idf(&[]), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn run_rejects_duplicate_docs() {
        let f = file_with("1 Q0 a 1 2.0 t\n1 Q0 a 2 1.0 t\n");
        assert!(load_run(f.path()).is_err());
    }

    #[test]
    fn long_query_truncated() {
        let q = Query {
            query_id: "q".into(),
            tokens: vec!["a".into(), "b".into(), "c".into()],
        };
        assert_eq!(q.truncated(2).tokens, vec!["a", "b"]);
        assert_eq!(q.truncated(5), q);
    }
}
