//! Query–document similarity matrices and their distillation to fixed
//! `l_q × l_d` inputs.
//!
//! Two distillation strategies are provided and registered by name:
//!
//! - `firstk` keeps the first `l_d` document columns.
//! - `kwindow` scores disjoint `n`-term windows by their mean best query
//!   similarity, keeps the top `⌊l_d/n⌋` windows in document order, and emits
//!   one matrix per n-gram size.
//!
//! Both zero-pad rows beyond the query length and columns beyond the kept
//! document content.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{EmbeddingTable, Query, TokenizedDocument};
use crate::error::{Error, Result};

/// Dense row-major matrix of similarities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub query_id: String,
    pub doc_id: String,
    pub values: Matrix,
}

impl SimilarityMatrix {
    /// Wraps raw values, mostly useful for tests and synthetic inputs.
    pub fn from_values(values: Matrix) -> Self {
        Self {
            query_id: String::new(),
            doc_id: String::new(),
            values,
        }
    }

    pub fn query_len(&self) -> usize {
        self.values.rows
    }

    pub fn doc_len(&self) -> usize {
        self.values.cols
    }
}

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

/// Cosine similarity between every query and document token.
///
/// String-equal tokens score exactly 1.0 whether or not they have a vector;
/// a token without a vector scores 0.0 against any different token.
pub fn build_sim_matrix(
    query: &Query,
    doc: &TokenizedDocument,
    emb: &EmbeddingTable,
) -> SimilarityMatrix {
    let q_vecs: Vec<Option<&[f32]>> = query.tokens.iter().map(|t| emb.get(t)).collect();
    let d_vecs: Vec<Option<&[f32]>> = doc.tokens.iter().map(|t| emb.get(t)).collect();
    let mut values = Matrix::zeros(query.tokens.len(), doc.tokens.len());
    for (i, qt) in query.tokens.iter().enumerate() {
        for (j, dt) in doc.tokens.iter().enumerate() {
            let s = if qt == dt {
                1.0
            } else {
                match (q_vecs[i], d_vecs[j]) {
                    (Some(a), Some(b)) => cosine(a, b),
                    _ => 0.0,
                }
            };
            values.set(i, j, s);
        }
    }
    SimilarityMatrix {
        query_id: query.query_id.clone(),
        doc_id: doc.doc_id.clone(),
        values,
    }
}

/// Target dimensions of a distilled input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DistillShape {
    pub l_q: usize,
    pub l_d: usize,
    pub l_g: usize,
}

/// Fixed-size model input: one `l_q × l_d` matrix per n-gram size `1..=l_g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistilledInput {
    pub query_id: String,
    pub doc_id: String,
    pub mode: String,
    /// `per_n[n - 1]` feeds the n-gram layer.
    pub per_n: Vec<Matrix>,
    /// Document-axis convolution stride for each n-gram size, same indexing.
    pub doc_strides: Vec<usize>,
    pub query_len: usize,
}

impl DistilledInput {
    pub fn matrix(&self, n: usize) -> &Matrix {
        &self.per_n[n - 1]
    }

    pub fn doc_stride(&self, n: usize) -> usize {
        self.doc_strides[n - 1]
    }

    pub fn l_g(&self) -> usize {
        self.per_n.len()
    }
}

fn check_query_fits(sim: &SimilarityMatrix, l_q: usize) -> Result<()> {
    if sim.query_len() > l_q {
        return Err(Error::Shape(format!(
            "query has {} terms but l_q = {l_q}; truncate it first",
            sim.query_len()
        )));
    }
    Ok(())
}

/// Copies the first `min(|d|, l_d)` columns and zero-pads to `l_q × l_d`.
pub fn distill_firstk(sim: &SimilarityMatrix, l_q: usize, l_d: usize) -> Result<Matrix> {
    check_query_fits(sim, l_q)?;
    let mut out = Matrix::zeros(l_q, l_d);
    let keep = sim.doc_len().min(l_d);
    for i in 0..sim.query_len() {
        for j in 0..keep {
            out.set(i, j, sim.values.get(i, j));
        }
    }
    Ok(out)
}

/// Keeps the `⌊l_d/n⌋` best disjoint `n`-term windows in document order.
///
/// Windows start at positions `0, n, 2n, …`; a trailing partial window is
/// padded with zero columns. A window's score is the mean over its columns of
/// the column's best query similarity. Ties favour earlier windows.
pub fn distill_kwindow(sim: &SimilarityMatrix, n: usize, l_q: usize, l_d: usize) -> Result<Matrix> {
    check_query_fits(sim, l_q)?;
    if n == 0 || n > l_d {
        return Err(Error::Shape(format!("window length {n} must be in 1..={l_d}")));
    }
    let q = sim.query_len();
    let d = sim.doc_len();
    let k = l_d / n;
    let mut out = Matrix::zeros(l_q, l_d);
    if q == 0 || d == 0 {
        return Ok(out);
    }

    let col_best: Vec<f64> = (0..d)
        .map(|j| (0..q).map(|i| sim.values.get(i, j)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let n_windows = d.div_ceil(n);
    let mut scored: Vec<(usize, f64)> = (0..n_windows)
        .map(|w| {
            let start = w * n;
            let end = (start + n).min(d);
            let sum: f64 = col_best[start..end].iter().sum();
            (w, sum / n as f64)
        })
        .collect();
    // Stable sort keeps earlier windows first among equal scores.
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut chosen: Vec<usize> = scored.into_iter().take(k).map(|(w, _)| w).collect();
    chosen.sort_unstable();

    for (slot, w) in chosen.into_iter().enumerate() {
        for offset in 0..n {
            let src = w * n + offset;
            if src >= d {
                break;
            }
            let dst = slot * n + offset;
            for i in 0..q {
                out.set(i, dst, sim.values.get(i, src));
            }
        }
    }
    Ok(out)
}

/// A document-axis distillation strategy.
pub trait Distiller: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Produces the per-n-gram inputs for a similarity matrix.
    fn distill(&self, sim: &SimilarityMatrix, shape: DistillShape) -> Result<DistilledInput>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct FirstK;

impl Distiller for FirstK {
    fn name(&self) -> &'static str {
        "firstk"
    }

    fn distill(&self, sim: &SimilarityMatrix, shape: DistillShape) -> Result<DistilledInput> {
        let m = distill_firstk(sim, shape.l_q, shape.l_d)?;
        Ok(DistilledInput {
            query_id: sim.query_id.clone(),
            doc_id: sim.doc_id.clone(),
            mode: self.name().to_string(),
            per_n: vec![m; shape.l_g],
            doc_strides: vec![1; shape.l_g],
            query_len: sim.query_len(),
        })
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct KWindow;

impl Distiller for KWindow {
    fn name(&self) -> &'static str {
        "kwindow"
    }

    fn distill(&self, sim: &SimilarityMatrix, shape: DistillShape) -> Result<DistilledInput> {
        let per_n = (1..=shape.l_g)
            .map(|n| distill_kwindow(sim, n, shape.l_q, shape.l_d))
            .collect::<Result<Vec<_>>>()?;
        Ok(DistilledInput {
            query_id: sim.query_id.clone(),
            doc_id: sim.doc_id.clone(),
            mode: self.name().to_string(),
            per_n,
            doc_strides: (1..=shape.l_g).collect(),
            query_len: sim.query_len(),
        })
    }
}

/// Distillation strategies keyed by name.
#[derive(Debug, Clone)]
pub struct DistillerRegistry {
    entries: BTreeMap<String, Arc<dyn Distiller>>,
}

impl DistillerRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, d: Arc<dyn Distiller>) {
        self.entries.insert(d.name().to_string(), d);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Distiller>> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownStrategy(name.to_string()))
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }
}

impl Default for DistillerRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(FirstK));
        r.register(Arc::new(KWindow));
        r
    }
}

/// Looks up a built-in distiller.
pub fn distiller(name: &str) -> Result<Arc<dyn Distiller>> {
    DistillerRegistry::default().get(name)
}
