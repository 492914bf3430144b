//! Pairwise max-margin training with validation-driven checkpoint selection.

mod sampling;
mod sweep;

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{JudgmentSet, RunRanking};
use crate::error::{Error, Result};
use crate::eval::{evaluate_run, rerank_run, MetricReport, DEFAULT_G_MAX, DEFAULT_K};
use crate::features::{Dataset, FeatureStore};
use crate::model::{backward, forward, init_params, save_params, score, Gradients, PacrrConfig, PacrrParams};
use crate::neural::{hinge_loss, hinge_loss_grad, sgd_step};

pub use sampling::{
    build_groups, sample_triple, PositiveGroup, QueryGroups, RelevanceGroups, Triple, TripleSampler,
    MAX_REJECTIONS,
};
pub use sweep::{default_grid, sweep, SweepOutcome};

/// Loop sizes and evaluation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub iterations: usize,
    pub batches_per_iteration: usize,
    pub batch_size: usize,
    pub k: usize,
    pub g_max: i32,
    /// Where checkpoints and the log go; nothing is written when `None`.
    pub out_dir: Option<PathBuf>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            iterations: 150,
            batches_per_iteration: 64,
            batch_size: 32,
            k: DEFAULT_K,
            g_max: DEFAULT_G_MAX,
            out_dir: None,
        }
    }
}

/// Queries and run used for fitting and model selection.
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub dataset: &'a Dataset,
    pub train_ids: &'a [String],
    pub validation_ids: &'a [String],
    pub validation_run: &'a [RunRanking],
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub mean_loss: f64,
    pub val_err20: f64,
    pub val_ndcg20: f64,
    /// Relative to the output directory.
    pub checkpoint_path: Option<String>,
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub iteration: usize,
    pub best_err20: f64,
    pub best_iteration: usize,
    pub best_checkpoint: Option<PathBuf>,
    pub log: Vec<IterationRecord>,
    pub rng: ChaCha8Rng,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: TrainState,
    pub best_params: PacrrParams<f32>,
    pub final_params: PacrrParams<f32>,
}

/// Seeds the sampling stream, kept apart from the initialization stream.
pub fn sampling_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// One SGD step on a batch of triples; returns the batch's mean hinge loss.
///
/// Triples without features are an error: callers build the store from the
/// same groups the triples come from.
pub fn train_batch(
    params: &mut PacrrParams<f32>,
    features: &FeatureStore,
    triples: &[Triple],
    grads: &mut Gradients<f32>,
) -> Result<f64> {
    grads.clear();
    let scale = 1.0 / triples.len() as f32;
    let mut total = 0.0f64;
    for t in triples {
        let lookup = |d: &str| {
            features
                .get(&t.query_id, d)
                .ok_or_else(|| Error::MissingData(format!("no features for ({}, {d})", t.query_id)))
        };
        let (pos_in, idf) = lookup(&t.pos_doc_id)?;
        let (neg_in, _) = lookup(&t.neg_doc_id)?;
        let pos = forward(params, pos_in, idf)?;
        let neg = forward(params, neg_in, idf)?;
        total += hinge_loss(pos.rel, neg.rel) as f64;
        let (d_pos, d_neg) = hinge_loss_grad(pos.rel, neg.rel);
        backward(params, &pos, d_pos * scale, grads);
        backward(params, &neg, d_neg * scale, grads);
    }
    grads.add_into(params);
    sgd_step(&mut params.groups, params.config.learning_rate)?;
    Ok(total / triples.len() as f64)
}

/// Re-ranks each ranking by model score over its judged, featurized documents.
pub fn rerank_with_model(
    params: &PacrrParams<f32>,
    features: &FeatureStore,
    run: &[RunRanking],
    qrels: &JudgmentSet,
) -> Result<Vec<RunRanking>> {
    run.iter()
        .map(|r| {
            let mut scores = HashMap::new();
            for d in r.doc_ids() {
                if let Some((input, idf)) = features.get(&r.query_id, d) {
                    scores.insert(d.to_string(), score(params, input, idf)? as f64);
                }
            }
            Ok(rerank_run(r, &scores, qrels))
        })
        .collect()
}

fn validation_report(
    params: &PacrrParams<f32>,
    features: &FeatureStore,
    data: &TrainData<'_>,
    options: &TrainOptions,
) -> Result<MetricReport> {
    let reranked = rerank_with_model(params, features, data.validation_run, &data.dataset.qrels)?;
    Ok(evaluate_run(&reranked, &data.dataset.qrels, options.k, options.g_max))
}

fn validation_rankings<'a>(data: &TrainData<'a>) -> Vec<RunRanking> {
    data.validation_run
        .iter()
        .filter(|r| data.validation_ids.contains(&r.query_id))
        .cloned()
        .collect()
}

/// Fits a model from `config.seed` and returns the iteration with the best
/// validation ERR. Every iteration is checkpointed and logged when
/// `options.out_dir` is set.
pub fn train(config: &PacrrConfig, data: TrainData<'_>, options: &TrainOptions) -> Result<TrainOutcome> {
    config.validate()?;
    if options.batch_size == 0 || options.batches_per_iteration == 0 {
        return Err(Error::Config("batch sizes must be positive".into()));
    }
    let ds = data.dataset;
    let validation_run = validation_rankings(&data);
    let data = TrainData {
        validation_run: &validation_run,
        ..data
    };

    let mut groups = build_groups(&ds.qrels, data.train_ids);
    let train_pairs = groups.per_query.iter().flat_map(|(q, g)| {
        g.highly_relevant
            .iter()
            .chain(&g.relevant)
            .chain(&g.non_relevant)
            .map(move |d| (q.as_str(), d.as_str()))
    });
    let val_pairs = validation_run.iter().flat_map(|r| {
        r.doc_ids()
            .filter(|d| ds.qrels.get(&r.query_id, d).is_some())
            .map(move |d| (r.query_id.as_str(), d))
    });
    let features = FeatureStore::build(config, ds, train_pairs.chain(val_pairs))?;
    if features.missing() > 0 {
        log::warn!("{} judged pairs have no text and were skipped", features.missing());
    }
    groups.retain_docs(|q, d| features.contains(q, d));
    let sampler = TripleSampler::new(&groups);

    let mut params: PacrrParams<f32> = init_params(config)?;
    let mut grads = Gradients::zeros_like(&params);
    let mut state = TrainState {
        iteration: 0,
        best_err20: f64::NEG_INFINITY,
        best_iteration: 0,
        best_checkpoint: None,
        log: Vec::with_capacity(options.iterations),
        rng: sampling_rng(config.seed),
    };
    let mut best_params = params.clone();

    let mut log_file = match &options.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir.join("checkpoints")).map_err(|e| Error::io(dir, e))?;
            let path = dir.join("train_log.jsonl");
            Some((fs::File::create(&path).map_err(|e| Error::io(&path, e))?, path))
        }
        None => None,
    };

    let mut batch = Vec::with_capacity(options.batch_size);
    for iteration in 1..=options.iterations {
        let mut loss_sum = 0.0;
        for _ in 0..options.batches_per_iteration {
            batch.clear();
            for _ in 0..options.batch_size {
                batch.push(sampler.sample(&mut state.rng)?);
            }
            loss_sum += train_batch(&mut params, &features, &batch, &mut grads)?;
        }
        let mean_loss = loss_sum / options.batches_per_iteration as f64;
        let report = validation_report(&params, &features, &data, options)?;

        let checkpoint_path = match &options.out_dir {
            Some(dir) => {
                let rel = format!("checkpoints/iter_{iteration:04}.pacrr");
                save_params(&params, &dir.join(&rel))?;
                Some(rel)
            }
            None => None,
        };
        let record = IterationRecord {
            iteration,
            mean_loss,
            val_err20: report.mean_err,
            val_ndcg20: report.mean_ndcg,
            checkpoint_path,
        };
        log::info!(
            "iteration {iteration}: loss {mean_loss:.4} val ERR@{k} {:.4} nDCG@{k} {:.4}",
            report.mean_err,
            report.mean_ndcg,
            k = options.k
        );
        if let Some((file, path)) = log_file.as_mut() {
            let line = serde_json::to_string(&record).expect("record serializes");
            writeln!(file, "{line}").map_err(|e| Error::io(path.as_path(), e))?;
        }
        if report.mean_err > state.best_err20 {
            state.best_err20 = report.mean_err;
            state.best_iteration = iteration;
            state.best_checkpoint = options
                .out_dir
                .as_ref()
                .zip(record.checkpoint_path.as_ref())
                .map(|(d, r)| d.join(r));
            best_params = params.clone();
        }
        state.log.push(record);
        state.iteration = iteration;
    }

    if let Some(dir) = &options.out_dir {
        save_params(&best_params, &dir.join("best.pacrr"))?;
    }
    Ok(TrainOutcome {
        state,
        best_params,
        final_params: params,
    })
}

/// Index of the first maximum, the selection rule used for checkpoints.
pub fn select_best(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Reads a training log back.
pub fn load_train_log(path: &Path) -> Result<Vec<IterationRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::parse(path, i + 1, e.to_string()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection_takes_first_max() {
        assert_eq!(select_best(&[0.1, 0.242, 0.2]), Some(1));
        assert_eq!(select_best(&[0.3, 0.3]), Some(0));
        assert_eq!(select_best(&[]), None);
    }
}
