//! Flat `key = value` run configuration.
//!
//! Blank lines and text after `#` are ignored. Unknown keys are rejected.
//! Relative paths are resolved against the directory holding the file.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::corpus::GradeMap;
use crate::error::{Error, Result};
use crate::eval::{DEFAULT_G_MAX, DEFAULT_K};
use crate::model::PacrrConfig;
use crate::training::TrainOptions;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub queries: PathBuf,
    pub qrels: PathBuf,
    pub embeddings: PathBuf,
    pub run: PathBuf,
    pub train_ids: PathBuf,
    pub validation_ids: PathBuf,
    /// Queries evaluated by `rerank`, `eval` and `pairacc`; the validation
    /// queries when unset.
    pub eval_ids: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Model used by `rerank`, `score` and `pairacc`; `out_dir/best.pacrr`
    /// when unset.
    pub checkpoint: Option<PathBuf>,
    pub model: PacrrConfig,
    pub iterations: usize,
    pub batches_per_iteration: usize,
    pub batch_size: usize,
    pub k: usize,
    pub g_max: i32,
    /// Raw-to-canonical grade overrides, e.g. `3:2,-1:0`.
    pub grade_map: String,
    pub scorer: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainOptions::default();
        Self {
            corpus: "corpus.jsonl".into(),
            queries: "queries.jsonl".into(),
            qrels: "qrels.txt".into(),
            embeddings: "embeddings.txt".into(),
            run: "run.txt".into(),
            train_ids: "train_ids.txt".into(),
            validation_ids: "validation_ids.txt".into(),
            eval_ids: None,
            out_dir: "out".into(),
            checkpoint: None,
            model: PacrrConfig::default(),
            iterations: train.iterations,
            batches_per_iteration: train.batches_per_iteration,
            batch_size: train.batch_size,
            k: DEFAULT_K,
            g_max: DEFAULT_G_MAX,
            grade_map: String::new(),
            scorer: "pacrr".into(),
        }
    }
}

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse()
        .map_err(|e| Error::Config(format!("bad value for `{key}`: `{raw}` ({e})")))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        Self::parse(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Parses config text; relative paths are joined onto `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut c = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, raw) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            c.set(key.trim(), raw.trim())?;
        }
        c.resolve(base);
        c.model.validate()?;
        GradeMap::parse(&c.grade_map)?;
        if c.k == 0 || c.g_max < 1 {
            return Err(Error::Config("k must be positive and g_max at least 1".into()));
        }
        Ok(c)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        let path = || PathBuf::from(raw);
        match key {
            "corpus" => self.corpus = path(),
            "queries" => self.queries = path(),
            "qrels" => self.qrels = path(),
            "embeddings" => self.embeddings = path(),
            "run" => self.run = path(),
            "train_ids" => self.train_ids = path(),
            "validation_ids" => self.validation_ids = path(),
            "eval_ids" => self.eval_ids = (!raw.is_empty()).then(path),
            "out_dir" => self.out_dir = path(),
            "checkpoint" => self.checkpoint = (!raw.is_empty()).then(path),
            "l_q" => self.model.l_q = value(key, raw)?,
            "l_d" => self.model.l_d = value(key, raw)?,
            "l_g" => self.model.l_g = value(key, raw)?,
            "n_f" => self.model.n_f = value(key, raw)?,
            "n_s" => self.model.n_s = value(key, raw)?,
            "mode" => self.model.mode = raw.to_string(),
            "learning_rate" => self.model.learning_rate = value(key, raw)?,
            "seed" => self.model.seed = value(key, raw)?,
            "iterations" => self.iterations = value(key, raw)?,
            "batches_per_iteration" => self.batches_per_iteration = value(key, raw)?,
            "batch_size" => self.batch_size = value(key, raw)?,
            "k" => self.k = value(key, raw)?,
            "g_max" => self.g_max = value(key, raw)?,
            "grade_map" => self.grade_map = raw.to_string(),
            "scorer" => self.scorer = raw.to_string(),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.corpus,
            &mut self.queries,
            &mut self.qrels,
            &mut self.embeddings,
            &mut self.run,
            &mut self.train_ids,
            &mut self.validation_ids,
            &mut self.out_dir,
        ] {
            join(p);
        }
        self.eval_ids.iter_mut().for_each(join);
        self.checkpoint.iter_mut().for_each(join);
    }

    /// Renders every key, so the output documents all defaults.
    pub fn to_text(&self) -> String {
        let opt = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let m = &self.model;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("corpus", self.corpus.display().to_string());
        kv("queries", self.queries.display().to_string());
        kv("qrels", self.qrels.display().to_string());
        kv("embeddings", self.embeddings.display().to_string());
        kv("run", self.run.display().to_string());
        kv("train_ids", self.train_ids.display().to_string());
        kv("validation_ids", self.validation_ids.display().to_string());
        kv("eval_ids", opt(&self.eval_ids));
        kv("out_dir", self.out_dir.display().to_string());
        kv("checkpoint", opt(&self.checkpoint));
        kv("l_q", m.l_q.to_string());
        kv("l_d", m.l_d.to_string());
        kv("l_g", m.l_g.to_string());
        kv("n_f", m.n_f.to_string());
        kv("n_s", m.n_s.to_string());
        kv("mode", m.mode.clone());
        kv("learning_rate", m.learning_rate.to_string());
        kv("seed", m.seed.to_string());
        kv("iterations", self.iterations.to_string());
        kv("batches_per_iteration", self.batches_per_iteration.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("k", self.k.to_string());
        kv("g_max", self.g_max.to_string());
        kv("grade_map", self.grade_map.clone());
        kv("scorer", self.scorer.clone());
        s
    }

    pub fn grades(&self) -> Result<GradeMap> {
        GradeMap::parse(&self.grade_map)
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            iterations: self.iterations,
            batches_per_iteration: self.batches_per_iteration,
            batch_size: self.batch_size,
            k: self.k,
            g_max: self.g_max,
            out_dir: Some(self.out_dir.clone()),
        }
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| self.out_dir.join("best.pacrr"))
    }

    /// Query ids evaluated by the scoring commands.
    pub fn eval_ids_path(&self) -> &Path {
        self.eval_ids.as_deref().unwrap_or(&self.validation_ids)
    }
}

/// Fails with one message naming every missing input file.
pub fn require_files<'a>(paths: impl IntoIterator<Item = &'a Path>) -> Result<()> {
    let missing: Vec<String> = paths
        .into_iter()
        .filter(|p| !p.is_file())
        .map(|p| p.display().to_string())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(format!("missing input file(s): {}", missing.join(", "))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let parsed = RunConfig::parse(&c.to_text(), Path::new("")).unwrap();
        assert_eq!(parsed, c);
    }

    #[test]
    fn parses_and_resolves() {
        let text = "# tiny\nmode = kwindow   # comment\nl_q=4\nl_d = 12\nn_f = 4\ncorpus = data/c.jsonl\nqrels = /abs/q.txt\n";
        let c = RunConfig::parse(text, Path::new("/base")).unwrap();
        assert_eq!(c.model.mode, "kwindow");
        assert_eq!((c.model.l_q, c.model.l_d, c.model.n_f), (4, 12, 4));
        assert_eq!(c.corpus, PathBuf::from("/base/data/c.jsonl"));
        assert_eq!(c.qrels, PathBuf::from("/abs/q.txt"));
        assert_eq!(c.checkpoint_path(), PathBuf::from("/base/out/best.pacrr"));
    }

    #[test]
    fn rejects_bad_input() {
        let base = Path::new("");
        for text in ["colour = red", "l_q = four", "no equals sign", "mode = lastk", "l_g = 1", "k = 0"] {
            let e = RunConfig::parse(text, base).unwrap_err();
            assert!(e.is_config_error(), "{text}: {e}");
        }
    }

    #[test]
    fn missing_files_listed() {
        let e = require_files([Path::new("/nonexistent/a"), Path::new("/nonexistent/b")]).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("/nonexistent/a") && msg.contains("/nonexistent/b"));
    }
}
