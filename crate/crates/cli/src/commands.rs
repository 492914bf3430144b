use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use pacrr::config::{require_files, RunConfig};
use pacrr::corpus::{load_id_list, load_run, write_run, RunRanking};
use pacrr::eval::{evaluate_run, pair_accuracy, rerank_run, write_metrics, MetricReport};
use pacrr::features::Dataset;
use pacrr::model::PacrrConfig;
use pacrr::scorer::{score_judged, score_run, scores_for, RelevanceScorer, ScorerOptions, ScorerRegistry};
use pacrr::synth::{generate, synth_run_config, write_synth, SynthConfig};
use pacrr::training::{train, TrainData};
use pacrr::verify::run_gradcheck_suite;
use pacrr::{Error, Result};

use crate::{Cli, Command, ScorerArgs};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_GRADCHECK: u8 = 3;

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) if !path.is_file() => {
            return Err(Error::Config(format!("config file {} not found", path.display())));
        }
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.model.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    Ok(config)
}

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    fs::write(path, text + "\n").map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn run(cli: Cli) -> Result<u8> {
    match &cli.command {
        Command::Train => cmd_train(&load_config(&cli)?),
        Command::Rerank(args) => cmd_rerank(&load_config(&cli)?, args),
        Command::Score(args) => cmd_score(&load_config(&cli)?, args),
        Command::Eval { run } => cmd_eval(&load_config(&cli)?, run.as_deref()),
        Command::Pairacc(args) => cmd_pairacc(&load_config(&cli)?, args),
        Command::Gradcheck => cmd_gradcheck(&cli),
        Command::Synth {
            docs,
            train_queries,
            validation_queries,
        } => cmd_synth(&cli, *docs, *train_queries, *validation_queries),
    }
}

fn load_dataset(config: &RunConfig) -> Result<Dataset> {
    Dataset::load(
        &config.corpus,
        &config.queries,
        &config.qrels,
        &config.embeddings,
        &config.grades()?,
    )
}

fn cmd_train(config: &RunConfig) -> Result<u8> {
    require_files([
        config.corpus.as_path(),
        &config.queries,
        &config.qrels,
        &config.embeddings,
        &config.run,
        &config.train_ids,
        &config.validation_ids,
    ])?;
    let dataset = load_dataset(config)?;
    let train_ids = load_id_list(&config.train_ids)?;
    let validation_ids = load_id_list(&config.validation_ids)?;
    let run = load_run(&config.run)?;
    let outcome = train(
        &config.model,
        TrainData {
            dataset: &dataset,
            train_ids: &train_ids,
            validation_ids: &validation_ids,
            validation_run: &run,
        },
        &config.train_options(),
    )?;
    let s = &outcome.state;
    println!(
        "best iteration {} of {}: validation ERR@{} = {:.4}",
        s.best_iteration, s.iteration, config.k, s.best_err20
    );
    println!("best checkpoint: {}", config.out_dir.join("best.pacrr").display());
    Ok(EXIT_OK)
}

/// Scorer plus the inputs it reads, all validated before anything is written.
struct ScoringSetup {
    scorer: Box<dyn RelevanceScorer>,
    dataset: Dataset,
    query_ids: Vec<String>,
    run_path: PathBuf,
}

fn scoring_setup(config: &RunConfig, args: &ScorerArgs, needs_run: bool) -> Result<ScoringSetup> {
    let name = args.scorer.clone().unwrap_or_else(|| config.scorer.clone());
    let checkpoint = args.checkpoint.clone().unwrap_or_else(|| config.checkpoint_path());
    let run_path = args.run.clone().unwrap_or_else(|| config.run.clone());
    let registry = ScorerRegistry::default();
    if !registry.names().contains(&name.as_str()) {
        return Err(Error::UnknownStrategy(name));
    }
    let mut files = vec![
        config.corpus.as_path(),
        &config.queries,
        &config.qrels,
        &config.embeddings,
        config.eval_ids_path(),
    ];
    if needs_run {
        files.push(&run_path);
    }
    if name == "pacrr" {
        files.push(&checkpoint);
    }
    require_files(files)?;
    let scorer = registry.create(
        &name,
        &ScorerOptions {
            checkpoint: Some(checkpoint),
        },
    )?;
    Ok(ScoringSetup {
        scorer,
        dataset: load_dataset(config)?,
        query_ids: load_id_list(config.eval_ids_path())?,
        run_path,
    })
}

fn restrict(run: Vec<RunRanking>, query_ids: &[String]) -> Vec<RunRanking> {
    run.into_iter().filter(|r| query_ids.contains(&r.query_id)).collect()
}

fn print_report(label: &str, report: &MetricReport) {
    println!(
        "{label}: ERR@{k} {:.4}  nDCG@{k} {:.4}  ({} queries)",
        report.mean_err,
        report.mean_ndcg,
        report.per_query.len(),
        k = report.k
    );
}

fn cmd_rerank(config: &RunConfig, args: &ScorerArgs) -> Result<u8> {
    let setup = scoring_setup(config, args, true)?;
    let run = restrict(load_run(&setup.run_path)?, &setup.query_ids);
    let qrels = &setup.dataset.qrels;
    let (table, missing) = score_run(setup.scorer.as_ref(), &setup.dataset, &run)?;
    if missing > 0 {
        log::warn!("{missing} run entries had no text and were skipped");
    }
    // The input is compared on the same judged-and-scored documents, in
    // their original order.
    let mut input = Vec::with_capacity(run.len());
    let mut reranked = Vec::with_capacity(run.len());
    for r in &run {
        let scores = scores_for(&table, &r.query_id);
        let flat: HashMap<String, f64> = scores.keys().map(|d| (d.clone(), 0.0)).collect();
        input.push(rerank_run(r, &flat, qrels));
        reranked.push(rerank_run(r, &scores, qrels));
    }
    let before = evaluate_run(&input, qrels, config.k, config.g_max);
    let after = evaluate_run(&reranked, qrels, config.k, config.g_max);

    create_out_dir(&config.out_dir)?;
    write_run(&config.out_dir.join("reranked.run"), &reranked, setup.scorer.name())?;
    write_metrics(&config.out_dir.join("metrics_input.jsonl"), &before)?;
    write_metrics(&config.out_dir.join("metrics_reranked.jsonl"), &after)?;
    print_report("input", &before);
    print_report("reranked", &after);
    println!("skipped entries: {missing}");
    Ok(EXIT_OK)
}

fn cmd_score(config: &RunConfig, args: &ScorerArgs) -> Result<u8> {
    let setup = scoring_setup(config, args, true)?;
    let run = restrict(load_run(&setup.run_path)?, &setup.query_ids);
    let (table, missing) = score_run(setup.scorer.as_ref(), &setup.dataset, &run)?;
    create_out_dir(&config.out_dir)?;
    let path = config.out_dir.join("scores.jsonl");
    let io = |e| Error::Io {
        path: path.clone(),
        source: e,
    };
    let mut w = std::io::BufWriter::new(fs::File::create(&path).map_err(io)?);
    for (q, docs) in &table {
        for (d, s) in docs {
            let line = serde_json::json!({ "query_id": q, "doc_id": d, "score": s });
            writeln!(w, "{line}").map_err(io)?;
        }
    }
    w.flush().map_err(io)?;
    println!("scored {} documents, skipped {missing}", table.values().map(|m| m.len()).sum::<usize>());
    Ok(EXIT_OK)
}

fn cmd_eval(config: &RunConfig, run: Option<&Path>) -> Result<u8> {
    let run_path = run.unwrap_or(&config.run);
    require_files([config.qrels.as_path(), run_path])?;
    let qrels = pacrr::corpus::load_qrels(&config.qrels, &config.grades()?)?;
    let report = evaluate_run(&load_run(run_path)?, &qrels, config.k, config.g_max);
    create_out_dir(&config.out_dir)?;
    write_metrics(&config.out_dir.join("metrics.jsonl"), &report)?;
    print_report("run", &report);
    Ok(EXIT_OK)
}

fn cmd_pairacc(config: &RunConfig, args: &ScorerArgs) -> Result<u8> {
    let setup = scoring_setup(config, args, false)?;
    let table = score_judged(setup.scorer.as_ref(), &setup.dataset, &setup.query_ids)?;
    let report = pair_accuracy(&table, &setup.dataset.qrels)?;
    create_out_dir(&config.out_dir)?;
    write_json(&config.out_dir.join("pairacc.json"), &report)?;
    for p in &report.label_pairs {
        let acc = p.accuracy.map_or("-".to_string(), |a| format!("{:.1}%", 100.0 * a));
        println!(
            "{:<10} {:>7} volume {:>5.1}%  queries {:>4}",
            p.label_pair,
            acc,
            100.0 * p.volume,
            p.queries
        );
    }
    println!("weighted accuracy: {:.1}%", 100.0 * report.weighted_accuracy);
    Ok(EXIT_OK)
}

fn cmd_gradcheck(cli: &Cli) -> Result<u8> {
    let model = match &cli.config {
        Some(_) => load_config(cli)?.model,
        None => PacrrConfig::tiny("firstk"),
    };
    let seed = cli.seed.unwrap_or(model.seed);
    let report = run_gradcheck_suite(&model, seed)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    if let Some(out) = &cli.out {
        create_out_dir(out)?;
        write_json(&out.join("gradcheck.json"), &report)?;
    }
    Ok(if report.passed { EXIT_OK } else { EXIT_GRADCHECK })
}

fn cmd_synth(cli: &Cli, docs: usize, train_queries: usize, validation_queries: usize) -> Result<u8> {
    let seed = cli.seed.unwrap_or(0);
    let config = SynthConfig {
        seed,
        num_docs: docs,
        train_queries,
        validation_queries,
        ..SynthConfig::default()
    };
    let data = generate(&config)?;
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("synth"));
    write_synth(&dir, &data, &synth_run_config(seed))?;
    println!(
        "wrote {} documents, {} queries and {} judgments to {}",
        data.docs.len(),
        data.queries.len(),
        data.qrels.len(),
        dir.display()
    );
    Ok(EXIT_OK)
}
