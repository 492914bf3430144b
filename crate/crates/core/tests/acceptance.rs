//! Acceptance suite: one PASS/FAIL line per criterion. The process exits
//! non-zero when any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pacrr::corpus::{write_run, RunRanking};
use pacrr::eval::{err_at_k, evaluate_run, ndcg_at_k, pair_accuracy, rerank_run, MergedLabel};
use pacrr::features::{Dataset, FeatureStore};
use pacrr::model::{init_params, load_params, save_params, Gradients, PacrrConfig, PacrrParams};
use pacrr::neural::{kmax_per_row, Tensor};
use pacrr::scorer::{score_judged, score_run, scores_for, PacrrScorer};
use pacrr::simmat::{distill_kwindow, Matrix, SimilarityMatrix};
use pacrr::synth::{generate, SynthConfig, SynthData};
use pacrr::training::{build_groups, train, train_batch, TrainData, TrainOptions, Triple, TripleSampler};
use pacrr::verify::{run_gradcheck_suite, GRADCHECK_TOLERANCE};

use common::{err_oracle, kmax_oracle, kwindow_oracle, multisets, permutations, random_rows, tie_prone};

enum Outcome {
    Pass(String),
    Fail(String),
    NotApplicable(String),
}

struct Criterion {
    id: &'static str,
    title: &'static str,
    run: fn() -> Outcome,
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed < Duration::from_secs(limit_s)
}

fn c1_scale() -> Outcome {
    Outcome::NotApplicable(
        "full-scale benchmark figures need web corpora and official runs that are not part of \
         this repository; criteria 2-8 substitute oracle and synthetic checks"
            .into(),
    )
}

fn c2_gradients() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    let mut checked = 0;
    for mode in ["firstk", "kwindow"] {
        let report = run_gradcheck_suite(&PacrrConfig::tiny(mode), 11).expect("suite runs");
        for c in &report.checks {
            worst = worst.max(c.result.max_rel_error);
            checked += c.result.checked;
            if !c.passed {
                failures.push(format!("{mode}/{}", c.name));
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        failures.is_empty() && worst < GRADCHECK_TOLERANCE && within(elapsed, 60),
        format!(
            "max relative error {worst:.2e} over {checked} coordinates, failures {failures:?}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn c3_distillation() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0;
    for _ in 0..200 {
        let q = rng.gen_range(1..=5);
        let d = rng.gen_range(1..=40);
        let n = rng.gen_range(1..=3);
        let l_d = rng.gen_range(n..=24);
        let rows = random_rows(&mut rng, q, d);
        let sim = SimilarityMatrix::from_values(Matrix::from_rows(&rows));
        let got = distill_kwindow(&sim, n, 5, l_d).expect("valid shape");
        let want = kwindow_oracle(&rows, n, 5, l_d);
        if (0..5).any(|i| got.row(i) != want[i].as_slice()) {
            mismatches += 1;
        }
    }
    let mut kmax_mismatches = 0;
    for _ in 0..1000 {
        let w = rng.gen_range(1..=20);
        let n_s = rng.gen_range(1..=5);
        let row: Vec<f64> = (0..w).map(|_| tie_prone(&mut rng)).collect();
        let t = Tensor::from_vec(&[1, w], row.clone()).unwrap();
        if kmax_per_row(&t, n_s).output.values() != kmax_oracle(&row, n_s).as_slice() {
            kmax_mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    check(
        mismatches == 0 && kmax_mismatches == 0 && within(elapsed, 30),
        format!(
            "k-window mismatches {mismatches}/200, k-max mismatches {kmax_mismatches}/1000, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn c4_metrics() -> Outcome {
    let hand = [
        (err_at_k(&[0, 0, 0], 20, 4), 0.0),
        (err_at_k(&[4], 20, 4), 0.9375),
        (err_at_k(&[4, 1], 20, 4), 0.939453125),
        (ndcg_at_k(&[0, 1], &[1, 0], 20), 1.0 / 3f64.log2()),
        (ndcg_at_k(&[0, 0], &[0, 0], 20), 0.0),
    ];
    let hand_ok = hand.iter().all(|(got, want)| (got - want).abs() < 1e-9);

    let mut violations = 0;
    let mut lists = 0;
    for len in 1..=5 {
        for set in multisets(len, 4) {
            for perm in permutations(&set) {
                lists += 1;
                let base = err_at_k(&perm, 20, 4);
                if (base - err_oracle(&perm, 20, 4)).abs() > 1e-12 {
                    violations += 1;
                }
                for i in 0..perm.len() {
                    for j in i + 1..perm.len() {
                        if perm[j] > perm[i] {
                            let mut swapped = perm.clone();
                            swapped.swap(i, j);
                            if err_at_k(&swapped, 20, 4) < base {
                                violations += 1;
                            }
                        }
                    }
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut ideal_bad = 0;
    for _ in 0..100 {
        let len = rng.gen_range(1..=30);
        let mut judged: Vec<i32> = (0..len).map(|_| rng.gen_range(0..=4)).collect();
        judged[0] = rng.gen_range(1..=4);
        let mut ideal = judged.clone();
        ideal.sort_unstable_by(|a, b| b.cmp(a));
        if (ndcg_at_k(&ideal, &judged, 20) - 1.0).abs() > 1e-12 {
            ideal_bad += 1;
        }
    }
    check(
        hand_ok && violations == 0 && ideal_bad == 0,
        format!(
            "hand values ok: {hand_ok}; {lists} permuted lists, {violations} monotonicity violations; \
             ideal nDCG off on {ideal_bad}/100"
        ),
    )
}

fn synth_dataset(data: &SynthData) -> Dataset {
    Dataset::new(
        data.docs.clone(),
        data.queries.clone(),
        data.qrels.clone(),
        data.embeddings.clone(),
    )
    .expect("non-empty corpus")
}

/// Learning rate used whenever the suite trains on synthetic data.
const SYNTH_LEARNING_RATE: f64 = 0.01;
const MEMORIZE_LEARNING_RATE: f64 = 0.1;

fn c5_memorization() -> Outcome {
    let start = Instant::now();
    let data = generate(&SynthConfig::default()).expect("synth");
    let ds = synth_dataset(&data);
    let groups = build_groups(&ds.qrels, &data.train_ids);
    let sampler = TripleSampler::new(&groups);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let triples: Vec<Triple> = (0..8).map(|_| sampler.sample(&mut rng).unwrap()).collect();
    let config = PacrrConfig {
        learning_rate: MEMORIZE_LEARNING_RATE,
        ..PacrrConfig::tiny("firstk")
    };
    let pairs = triples
        .iter()
        .flat_map(|t| [(t.query_id.as_str(), t.pos_doc_id.as_str()), (t.query_id.as_str(), t.neg_doc_id.as_str())]);
    let features = FeatureStore::build(&config, &ds, pairs).unwrap();
    let mut params: PacrrParams<f32> = init_params(&config).unwrap();
    let mut grads = Gradients::zeros_like(&params);
    let mut reached = None;
    let mut last = f64::NAN;
    for batch in 1..=500 {
        last = train_batch(&mut params, &features, &triples, &mut grads).unwrap();
        if last < 0.05 {
            reached = Some(batch);
            break;
        }
    }
    let elapsed = start.elapsed();
    check(
        reached.is_some() && within(elapsed, 60),
        format!(
            "loss {last:.4} after {} batches (lr {MEMORIZE_LEARNING_RATE}), {:.1}s",
            reached.map_or("500+".to_string(), |b| b.to_string()),
            elapsed.as_secs_f64()
        ),
    )
}

struct EndToEnd {
    params: PacrrParams<f32>,
    data: SynthData,
    dataset: Dataset,
    out_dir: PathBuf,
    elapsed: Duration,
}

fn validation_run(data: &SynthData) -> Vec<RunRanking> {
    data.baseline
        .iter()
        .filter(|r| data.validation_ids.contains(&r.query_id))
        .cloned()
        .collect()
}

/// Generates the synthetic benchmark, trains, and writes the log,
/// checkpoints and re-ranked validation run under `out_dir`.
fn end_to_end(out_dir: &Path) -> EndToEnd {
    let start = Instant::now();
    let data = generate(&SynthConfig::default()).expect("synth");
    let dataset = synth_dataset(&data);
    let config = PacrrConfig {
        learning_rate: SYNTH_LEARNING_RATE,
        ..PacrrConfig::tiny("kwindow")
    };
    let options = TrainOptions {
        iterations: 50,
        batches_per_iteration: 64,
        batch_size: 32,
        out_dir: Some(out_dir.to_path_buf()),
        ..TrainOptions::default()
    };
    let outcome = train(
        &config,
        TrainData {
            dataset: &dataset,
            train_ids: &data.train_ids,
            validation_ids: &data.validation_ids,
            validation_run: &data.baseline,
        },
        &options,
    )
    .expect("training succeeds");

    let scorer = PacrrScorer::new(outcome.best_params.clone()).unwrap();
    let run = validation_run(&data);
    let (table, _) = score_run(&scorer, &dataset, &run).unwrap();
    let reranked: Vec<RunRanking> = run
        .iter()
        .map(|r| rerank_run(r, &scores_for(&table, &r.query_id), &dataset.qrels))
        .collect();
    write_run(&out_dir.join("reranked.run"), &reranked, "pacrr").unwrap();
    EndToEnd {
        params: outcome.best_params,
        data,
        dataset,
        out_dir: out_dir.to_path_buf(),
        elapsed: start.elapsed(),
    }
}

fn c6_end_to_end(e2e: &EndToEnd) -> Outcome {
    let scorer = PacrrScorer::new(e2e.params.clone()).unwrap();
    let table = score_judged(&scorer, &e2e.dataset, &e2e.data.validation_ids).unwrap();
    let report = pair_accuracy(&table, &e2e.dataset.qrels).unwrap();
    let rel_nrel = report
        .pair(MergedLabel::Rel, MergedLabel::NRel)
        .and_then(|p| p.accuracy)
        .unwrap_or(0.0);

    let run = validation_run(&e2e.data);
    let reranked = pacrr::corpus::load_run(&e2e.out_dir.join("reranked.run")).unwrap();
    let before = evaluate_run(&run, &e2e.dataset.qrels, 20, 4);
    let after = evaluate_run(&reranked, &e2e.dataset.qrels, 20, 4);
    let wins = before
        .per_query
        .iter()
        .filter(|q| after.get(&q.query_id).is_some_and(|a| a.err > q.err))
        .count();
    check(
        rel_nrel >= 0.90 && wins >= 8 && within(e2e.elapsed, 600),
        format!(
            "Rel-NRel accuracy {rel_nrel:.3}; ERR@20 improved on {wins}/{} validation queries \
             (mean {:.4} -> {:.4}); {:.1}s",
            before.per_query.len(),
            before.mean_err,
            after.mean_err,
            e2e.elapsed.as_secs_f64()
        ),
    )
}

fn c7_sampling() -> Outcome {
    let data = generate(&SynthConfig::default()).expect("synth");
    let groups = build_groups(&data.qrels, &data.train_ids);
    let (mut highly, mut relevant) = (0usize, 0usize);
    for q in &data.train_ids {
        for (_, &g) in data.qrels.for_query(q).into_iter().flatten() {
            match g {
                g if g > 1 => highly += 1,
                1 => relevant += 1,
                _ => {}
            }
        }
    }
    let expected = highly as f64 / (highly + relevant) as f64;

    let sampler = TripleSampler::new(&groups);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draws = 100_000;
    let mut highly_draws = 0;
    let mut misordered = 0;
    for _ in 0..draws {
        let t = sampler.sample(&mut rng).unwrap();
        let grade = |d: &str| data.qrels.get(&t.query_id, d).unwrap();
        let (gp, gn) = (grade(&t.pos_doc_id), grade(&t.neg_doc_id));
        let merged = |g| pacrr::eval::merge_grades(g).unwrap();
        if merged(gp) <= merged(gn) {
            misordered += 1;
        }
        if gp > 1 {
            highly_draws += 1;
        }
    }
    let observed = highly_draws as f64 / draws as f64;
    check(
        (observed - expected).abs() <= 0.01 && misordered == 0,
        format!(
            "highly-relevant share {observed:.4} vs expected {expected:.4}; {misordered} misordered triples"
        ),
    )
}

fn files_under(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn c8_determinism(first: &EndToEnd) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let second = end_to_end(dir.path());
    let a = files_under(&first.out_dir);
    let b = files_under(&second.out_dir);
    let differing: Vec<_> = a
        .keys()
        .chain(b.keys())
        .filter(|k| a.get(*k) != b.get(*k))
        .collect();
    let checkpoints = a.keys().filter(|k| k.extension().is_some_and(|e| e == "pacrr")).count();

    let reloaded = load_params(&first.out_dir.join("best.pacrr")).unwrap();
    let round_trip = reloaded == first.params;
    let tmp = dir.path().join("again.pacrr");
    save_params(&reloaded, &tmp).unwrap();
    let bytes_equal = fs::read(&tmp).unwrap() == a[Path::new("best.pacrr")];
    check(
        differing.is_empty() && round_trip && bytes_equal && checkpoints > 0,
        format!(
            "{} files compared ({checkpoints} checkpoints, log, re-ranked run), {} differ; \
             checkpoint round trip exact: {}",
            a.len(),
            differing.len(),
            round_trip && bytes_equal
        ),
    )
}

fn report(id: &str, title: &str, outcome: &Outcome) -> bool {
    let (tag, detail, ok) = match outcome {
        Outcome::Pass(d) => ("PASS", d, true),
        Outcome::Fail(d) => ("FAIL", d, false),
        Outcome::NotApplicable(d) => ("N/A ", d, true),
    };
    println!("[{tag}] {id} {title}: {detail}");
    ok
}

fn main() {
    // `cargo test -- --list` and filters are forwarded to every test binary.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    if let Some(filter) = args.iter().find(|a| !a.starts_with('-')) {
        if !"acceptance".contains(filter.as_str()) {
            return;
        }
    }

    let criteria = [
        Criterion { id: "C1", title: "benchmark-scale results", run: c1_scale },
        Criterion { id: "C2", title: "gradient integrity", run: c2_gradients },
        Criterion { id: "C3", title: "distillation oracle", run: c3_distillation },
        Criterion { id: "C4", title: "metric oracles", run: c4_metrics },
        Criterion { id: "C5", title: "memorization", run: c5_memorization },
    ];
    let mut all_ok = true;
    for c in &criteria {
        all_ok &= report(c.id, c.title, &(c.run)());
    }

    let dir = tempfile::tempdir().unwrap();
    let e2e = end_to_end(dir.path());
    all_ok &= report("C6", "synthetic end-to-end", &c6_end_to_end(&e2e));
    all_ok &= report("C7", "sampling fidelity", &c7_sampling());
    all_ok &= report("C8", "determinism and persistence", &c8_determinism(&e2e));

    println!(
        "acceptance: {}",
        if all_ok { "all criteria passed" } else { "FAILED" }
    );
    if !all_ok {
        std::process::exit(1);
    }
}
