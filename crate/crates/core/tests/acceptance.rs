//! Exit criteria. Each criterion prints one PASS/FAIL line; the process exits
//! non-zero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use lexdrift_core::corpus::DecadeId;
use lexdrift_core::experiment::{
    self, render_matrix_markdown, ComparisonMatrix, ExperimentConfig, PipelineParams, QuerySet,
    ABSENT, REPORT_FILES,
};
use lexdrift_core::feedback;
use lexdrift_core::index::Index;
use lexdrift_core::metrics::{self, LogBase, Metric, MetricCell};
use lexdrift_core::partition::PartitionedCorpus;
use lexdrift_core::retrieval::{self, Bm25Params, RankedList, WeightedQuery};
use lexdrift_core::synth::{self, DriftScenario, ProtocolCorpus};
use lexdrift_core::textproc::Analyzer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_distribution, random_list, random_paragraphs, tau_by_pairs, RawCorpus};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn retrieval_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xB25);
    let mut compared = 0;
    for corpus_no in 0..50 {
        let paragraphs = random_paragraphs(&mut rng, 100, 50);
        let idx = Index::build(DecadeId::D1860s, &paragraphs).map_err(|e| e.to_string())?;
        let oracle = RawCorpus::new(&paragraphs);
        for _ in 0..10 {
            let mut terms = BTreeMap::new();
            for _ in 0..rng.gen_range(1..=5) {
                let p = &paragraphs[rng.gen_range(0..paragraphs.len())];
                let t = p.tokens[rng.gen_range(0..p.tokens.len())].clone();
                terms.insert(t, rng.gen_range(0.01..2.0));
            }
            let k = paragraphs.len();
            let query = WeightedQuery {
                terms: terms.clone(),
                origin: DecadeId::D1860s,
            };
            let got = retrieval::search(&idx, &query, k, Bm25Params::default())
                .map_err(|e| e.to_string())?;
            let want = oracle.bm25_search(&terms, k, 1.2, 0.75);
            ensure(got.entries.len() == want.len(), || {
                format!(
                    "corpus {corpus_no}: {} hits vs {}",
                    got.entries.len(),
                    want.len()
                )
            })?;
            for ((gd, gs), (wd, ws)) in got.entries.iter().zip(&want) {
                ensure(gd == wd, || {
                    format!("corpus {corpus_no}: order {gd} vs {wd}")
                })?;
                ensure((gs - ws).abs() <= 1e-12 * ws.abs(), || {
                    format!("corpus {corpus_no}: score {gs} vs {ws}")
                })?;
            }
            compared += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!("{compared} queries over 50 corpora, {elapsed:.2?}"))
}

fn feedback_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7E1);
    let mut worst: f64 = 0.0;
    for corpus_no in 0..50 {
        let paragraphs = random_paragraphs(&mut rng, 100, 50);
        let idx = Index::build(DecadeId::D1860s, &paragraphs).map_err(|e| e.to_string())?;
        let oracle = RawCorpus::new(&paragraphs);
        let p = &paragraphs[rng.gen_range(0..paragraphs.len())];
        let mut query = vec![p.tokens[0].clone()];
        if p.tokens.len() > 1 && rng.gen_bool(0.5) {
            query.push(p.tokens[1].clone());
        }
        let fb_docs = rng.gen_range(1..=20);
        for mu in [100.0, 500.0, 1000.0] {
            let got = feedback::estimate_rm1(&idx, &query, fb_docs, mu, Bm25Params::default())
                .map_err(|e| e.to_string())?;
            let want = oracle.rm1(&query, fb_docs, mu);
            ensure(got.len() == want.len(), || {
                format!("corpus {corpus_no} mu {mu}: support differs")
            })?;
            for (t, w) in &want {
                let g = got.get(t).copied().unwrap_or(f64::NAN);
                let diff = (g - w).abs();
                worst = worst.max(diff);
                ensure(diff <= 1e-10, || {
                    format!("corpus {corpus_no} mu {mu}: {t} {g} vs {w}")
                })?;
            }
            let sum: f64 = got.values().sum();
            ensure((sum - 1.0).abs() <= 1e-9, || format!("sum {sum}"))?;
        }
    }
    Ok(format!("150 estimates, max deviation {worst:.1e}"))
}

fn tau_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7A0);
    let mut worst: f64 = 0.0;
    let mut trials = 0;
    while trials < 1000 {
        let universe: Vec<String> = (0..rng.gen_range(2..800))
            .map(|i| format!("d{i:05}"))
            .collect();
        let a = random_list(&mut rng, &universe, 500);
        let b = random_list(&mut rng, &universe, 500);
        if a.is_empty() && b.is_empty() {
            continue;
        }
        let (da, db) = (
            a.len().max(1) + rng.gen_range(0..5),
            b.len().max(1) + rng.gen_range(0..5),
        );
        let want = tau_by_pairs(&a, da, &b, db);
        let got = metrics::kendall_tau(
            &RankedList {
                entries: a,
                depth: da,
            },
            &RankedList {
                entries: b,
                depth: db,
            },
        )
        .map_err(|e| e.to_string())?;
        worst = worst.max((got - want).abs());
        ensure((got - want).abs() <= 1e-12, || {
            format!("trial {trials}: {got} vs {want}")
        })?;
        trials += 1;
    }
    Ok(format!("1000 list pairs, max deviation {worst:.1e}"))
}

fn metric_laws() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x15D);
    let jsd = |p: &BTreeMap<String, f64>, q: &BTreeMap<String, f64>| {
        metrics::js_divergence(p, q, LogBase::Two).unwrap()
    };
    for i in 0..1000 {
        let p = random_distribution(&mut rng, 15);
        let q = random_distribution(&mut rng, 15);
        let (pq, qp) = (jsd(&p, &q), jsd(&q, &p));
        ensure((0.0..=1.0).contains(&pq), || format!("pair {i}: jsd {pq}"))?;
        ensure(pq == qp, || format!("pair {i}: asymmetric {pq} {qp}"))?;
        ensure(jsd(&p, &p) == 0.0 && jsd(&q, &q) == 0.0, || {
            format!("pair {i}: self")
        })?;
        let keys: BTreeSet<&String> = p.keys().chain(q.keys()).collect();
        let max_diff = keys
            .iter()
            .map(|k| (p.get(*k).unwrap_or(&0.0) - q.get(*k).unwrap_or(&0.0)).abs())
            .fold(0.0, f64::max);
        ensure((pq == 0.0) == (max_diff <= 1e-12), || {
            format!("pair {i}: jsd {pq} with max difference {max_diff}")
        })?;

        let sp: BTreeSet<&String> = p.keys().collect();
        let sq: BTreeSet<&String> = q.keys().collect();
        ensure(
            metrics::jaccard(&sp, &sq) == metrics::jaccard(&sq, &sp),
            || format!("pair {i}: jaccard asymmetric"),
        )?;
        ensure(metrics::jaccard(&sp, &sp) == 1.0, || {
            format!("pair {i}: jaccard(a,a)")
        })?;
        let shifted: BTreeSet<String> = sp.iter().map(|s| format!("{s}'")).collect();
        let plain: BTreeSet<String> = sp.iter().map(|s| s.to_string()).collect();
        ensure(metrics::jaccard(&plain, &shifted) == 0.0, || {
            format!("pair {i}: disjoint")
        })?;
    }
    for i in 0..1000 {
        let p = random_distribution(&mut rng, 10);
        let q = random_distribution(&mut rng, 10);
        let r = random_distribution(&mut rng, 10);
        let (pq, pr, rq) = (jsd(&p, &q).sqrt(), jsd(&p, &r).sqrt(), jsd(&r, &q).sqrt());
        ensure(pq <= pr + rq + 1e-12, || {
            format!("triple {i}: {pq} > {pr} + {rq}")
        })?;
    }
    Ok("1000 pairs, 1000 triples".into())
}

fn point_values() -> Outcome {
    let p: BTreeMap<&str, f64> = [("a", 1.0)].into();
    let q: BTreeMap<&str, f64> = [("a", 0.5), ("b", 0.5)].into();
    let jsd = metrics::js_divergence(&p, &q, LogBase::Two).map_err(|e| e.to_string())?;
    ensure((jsd - 0.311278).abs() <= 1e-6, || format!("jsd {jsd}"))?;

    let para = lexdrift_core::corpus::Paragraph {
        doc_id: "d#000000".into(),
        novel_id: "d".into(),
        decade: DecadeId::D1840s,
        tokens: vec!["crime".into()],
    };
    let idx = Index::build(DecadeId::D1840s, &[para]).map_err(|e| e.to_string())?;
    let bm25 = retrieval::bm25_term_score(&idx, "crime", "d#000000", Bm25Params::default())
        .map_err(|e| e.to_string())?;
    let expected = (4.0f64 / 3.0).ln();
    ensure((bm25 - expected).abs() <= 1e-9, || format!("bm25 {bm25}"))?;

    let dist: BTreeMap<String, f64> = [
        ("a".to_string(), 0.5),
        ("b".to_string(), 0.3),
        ("c".to_string(), 0.2),
    ]
    .into();
    let kept = feedback::truncate_renormalize(&dist, 2);
    ensure(
        kept == vec![("a".to_string(), 0.625), ("b".to_string(), 0.375)],
        || format!("truncation {kept:?}"),
    )?;
    Ok(format!("jsd {jsd:.6}, bm25 {bm25:.9}, truncation exact"))
}

fn drift_detection() -> Outcome {
    let start = Instant::now();
    let scenario = DriftScenario::default();
    let queries = QuerySet::parse(&format!(
        "{}\tthematic\n{}\tgenre\n",
        scenario.drifting_keyword, scenario.stable_keyword
    ))
    .map_err(|e| e.to_string())?;
    let params = PipelineParams {
        depth: 200,
        ..PipelineParams::default()
    };
    let analyzer = Analyzer::default();
    let mut detected = 0;
    for seed in 0..100 {
        let novels = scenario.generate(seed);
        let corpus =
            PartitionedCorpus::build(&synth::paragraphs(&novels, &analyzer), analyzer.clone())
                .map_err(|e| e.to_string())?;
        let bundle =
            experiment::run_pipeline(&corpus, &queries, &params).map_err(|e| e.to_string())?;
        let (e, l) = (
            bundle
                .labels
                .iter()
                .position(|d| *d == scenario.early)
                .unwrap(),
            bundle
                .labels
                .iter()
                .position(|d| *d == scenario.late)
                .unwrap(),
        );
        let pair = |qi: usize| {
            let a = bundle.expansions[qi][e].expansion().unwrap();
            let b = bundle.expansions[qi][l].expansion().unwrap();
            (
                metrics::jaccard(&a.term_set(), &b.term_set()),
                metrics::js_divergence(&a.distribution(), &b.distribution(), LogBase::Two).unwrap(),
            )
        };
        let (drift_jac, drift_jsd) = pair(0);
        let (stable_jac, stable_jsd) = pair(1);
        if drift_jac < stable_jac && drift_jsd > stable_jsd {
            detected += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(detected >= 95, || {
        format!("drift detected in {detected}/100 seeds")
    })?;
    ensure(elapsed < Duration::from_secs(60), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!("{detected}/100 seeds, {elapsed:.2?}"))
}

fn write_protocol_config(dir: &Path) -> Result<ExperimentConfig, String> {
    let spec = ProtocolCorpus::default();
    let novels = spec.generate(2024);
    let manifest = synth::write_corpus(dir, &novels).map_err(|e| e.to_string())?;
    let conf = dir.join("experiment.conf");
    fs::write(
        &conf,
        format!(
            "manifest = {}\nfb_docs = 100\nfb_terms = 100\ndepth = 1000\ntop_n = 15\n",
            manifest.display()
        ),
    )
    .map_err(|e| e.to_string())?;
    ExperimentConfig::load(&conf).map_err(|e| e.to_string())
}

/// Runs the full protocol twice on the 10k-paragraph corpus; returns the
/// timing line for the first run and whether outputs matched byte for byte.
fn protocol_runs() -> Result<(Outcome, Outcome), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = write_protocol_config(dir.path())?;
    let out1 = dir.path().join("run1");
    let start = Instant::now();
    let bundle = experiment::run_experiment(&config, &out1).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();

    let fidelity = (|| {
        ensure(elapsed < Duration::from_secs(60), || {
            format!("took {elapsed:?}")
        })?;
        let queries = bundle.expansions.len();
        ensure(queries == 25, || format!("{queries} queries"))?;
        for name in REPORT_FILES {
            let path = out1.join(name);
            let len = fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
            ensure(len > 0, || format!("{name} missing or empty"))?;
        }
        let mut absent_cells = 0;
        for (qi, row) in bundle.tau_table.cells.iter().enumerate() {
            for (di, cell) in row.iter().enumerate() {
                let absent = bundle.expansions[qi][di].is_absent();
                ensure(absent == cell.is_none(), || {
                    format!("query {qi} decade {di}: marker mismatch")
                })?;
                absent_cells += usize::from(absent);
            }
        }
        ensure(absent_cells > 0, || {
            "corpus produced no absent cells".into()
        })?;
        let tau = fs::read_to_string(out1.join("tau.csv")).map_err(|e| e.to_string())?;
        let csv_absent = tau.matches(ABSENT).count();
        ensure(csv_absent == absent_cells, || {
            format!("tau.csv has {csv_absent} markers, expected {absent_cells}")
        })?;
        for line in tau.lines().skip(1) {
            for field in line.split(',').skip(1) {
                ensure(field == ABSENT || field.parse::<f64>().is_ok(), || {
                    format!("bad tau field {field:?}")
                })?;
            }
        }
        let md = fs::read_to_string(out1.join("term_tables.md")).map_err(|e| e.to_string())?;
        let md_absent = md.matches(&format!("| {ABSENT} |")).count();
        ensure(md_absent == absent_cells, || {
            format!("term tables mark {md_absent} rows, expected {absent_cells}")
        })?;
        let corpus_size: usize = ProtocolCorpus::default().total_paragraphs();
        Ok(format!(
            "{corpus_size} paragraphs, 25 queries, {absent_cells} absent cells, {elapsed:.2?}"
        ))
    })();

    let out2 = dir.path().join("run2");
    experiment::run_experiment(&config, &out2).map_err(|e| e.to_string())?;
    let determinism = (|| {
        for name in REPORT_FILES {
            let a = fs::read(out1.join(name)).map_err(|e| e.to_string())?;
            let b = fs::read(out2.join(name)).map_err(|e| e.to_string())?;
            ensure(a == b, || format!("{name} differs between runs"))?;
        }
        Ok("5 report files byte-identical across two runs".to_string())
    })();
    Ok((fidelity, determinism))
}

fn report_format_fixture() -> Outcome {
    let labels = vec![DecadeId::D1830s, DecadeId::D1840s, DecadeId::Full];
    let cell = |metric, mean, std| {
        Some(MetricCell {
            mean,
            std,
            n: 25,
            metric,
        })
    };
    let jac = |m, s| cell(Metric::Jaccard, m, s);
    let js = |m, s| cell(Metric::Jsd, m, s);
    let jaccard = ComparisonMatrix {
        metric: Metric::Jaccard,
        labels: labels.clone(),
        cells: vec![
            vec![jac(1.0, 0.0), jac(0.1756, 0.1392), jac(0.4491, 0.1484)],
            vec![jac(0.1756, 0.1392), jac(1.0, 0.0), jac(0.2257, 0.1377)],
            vec![jac(0.4491, 0.1484), jac(0.2257, 0.1377), jac(1.0, 0.0)],
        ],
    };
    let jsd = ComparisonMatrix {
        metric: Metric::Jsd,
        labels,
        cells: vec![
            vec![js(0.0, 0.0), js(0.5249, 0.2084), js(0.3, 0.1)],
            vec![js(0.5249, 0.2084), js(0.0, 0.0), js(0.2, 0.05)],
            vec![js(0.3, 0.1), js(0.2, 0.05), js(0.0, 0.0)],
        ],
    };
    let md = render_matrix_markdown(&jaccard, &jsd);
    let lines: Vec<&str> = md.lines().collect();
    let cells = |line: &str| -> Vec<String> {
        line.trim_matches('|')
            .split('|')
            .map(|c| c.trim().to_string())
            .collect()
    };
    let row_of = |label: &str| {
        lines
            .iter()
            .position(|l| l.starts_with(&format!("| {label} |")))
            .ok_or_else(|| format!("no row for {label}"))
    };
    let r30 = row_of("1830s")?;
    let (means, stds) = (cells(lines[r30]), cells(lines[r30 + 1]));
    ensure(means[1] == "1" && stds[1] == "(0)", || {
        format!("diagonal {means:?} {stds:?}")
    })?;
    ensure(means[3] == "0.4491" && stds[3] == "(0.1484)", || {
        format!("upper cell {} / {}", means[3], stds[3])
    })?;
    let r40 = row_of("1840s")?;
    let (means, stds) = (cells(lines[r40]), cells(lines[r40 + 1]));
    ensure(means[1] == "0.5249" && stds[1] == "(0.2084)", || {
        format!("lower cell {} / {}", means[1], stds[1])
    })?;
    ensure(means[2] == "1" && stds[2] == "(0)", || {
        "second diagonal".into()
    })?;
    Ok("\"0.4491\" over \"(0.1484)\", diagonal \"1\" over \"(0)\"".into())
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = vec![
        ("retrieval oracle equivalence", retrieval_oracle()),
        ("feedback oracle equivalence", feedback_oracle()),
        ("kendall tau oracle equivalence", tau_oracle()),
        ("metric laws", metric_laws()),
        ("point values", point_values()),
        ("drift detection", drift_detection()),
    ];
    match protocol_runs() {
        Ok((fidelity, determinism)) => {
            results.push(("protocol fidelity", fidelity));
            results.push(("report format fixture", report_format_fixture()));
            results.push(("determinism", determinism));
        }
        Err(e) => {
            results.push(("protocol fidelity", Err(e.clone())));
            results.push(("report format fixture", report_format_fixture()));
            results.push(("determinism", Err(e)));
        }
    }
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
