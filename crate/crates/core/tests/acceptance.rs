//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use sha2::{Digest, Sha256};
use tutorrag::action::{actions_match, parse_action};
use tutorrag::agent::{render_agent_prompt, AgentPipeline, Mode, GUIDANCE_DELIMITER};
use tutorrag::corpus::{
    dedup_corpus, label::render_labeling_prompt, run_corpus_pipeline, train_classifier, DedupConfig, IngestMode,
    PipelineSpec, Source, TrainParams, TutorialDoc,
};
use tutorrag::eval::{load_suite, op_f1, run_benchmark};
use tutorrag::gateway::stub::{Matcher, StubRule, StubScript};
use tutorrag::guidance::{
    parse_guidance, parse_guidance_lenient, render_guidance_prompt, render_response,
};
use tutorrag::gateway::{EmbeddingClient, GatewayError};
use tutorrag::retrieval::{build_index, retrieve_topk, EmbeddingVector, HashingEmbedder, Retriever, TutorialIndex};
use tutorrag::rsf::{
    export_rsf_dataset, replay_filter, resolve_conflicts, sample_candidates, DiscardReason, RsfRecord, TrainingRow,
};
use tutorrag::task::{Observation, SeedExample, TaskContext};
use tutorrag::AgentAction;

use common::*;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:.2?}, limit {limit:?}"))
}

// 1. Retrieval exactness against a brute-force cosine ranking.
struct FixedQueries(HashMap<String, EmbeddingVector>);

impl EmbeddingClient for FixedQueries {
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, GatewayError> {
        Ok(texts.iter().map(|t| self.0[t].clone()).collect())
    }

    fn provider_tag(&self) -> String {
        "fixture".into()
    }
}

fn retrieval_exactness() -> Check {
    let start = Instant::now();
    let mut r = rng(1);
    let dims = 256;
    let mut random = |n: usize| -> Vec<Vec<f32>> {
        (0..n).map(|_| (0..dims).map(|_| r.gen_range(-1.0f32..1.0)).collect()).collect()
    };
    let mut vectors = random(1000);
    // Exact duplicates force score ties that only the id rule can order.
    for i in 0..20 {
        vectors[999 - i] = vectors[i].clone();
    }
    let ids: Vec<String> = (0..vectors.len()).map(|i| format!("v{:04}", (i * 7919) % 1000)).collect();
    let mut index = TutorialIndex::new(dims, "fixture");
    for (id, v) in ids.iter().zip(&vectors) {
        index.push(id.clone(), EmbeddingVector::new(v.clone()).unwrap()).unwrap();
    }
    let mut queries = random(50);
    // Probes that sit exactly on a duplicated pair, so the tie rule decides rank 1 and 2.
    queries.extend((0..5).map(|i| vectors[i].clone()));
    let provider = FixedQueries(
        queries.iter().enumerate().map(|(i, q)| (format!("q{i}"), EmbeddingVector::new(q.clone()).unwrap())).collect(),
    );

    let cosine = |a: &[f32], b: &[f32]| -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum();
        let na: f64 = a.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
        dot / (na * nb)
    };
    let mut checked = 0;
    for (qi, q) in queries.iter().enumerate() {
        let mut oracle: Vec<(f64, &String)> = vectors.iter().zip(&ids).map(|(v, id)| (cosine(q, v), id)).collect();
        oracle.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(b.1)));
        for k in [1usize, 3, 10] {
            let got: Vec<String> = retrieve_topk(&index, &format!("q{qi}"), k, &provider)
                .map_err(|e| e.to_string())?
                .into_iter()
                .map(|h| h.tutorial_id)
                .collect();
            let want: Vec<String> = oracle.iter().take(k).map(|(_, id)| (*id).clone()).collect();
            ensure(got == want, || format!("query {qi}, k={k}: got {got:?}, want {want:?}"))?;
            checked += 1;
        }
    }
    within(start, Duration::from_secs(5))?;
    Ok(format!("{checked} id sequences identical to brute force (50 random queries + 5 tie probes, k in {{1,3,10}}); limit 5s"))
}

// 2. Op F1 against a brute-force multiset-overlap oracle.
fn op_f1_oracle() -> Check {
    let start = Instant::now();
    let mut r = rng(2);
    let alphabet = ["type", "wifi", "click", "settings", "on", "off"];
    let brute = |pred: &[&str], gold: &[&str]| -> f64 {
        let mut used = vec![false; gold.len()];
        let mut overlap = 0usize;
        for p in pred {
            if let Some(j) = (0..gold.len()).find(|&j| !used[j] && gold[j] == *p) {
                used[j] = true;
                overlap += 1;
            }
        }
        if pred.is_empty() && gold.is_empty() {
            return 1.0;
        }
        if overlap == 0 {
            return 0.0;
        }
        let p = overlap as f64 / pred.len() as f64;
        let rc = overlap as f64 / gold.len() as f64;
        2.0 * p * rc / (p + rc)
    };
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let mut draw = || -> Vec<&str> {
            let n = r.gen_range(0..=12);
            (0..n).map(|_| alphabet[r.gen_range(0..alphabet.len())]).collect()
        };
        let (pred, gold) = (draw(), draw());
        let got = op_f1(&pred, &gold);
        let want = brute(&pred, &gold);
        worst = worst.max((got - want).abs());
        ensure((got - want).abs() <= 1e-12, || format!("{pred:?} vs {gold:?}: {got} != {want}"))?;
    }
    within(start, Duration::from_secs(1))?;
    Ok(format!("200 pairs, max |diff| {worst:e} (tolerance 1e-12); limit 1s"))
}

// 3. Guidance render/parse round-trip and malformed-input handling.
fn guidance_round_trip() -> Check {
    let mut r = rng(3);
    let pool: Vec<char> = "abcdefghijklmnopqrstuvwxyz ABCXYZ0123456789 .,;:!?-_()[]{}<>/\\\"'\n\t\u{e9}\u{6f22}\u{1f600}"
        .chars()
        .collect();
    let tags = ["<score>", "</score>", "<summary>", "</summary>"];
    let mut recovered = 0;
    while recovered < 500 {
        let relevance: u8 = r.gen_range(0..=1);
        let summary = if relevance == 1 {
            let n = r.gen_range(0..80);
            let s: String = (0..n).map(|_| pool[r.gen_range(0..pool.len())]).collect();
            s.trim().to_string()
        } else {
            String::new()
        };
        if tags.iter().any(|t| summary.contains(t)) {
            continue;
        }
        let text = render_response(relevance, &summary);
        let g = parse_guidance(&text, "t").map_err(|e| format!("{text:?}: {e}"))?;
        ensure(g.relevance == relevance && g.summary == summary, || {
            format!("{text:?} parsed to ({}, {:?})", g.relevance, g.summary)
        })?;
        recovered += 1;
    }

    let mut malformed: Vec<String> = [
        "",
        "no tags here",
        "<score></score>",
        "<score> </score>",
        "<score>2</score>",
        "<score>-1</score>",
        "<score>01</score>",
        "<score>1.0</score>",
        "<score>yes</score><summary>do it</summary>",
        "<score>1",
        "<score>\n1\n<summary>x</summary>",
        "</score>1<score>",
        "<summary>tap wifi</summary>",
        "<SCORE>1</SCORE>",
        "<score >1</score>",
        "score: 1\nsummary: tap wifi",
        "<score>one</score>",
        "<score>1 1</score>",
        "<score>\u{ff11}</score>",
        "<score>0x1</score>",
        "<<score>>",
        "<score><score>1</score></score>",
        "\u{0}\u{1}\u{2}",
        "<score>0</score><summary>should be dropped</summary>",
        "<score>+1</score>",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    while malformed.len() < 50 {
        let n = r.gen_range(0..200);
        let s: String = (0..n).map(|_| pool[r.gen_range(0..pool.len())]).filter(|c| *c != '<').collect();
        malformed.push(s);
    }
    for m in &malformed {
        let g = parse_guidance_lenient(m, "t");
        ensure(g.relevance == 0 && g.summary.is_empty(), || format!("{m:?} became ({}, {:?})", g.relevance, g.summary))?;
        ensure(g.flag.is_some(), || format!("{m:?} was not flagged"))?;
    }
    Ok(format!("500/500 recovered exactly; {} malformed inputs all (0, \"\") and flagged", malformed.len()))
}

// 4. Rejection-sampling filter soundness on a keyed fixture.
fn rsf_soundness() -> Check {
    let start = Instant::now();
    let seeds: Vec<SeedExample> = (0..20)
        .map(|s| SeedExample {
            id: format!("seed-{s:02}"),
            goal: format!("open panel {s}"),
            observation: Observation { screen_id: format!("panel-home-{s}"), ..Default::default() },
            history: vec![],
            gold_action: AgentAction::click(format!("panel-{s}")),
            source_dataset: "keyed".into(),
        })
        .collect();
    let backbone = stub(
        StubScript::new("CLICK(id=wrong)")
            .rule(Matcher::Regex(r"(?s)Task: open panel (\d+)\n.*USE-MENU-X".into()), "CLICK(id=panel-${1})")
            .rule(Matcher::Regex(r"Task: open drawer (\d+)\n".into()), "CLICK(id=drawer-${1})"),
    );
    let mut guidance_script = StubScript::new("<score>\n0\n</score>");
    for mask in 0..16u32 {
        let responses = (0..4)
            .map(|v| {
                if mask >> v & 1 == 1 {
                    format!("<score>\n1\n</score>\n<summary>\nSeed ${{1}} tutorial ${{2}} variant {v}: press USE-MENU-X.\n</summary>")
                } else if v % 2 == 1 {
                    format!("<score>\n1\n</score>\n<summary>\nSeed ${{1}} tutorial ${{2}} variant {v}: press back.\n</summary>")
                } else {
                    "<score>\n0\n</score>".to_string()
                }
            })
            .collect();
        guidance_script.rules.push(StubRule {
            matcher: Matcher::Regex(format!(r"PLAN-(\d+)-(\d+)-{mask:04b}\b")),
            responses,
        });
    }
    guidance_script.rules.push(StubRule {
        matcher: Matcher::Contains("DRAWER-TUTORIAL".into()),
        responses: vec![
            "<score>\n1\n</score>\n<summary>\nPull the drawer handle.\n</summary>".into(),
            "<score>\n0\n</score>".into(),
        ],
    });
    let guidance = stub(guidance_script);

    let mask_of = |s: usize, j: usize| ((s * 3 + j) * 5 % 16) as u32;
    let mut expected: BTreeSet<(String, String, String)> = BTreeSet::new();
    let mut records: Vec<RsfRecord> = Vec::new();
    let mut tutorials: HashMap<String, TutorialDoc> = HashMap::new();
    for (s, seed) in seeds.iter().enumerate() {
        for j in 0..3 {
            let mask = mask_of(s, j);
            let doc = text_doc(format!("tut-{s}-{j}"), format!("Panel guide. PLAN-{s}-{j}-{mask:04b}"));
            let candidates = sample_candidates(&guidance, seed, &doc, 4, 1.0).map_err(|e| e.to_string())?;
            ensure(candidates.len() == 4, || "m=4 must give 4 candidates".into())?;
            for v in 0..4 {
                if mask >> v & 1 == 1 {
                    expected.insert((seed.id.clone(), doc.id.clone(), format!("Seed {s} tutorial {j} variant {v}: press USE-MENU-X.")));
                }
            }
            let replayed = replay_filter(&backbone, seed, &doc, candidates).map_err(|e| e.to_string())?;
            records.extend(resolve_conflicts(replayed));
            tutorials.insert(doc.id.clone(), doc);
        }
    }
    let retained: BTreeSet<(String, String, String)> = records
        .iter()
        .filter(|r| r.retained)
        .map(|r| (r.seed_id.clone(), r.tutorial_id.clone(), r.candidate.summary.clone()))
        .collect();
    let hits = retained.intersection(&expected).count();
    let precision = hits as f64 / retained.len().max(1) as f64;
    let recall = hits as f64 / expected.len().max(1) as f64;
    ensure(precision == 1.0 && recall == 1.0 && !expected.is_empty(), || {
        format!("precision {precision}, recall {recall} ({} retained, {} expected)", retained.len(), expected.len())
    })?;

    let mut conflict_records = Vec::new();
    for s in 0..5 {
        let seed = SeedExample {
            id: format!("drawer-{s}"),
            goal: format!("open drawer {s}"),
            observation: Observation { screen_id: "desk".into(), ..Default::default() },
            history: vec![],
            gold_action: AgentAction::click(format!("drawer-{s}")),
            source_dataset: "keyed".into(),
        };
        let doc = text_doc(format!("drawer-tut-{s}"), "DRAWER-TUTORIAL pull the handle");
        let candidates = sample_candidates(&guidance, &seed, &doc, 2, 1.0).map_err(|e| e.to_string())?;
        let replayed = replay_filter(&backbone, &seed, &doc, candidates).map_err(|e| e.to_string())?;
        ensure(replayed.iter().all(|r| r.retained), || "conflict fixture candidates must all match gold".into())?;
        conflict_records.extend(resolve_conflicts(replayed));
    }
    let conflicting =
        conflict_records.iter().filter(|r| r.discard_reason == Some(DiscardReason::ConflictingLabels) && !r.retained).count();
    ensure(conflict_records.len() == 10 && conflicting == 10, || {
        format!("{conflicting} of {} conflict records discarded", conflict_records.len())
    })?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("rsf.jsonl");
    let mut all = records.clone();
    all.extend(conflict_records);
    let stats = export_rsf_dataset(&all, &out).map_err(|e| e.to_string())?;
    let rows: Vec<TrainingRow> = tutorrag::io::read_jsonl(&out).map_err(|e| e.to_string())?;
    ensure(rows.len() == expected.len() && stats.exported == rows.len(), || {
        format!("exported {} rows, expected {}", rows.len(), expected.len())
    })?;
    let by_id: HashMap<&str, &SeedExample> = seeds.iter().map(|s| (s.id.as_str(), s)).collect();
    for row in &rows {
        let g = parse_guidance(&row.completion, &row.meta.tutorial_id).map_err(|e| e.to_string())?;
        let seed = by_id[row.meta.seed_id.as_str()];
        let original = records
            .iter()
            .find(|r| r.retained && r.seed_id == seed.id && r.tutorial_id == row.meta.tutorial_id && r.candidate.summary == g.summary)
            .ok_or_else(|| format!("row {:?} does not re-parse to a retained candidate", row.completion))?;
        ensure(original.candidate.relevance == g.relevance, || "relevance changed in export".into())?;
        ensure(row.prompt == render_guidance_prompt(&seed.context(), &tutorials[&row.meta.tutorial_id]), || {
            "exported prompt differs from the rendered guidance prompt".into()
        })?;
        let sigma = if g.relevance == 1 { vec![g.summary.clone()] } else { vec![] };
        let reply = backbone.complete(render_agent_prompt(&seed.context(), &sigma), 0.0, 1).map_err(|e| e.to_string())?;
        let action = parse_action(&reply[0]).map_err(|e| e.to_string())?;
        ensure(actions_match(&action, &seed.gold_action), || format!("row for {} replays to {action}", seed.id))?;
    }
    within(start, Duration::from_secs(10))?;
    Ok(format!(
        "precision 1.0, recall 1.0 over {} keeps; 10/10 conflicting_labels; {} exported rows re-parse and replay to gold; limit 10s",
        expected.len(),
        rows.len()
    ))
}

// 5. End-to-end arm separation on the keyed 50-episode suite.
fn arm_separation() -> Check {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_keyed_suite(dir.path());
    let suite = load_suite(dir.path()).map_err(|e| e.to_string())?;
    let docs: Vec<TutorialDoc> = tutorrag::io::read_jsonl(&suite.corpus_path().unwrap()).map_err(|e| e.to_string())?;
    let embedder = Arc::new(HashingEmbedder::new(256));
    let index = build_index(&docs, embedder.as_ref()).map_err(|e| e.to_string())?;
    let retriever = Retriever::new(index, embedder, docs).map_err(|e| e.to_string())?;
    let mut pipeline = AgentPipeline::new(Mode::Baseline, stub(keyed_backbone_script()));
    pipeline.k = suite.spec.k.unwrap_or(3);
    pipeline.retriever = Some(retriever);
    pipeline.guidance = Some(stub(keyed_guidance_script()));

    let run = run_benchmark(&suite, &Mode::ALL, &pipeline, serde_json::json!({})).map_err(|e| e.to_string())?;
    let sr = |m: Mode| run.report.arm(m).and_then(|a| a.aggregates.episode_sr).unwrap_or(f64::NAN);
    let expected = |m: Mode| suite.spec.expected[&m]["episode_sr"];
    let (b, v, g) = (sr(Mode::Baseline), sr(Mode::VanillaRag), sr(Mode::Guided));
    ensure(run.report.arms.iter().all(|a| a.tasks == EPISODES), || "row count differs from suite size".into())?;
    ensure(g == 1.0 && b == 0.0, || format!("guided {g}, baseline {b}"))?;
    ensure(v == expected(Mode::VanillaRag) && (0.0..=1.0).contains(&v), || {
        format!("vanilla_rag {v}, fixture expects {}", expected(Mode::VanillaRag))
    })?;

    let traces = |mode: Mode, run: &tutorrag::eval::BenchmarkRun| -> BTreeMap<String, Vec<u8>> {
        run.traces.iter().filter(|t| t.0 == mode).map(|t| (t.1.clone(), t.2.clone())).collect()
    };
    let baseline = traces(Mode::Baseline, &run);
    ensure(
        baseline.values().all(|t| !String::from_utf8_lossy(t).contains(GUIDANCE_DELIMITER)),
        || "a baseline trace contains guidance".into(),
    )?;
    let guided_text: String = traces(Mode::Guided, &run).values().map(|t| String::from_utf8_lossy(t).into_owned()).collect();
    ensure(!guided_text.contains("NOISE"), || "guided traces contain raw distractor text".into())?;

    let mut irrelevant = pipeline.clone();
    irrelevant.guidance = Some(stub(irrelevant_guidance_script()));
    let quiet = run_benchmark(&suite, &[Mode::Guided], &irrelevant, serde_json::json!({})).map_err(|e| e.to_string())?;
    let quiet_traces = traces(Mode::Guided, &quiet);
    ensure(quiet_traces.len() == EPISODES && quiet_traces == baseline, || {
        "guided traces with all-irrelevant guidance differ from baseline traces".into()
    })?;
    within(start, Duration::from_secs(30))?;
    Ok(format!(
        "episode_sr guided {g:.2}, vanilla_rag {v:.2} (fixture expects {:.2}), baseline {b:.2}; {} all-irrelevant traces byte-identical to baseline; limit 30s",
        expected(Mode::VanillaRag),
        quiet_traces.len()
    ))
}

// 6. Corpus pipeline counts, dedup idempotence and classifier accuracy.
fn corpus_pipeline() -> Check {
    let start = Instant::now();
    let (pos, neg) = disjoint_corpus(5, 500);
    let params = TrainParams::default();
    let model = train_classifier(&pos[..400], &neg[..400], &params).map_err(|e| e.to_string())?;
    let correct = pos[400..].iter().filter(|d| model.passes(model.classify_text(&d.text()).score)).count()
        + neg[400..].iter().filter(|d| !model.passes(model.classify_text(&d.text()).score)).count();
    let accuracy = correct as f64 / 200.0;
    ensure(accuracy >= 0.95, || format!("held-out accuracy {accuracy}"))?;

    let fixture = corpus_fixture(6);
    let by_id: HashMap<&str, &TutorialDoc> = fixture.docs.iter().map(|d| (d.id.as_str(), d)).collect();
    for (a, b) in &fixture.planted {
        let j = true_jaccard(&by_id[a.as_str()].text(), &by_id[b.as_str()].text());
        ensure(j >= 0.95, || format!("planted pair {a}/{b} has Jaccard {j}"))?;
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let raw = dir.path().join("raw.jsonl");
    write_raw_corpus(&raw, &fixture.docs);
    let labeler = stub(StubScript::new("Yes"));
    let spec = PipelineSpec {
        inputs: vec![(raw, Source::Custom)],
        mode: IngestMode::Strict,
        classifier: &model,
        dedup: DedupConfig::default(),
        labeler: &labeler,
        label_retries: 1,
        output: dir.path().join("curated.jsonl"),
        stage_dir: None,
    };
    let run = run_corpus_pipeline(&spec).map_err(|e| e.to_string())?;
    let report = run.report.as_tuple();
    ensure(report == (100, 60, 50, 50), || format!("CorpusReport {report:?}"))?;

    let curated: Vec<TutorialDoc> = tutorrag::io::read_jsonl(&spec.output).map_err(|e| e.to_string())?;
    let ids = |docs: &[TutorialDoc]| docs.iter().map(|d| d.id.clone()).collect::<Vec<_>>();
    let once = dedup_corpus(fixture.docs.clone(), &DedupConfig::default());
    let twice = dedup_corpus(once.clone(), &DedupConfig::default());
    ensure(ids(&once) == ids(&twice), || "dedup is not idempotent on the raw fixture".into())?;
    ensure(ids(&dedup_corpus(curated.clone(), &DedupConfig::default())) == ids(&curated), || {
        "dedup changes the curated corpus".into()
    })?;
    within(start, Duration::from_secs(60))?;
    Ok(format!("CorpusReport {report:?}; dedup idempotent; held-out accuracy {accuracy:.3} (bound 0.95); limit 60s"))
}

// 7. Rendered prompts equal the golden assets byte for byte.
const GOLDEN: [(&str, &str); 4] = [
    ("labeling_v1.system.txt", "1ea1bbc9f165f8a1d879768f16f7889b71028062c1760d4b8e1c7560433c123b"),
    ("labeling_v1.user.txt", "3abf26ec8c1e52a0dd371b6b74b9088f5bffd171b8e7cb351ed4402618baed10"),
    ("guidance_v1.system.txt", "129eb3884044c666f00253e5e57ab0cb2590ed7ddaae14b2adca5bff6e06eb80"),
    ("guidance_v1.user.txt", "d9681ab41bbb0e294f3fefd8ede60a734cb7b0d157cbd62f77840ebcef790326"),
];

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn prompt_fidelity() -> Check {
    let assets = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets");
    let golden: HashMap<&str, Vec<u8>> =
        GOLDEN.iter().map(|(name, _)| (*name, std::fs::read(assets.join(name)).unwrap())).collect();
    for (name, pinned) in GOLDEN {
        let got = sha256_hex(&golden[name]);
        ensure(got == pinned, || format!("{name} drifted: sha256 {got}"))?;
    }
    let fill = |name: &str, key: &str, value: &str| {
        String::from_utf8(golden[name].clone()).unwrap().replace(&format!("{{{key}}}"), value)
    };

    let doc = TutorialDoc::from_text("d", "Step 1: open Settings.\nStep 2: tap Wi-Fi.");
    let labeling = render_labeling_prompt(&doc);
    ensure(labeling[0].text().as_bytes() == golden["labeling_v1.system.txt"].as_slice(), || {
        "labeling system prompt differs from its golden asset".into()
    })?;
    ensure(labeling[1].text() == fill("labeling_v1.user.txt", "content", &doc.text()), || {
        "labeling user prompt differs from its golden asset".into()
    })?;

    let mut ctx = TaskContext::new("turn on wifi", Observation { screen_id: "home".into(), ..Default::default() });
    ctx.history = vec![AgentAction::OpenApp("Settings".into()), AgentAction::click("network")];
    let guidance = render_guidance_prompt(&ctx, &doc);
    ensure(guidance[0].text().as_bytes() == golden["guidance_v1.system.txt"].as_slice(), || {
        "guidance system prompt differs from its golden asset".into()
    })?;
    let user = fill("guidance_v1.user.txt", "instruction", &ctx.goal)
        .replace("{previous_actions}", &ctx.numbered_history())
        .replace("{tutorial}", &doc.text());
    ensure(guidance[1].text() == user, || "guidance user prompt differs from its golden asset".into())?;

    // Every single-byte change to every asset must be caught.
    let mut mutations = 0;
    for (name, pinned) in GOLDEN {
        let mut bytes = golden[name].clone();
        for i in 0..bytes.len() {
            bytes[i] ^= 0x01;
            ensure(sha256_hex(&bytes) != pinned, || format!("{name}: flip at byte {i} undetected"))?;
            bytes[i] ^= 0x01;
            mutations += 1;
        }
    }
    Ok(format!("4 rendered prompts byte-equal to pinned assets; {mutations} single-byte mutations all detected"))
}

// 8. Two stub-mode pipeline runs from one config give identical outputs.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(p) = stack.pop() {
        for entry in std::fs::read_dir(&p).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let mut bytes = std::fs::read(&path).unwrap();
            if path.to_string_lossy().ends_with("manifest.json") {
                let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                v.as_object_mut().unwrap().remove("created_at");
                bytes = serde_json::to_vec_pretty(&v).unwrap();
            }
            out.insert(path.strip_prefix(dir).unwrap().to_string_lossy().into_owned(), bytes);
        }
    }
    out
}

fn run_pipeline(suite: &KeyedSuite, work: &Path) -> Result<(), String> {
    let w = |name: &str| work.join(name).to_string_lossy().into_owned();
    let cfg = suite.config.to_string_lossy().into_owned();
    let s = |p: &Path| p.to_string_lossy().into_owned();
    let steps: Vec<Vec<String>> = vec![
        vec!["corpus".into(), "train-classifier".into(), "--positives".into(), s(&suite.positives), "--negatives".into(), s(&suite.negatives), "--out".into(), w("classifier.bin")],
        vec!["corpus".into(), "build".into(), "--input".into(), format!("custom={}", s(&suite.raw_corpus)), "--classifier".into(), w("classifier.bin"), "--out".into(), w("curated.jsonl"), "--stage-dir".into(), w("stages")],
        vec!["index".into(), "build".into(), "--corpus".into(), w("curated.jsonl"), "--out".into(), w("index.bin")],
        vec!["build-sft".into(), "--seeds".into(), s(&suite.seeds), "--index".into(), w("index.bin"), "--corpus".into(), w("curated.jsonl"), "--k".into(), "3".into(), "--out".into(), w("sft.jsonl")],
        vec!["build-rsf".into(), "--seeds".into(), s(&suite.seeds), "--index".into(), w("index.bin"), "--corpus".into(), w("curated.jsonl"), "--m".into(), "4".into(), "--temperature".into(), "1.0".into(), "--out".into(), w("rsf.jsonl"), "--report".into(), w("rsf_report.json")],
        vec!["bench".into(), "--suite".into(), s(&suite.dir), "--index".into(), w("index.bin"), "--out".into(), w("bench")],
    ];
    for step in steps {
        let mut argv = vec!["tutorrag".to_string(), "--config".into(), cfg.clone()];
        argv.extend(step.iter().cloned());
        let code = tutorrag::cli::dispatch(&argv);
        ensure(code == 0, || format!("`{}` exited {code}", step[..2].join(" ")))?;
    }
    Ok(())
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let suite = write_keyed_suite(&dir.path().join("suite"));
    let work = dir.path().join("work");
    run_pipeline(&suite, &work)?;
    let first = snapshot(&work);
    std::fs::remove_dir_all(&work).map_err(|e| e.to_string())?;
    run_pipeline(&suite, &work)?;
    let second = snapshot(&work);
    let differing: Vec<&String> = first.keys().filter(|k| first.get(*k) != second.get(*k)).collect();
    ensure(first.keys().eq(second.keys()) && differing.is_empty(), || format!("outputs differ: {differing:?}"))?;
    let manifests = first.keys().filter(|k| k.ends_with("manifest.json")).count();
    ensure(manifests == 6, || format!("expected 6 manifests, found {manifests}"))?;
    Ok(format!("{} files byte-identical across two runs ({manifests} manifests, timestamps excluded)", first.len()))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("retrieval exactness", retrieval_exactness),
        ("op F1 oracle", op_f1_oracle),
        ("guidance round-trip", guidance_round_trip),
        ("RSF filter soundness", rsf_soundness),
        ("end-to-end arm separation", arm_separation),
        ("corpus pipeline", corpus_pipeline),
        ("prompt fidelity", prompt_fidelity),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        match verdict {
            Ok(detail) => println!("acceptance criterion {} ({name}): PASS | {detail} | {:.2?}", i + 1, start.elapsed()),
            Err(detail) => {
                failed += 1;
                println!("acceptance criterion {} ({name}): FAIL | {detail} | {:.2?}", i + 1, start.elapsed())
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
