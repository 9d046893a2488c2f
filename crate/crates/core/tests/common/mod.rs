//! Fixture builders shared by the integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use tutorrag::corpus::{Block, Source, TutorialDoc};
use tutorrag::gateway::stub::{Matcher, StubRule, StubScript};
use tutorrag::gateway::Gateway;
use tutorrag::AgentAction;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Vocabulary of the positive (GUI tutorial) class.
pub const POS_VOCAB: &[&str] = &[
    "open", "tap", "click", "settings", "menu", "button", "select", "toggle", "enable", "disable", "swipe",
    "scroll", "icon", "window", "dialog", "checkbox", "dropdown", "tab", "sidebar", "toolbar", "preferences",
    "account", "profile", "notification", "screen", "drag", "panel", "option", "confirm", "save", "launch",
    "app", "browser", "address", "bar", "type", "field", "submit", "navigate", "home",
];

/// Vocabulary of the negative class; disjoint from [`POS_VOCAB`].
pub const NEG_VOCAB: &[&str] = &[
    "recipe", "flour", "sugar", "oven", "bake", "weather", "rain", "forecast", "football", "goal", "league",
    "match", "poem", "river", "mountain", "history", "empire", "ancient", "garden", "tomato", "soil", "harvest",
    "music", "guitar", "melody", "novel", "chapter", "author", "travel", "beach", "island", "vacation", "coffee",
    "bean", "roast", "election", "senate", "policy", "planet", "orbit",
];

pub fn vocab_text(rng: &mut ChaCha8Rng, vocab: &[&str], len: usize) -> String {
    (0..len).map(|_| *vocab.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

pub fn text_doc(id: impl Into<String>, text: impl Into<String>) -> TutorialDoc {
    TutorialDoc::from_text(id, text)
}

/// `n` positive and `n` negative documents with disjoint vocabularies.
pub fn disjoint_corpus(seed: u64, n: usize) -> (Vec<TutorialDoc>, Vec<TutorialDoc>) {
    let mut r = rng(seed);
    let pos = (0..n)
        .map(|i| {
            let len = r.gen_range(20..80);
            text_doc(format!("pos-{i}"), vocab_text(&mut r, POS_VOCAB, len))
        })
        .collect();
    let neg = (0..n)
        .map(|i| {
            let len = r.gen_range(20..80);
            text_doc(format!("neg-{i}"), vocab_text(&mut r, NEG_VOCAB, len))
        })
        .collect();
    (pos, neg)
}

/// Word-level 3-shingle Jaccard over lowercased whitespace tokens.
pub fn true_jaccard(a: &str, b: &str) -> f64 {
    use std::collections::HashSet;
    let sh = |t: &str| -> HashSet<String> {
        let w: Vec<String> = t.split_whitespace().map(|s| s.to_lowercase()).collect();
        w.windows(3).map(|x| x.join(" ")).collect()
    };
    let (x, y) = (sh(a), sh(b));
    x.intersection(&y).count() as f64 / x.union(&y).count() as f64
}

pub struct CorpusFixture {
    /// 100 raw documents: 50 distinct positives, 10 near-duplicates of the
    /// first 10 positives, 40 negatives.
    pub docs: Vec<TutorialDoc>,
    /// `(original, near-duplicate)` id pairs.
    pub planted: Vec<(String, String)>,
}

pub fn corpus_fixture(seed: u64) -> CorpusFixture {
    let mut r = rng(seed);
    let mut docs = Vec::new();
    for i in 0..50 {
        let len = r.gen_range(120..160);
        docs.push(text_doc(format!("tut-{i:02}"), vocab_text(&mut r, POS_VOCAB, len)));
    }
    let mut planted = Vec::new();
    for i in 0..10 {
        let original = docs[i].text();
        let mut words: Vec<&str> = original.split_whitespace().collect();
        let last = words.len() - 1;
        words[last] = if words[last] == "save" { "launch" } else { "save" };
        let id = format!("dup-{i:02}");
        planted.push((docs[i].id.clone(), id.clone()));
        docs.push(text_doc(id, words.join(" ")));
    }
    for i in 0..40 {
        let len = r.gen_range(60..120);
        docs.push(text_doc(format!("neg-{i:02}"), vocab_text(&mut r, NEG_VOCAB, len)));
    }
    CorpusFixture { docs, planted }
}

pub fn write_raw_corpus(path: &Path, docs: &[TutorialDoc]) {
    let lines: Vec<serde_json::Value> = docs
        .iter()
        .map(|d| json!({"id": d.id, "title": d.title, "blocks": d.blocks}))
        .collect();
    tutorrag::io::write_jsonl(path, &lines).unwrap();
}

// ---- keyed online suite ----

pub const EPISODES: usize = 50;

fn letters(i: usize, prefix: &str) -> String {
    format!("{prefix}{}{}", (b'a' + (i / 26) as u8) as char, (b'a' + (i % 26) as u8) as char)
}

/// The three words only episode `e`'s goal and tutorials share.
pub fn episode_words(e: usize) -> [String; 3] {
    [letters(e, "zq"), letters(e, "vx"), letters(e, "jw")]
}

pub fn knowledge_token(e: usize) -> String {
    format!("KNOW-{e:02}")
}

pub fn screen_id(e: usize, step: usize) -> String {
    format!("e{e:02}-s{step}")
}

pub fn correct_button(e: usize, step: usize) -> String {
    format!("e{e:02}-b{step}")
}

pub fn goal(e: usize) -> String {
    let [a, b, c] = episode_words(e);
    format!("complete {a} {b} {c}")
}

/// Even episodes carry a noisy distractor among their top-3 tutorials.
pub fn has_noisy_distractor(e: usize) -> bool {
    e.is_multiple_of(2)
}

pub fn keyed_env(e: usize) -> serde_json::Value {
    let screen = |step: usize| {
        json!({
            "elements": [
                {"element_id": correct_button(e, step), "kind": "button", "label": "Continue"},
                {"element_id": format!("e{e:02}-x{step}"), "kind": "button", "label": "Cancel"}
            ],
            "transitions": [
                {"action": AgentAction::click(correct_button(e, step)).to_string(),
                 "next": if step == 0 { screen_id(e, 1) } else { format!("e{e:02}-done") }}
            ]
        })
    };
    json!({
        "name": format!("e{e:02}"),
        "goal": goal(e),
        "initial_screen": screen_id(e, 0),
        "screens": {
            screen_id(e, 0): screen(0),
            screen_id(e, 1): screen(1),
            format!("e{e:02}-done"): {}
        },
        "goal_predicate": {"type": "reach_screen", "screen": format!("e{e:02}-done")},
        "required_knowledge": {"1": knowledge_token(e), "2": knowledge_token(e)}
    })
}

pub fn keyed_tutorials() -> Vec<TutorialDoc> {
    let mut docs = Vec::new();
    for e in 0..EPISODES {
        let [a, b, c] = episode_words(e);
        let mut rel = TutorialDoc::new(
            format!("t{e:02}-guide"),
            Source::Custom,
            vec![
                Block::text(format!("Open the {a} {b} {c} panel from the home screen.")),
                Block::text(format!("Enter access code {} on each screen, then tap Continue.", knowledge_token(e))),
            ],
        );
        rel.title = Some(format!("{a} {b} {c} walkthrough"));
        docs.push(rel);
        let second = if has_noisy_distractor(e) {
            format!("NOISE forum thread with rumours about {a} {b} {c}; nothing here is verified.")
        } else {
            format!("Release notes mentioning {a} {b} {c} in passing.")
        };
        docs.push(text_doc(format!("t{e:02}-extra"), second));
        docs.push(text_doc(format!("t{e:02}-notes"), format!("Glossary entry for {a} {b} {c}.")));
    }
    docs
}

/// Correct iff the prompt carries the episode's knowledge token; any prompt
/// containing NOISE derails it.
pub fn keyed_backbone_script() -> StubScript {
    let mut s = StubScript::new("STOP()").rule(Matcher::Contains("NOISE".into()), "STOP(\"confused\")");
    for e in 0..EPISODES {
        for step in 0..2 {
            s.rules.push(StubRule::new(
                Matcher::AllOf(vec![format!("Screen: {}\n", screen_id(e, step)), knowledge_token(e)]),
                AgentAction::click(correct_button(e, step)).to_string(),
            ));
        }
    }
    s
}

/// Relevant (with the knowledge token as summary) iff the tutorial carries one.
pub fn keyed_guidance_script() -> StubScript {
    StubScript::new("<score>\n0\n</score>").rule(
        Matcher::Regex(r"(?s)Tutorial: .*?(KNOW-\d\d)".into()),
        "<score>\n1\n</score>\n<summary>\nEnter access code ${1} on every screen.\n</summary>",
    )
}

pub fn irrelevant_guidance_script() -> StubScript {
    StubScript::new("<score>\n0\n</score>")
}

pub fn stub(script: StubScript) -> Gateway {
    Gateway::from_stub(script).unwrap()
}

/// Offline seeds: the first step of each keyed episode.
pub fn keyed_seeds() -> Vec<tutorrag::task::SeedExample> {
    (0..EPISODES)
        .map(|e| {
            let env: tutorrag::agent::ScriptedEnv = serde_json::from_value(keyed_env(e)).unwrap();
            tutorrag::task::SeedExample {
                id: format!("seed-{e:02}"),
                goal: goal(e),
                observation: env.observe(&screen_id(e, 0)),
                history: vec![],
                gold_action: AgentAction::click(correct_button(e, 0)),
                source_dataset: "keyed".into(),
            }
        })
        .collect()
}

pub struct KeyedSuite {
    pub dir: PathBuf,
    pub config: PathBuf,
    pub raw_corpus: PathBuf,
    pub positives: PathBuf,
    pub negatives: PathBuf,
    pub seeds: PathBuf,
}

fn write_json(path: &Path, value: &impl serde::Serialize) {
    tutorrag::io::write_json_pretty(path, value).unwrap();
}

/// Writes the keyed suite, its stub scripts, a run config and the raw inputs
/// for a full corpus-to-benchmark pipeline into `dir`.
pub fn write_keyed_suite(dir: &Path) -> KeyedSuite {
    std::fs::create_dir_all(dir.join("envs")).unwrap();
    let tutorials = keyed_tutorials();
    tutorrag::io::write_jsonl(&dir.join("corpus.jsonl"), &tutorials).unwrap();
    for e in 0..EPISODES {
        write_json(&dir.join("envs").join(format!("e{e:02}.json")), &keyed_env(e));
    }
    let noisy = (0..EPISODES).filter(|&e| has_noisy_distractor(e)).count();
    write_json(
        &dir.join("suite.json"),
        &json!({
            "name": "keyed-50",
            "corpus": "corpus.jsonl",
            "envs": ["envs"],
            "k": 3,
            "expected": {
                "baseline": {"episode_sr": 0.0},
                "vanilla_rag": {"episode_sr": (EPISODES - noisy) as f64 / EPISODES as f64},
                "guided": {"episode_sr": 1.0}
            }
        }),
    );
    write_json(&dir.join("backbone.json"), &keyed_backbone_script());
    write_json(&dir.join("guidance.json"), &keyed_guidance_script());
    write_json(&dir.join("labeler.json"), &StubScript::new("Yes"));

    let (_, negatives) = disjoint_corpus(11, 60);
    let raw_corpus = dir.join("raw").join("tutorials.jsonl");
    let mut raw: Vec<TutorialDoc> = tutorials.clone();
    raw.extend(negatives.iter().take(20).cloned());
    write_raw_corpus(&raw_corpus, &raw);
    let positives = dir.join("raw").join("positives.jsonl");
    let negatives_path = dir.join("raw").join("negatives.jsonl");
    write_raw_corpus(&positives, &tutorials);
    write_raw_corpus(&negatives_path, &negatives[20..]);
    let seeds = dir.join("seeds.jsonl");
    tutorrag::io::write_jsonl(&seeds, &keyed_seeds()).unwrap();

    let config = dir.join("config.toml");
    std::fs::write(
        &config,
        r#"seed = 0

[gateway.backbone]
kind = "stub"
script = "backbone.json"

[gateway.guidance_model]
kind = "stub"
script = "guidance.json"

[gateway.teacher]
kind = "stub"
script = "guidance.json"

[gateway.labeler]
kind = "stub"
script = "labeler.json"

[gateway.embedder]
kind = "hashing"

[corpus]
bucket_count = 65536
epochs = 20
"#,
    )
    .unwrap();
    KeyedSuite { dir: dir.to_path_buf(), config, raw_corpus, positives, negatives: negatives_path, seeds }
}
