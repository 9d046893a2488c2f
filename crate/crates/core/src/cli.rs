//! Command-line entry point. [`dispatch`] parses arguments, runs one
//! subcommand and maps the result to an exit code: 0 on success (and for
//! `--help`), 1 when an input fails validation or a stage fails, 2 for
//! configuration and usage errors.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::agent::{run_episode, AgentPipeline, Mode, ScriptedEnv};
use crate::config::{load_config, RunConfig};
use crate::corpus::{
    ingest_corpus, run_corpus_pipeline, train_classifier, IngestMode, NgramClassifier, PipelineSpec, Source,
    TutorialDoc,
};
use crate::eval::{load_suite, render_table, run_benchmark};
use crate::gateway::{EmbeddingClient, Gateway, GatewayConfig, GatewayError};
use crate::guidance::generate_guidance;
use crate::io::read_jsonl;
use crate::manifest::ManifestBuilder;
use crate::retrieval::{build_index, retrieve_topk, Retriever, TutorialIndex};
use crate::rsf::{build_rsf_dataset, build_sft_dataset, RsfParams};
use crate::task::{Observation, SeedExample, TaskContext};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Marks an error as a configuration problem (exit code 2).
#[derive(Debug)]
struct ConfigFailure(String);

impl std::fmt::Display for ConfigFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigFailure {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigFailure(msg.into()).into()
}

#[derive(Parser, Debug)]
#[command(name = "tutorrag", version, about = "Tutorial-guided retrieval augmentation for GUI agents")]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Corpus curation.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Retrieval index.
    #[command(subcommand)]
    Index(IndexCmd),
    /// Generate guidance for one tutorial and print it as JSON.
    Guide(GuideArgs),
    /// Run one scripted episode and write its trace.
    RunEpisode(RunEpisodeArgs),
    /// Build the teacher-distilled SFT dataset.
    BuildSft(BuildSftArgs),
    /// Build the rejection-sampling dataset.
    BuildRsf(BuildRsfArgs),
    /// Run a task suite under several arms and compare them.
    Bench(BenchArgs),
}

#[derive(Subcommand, Debug)]
enum CorpusCmd {
    /// Ingest, classify, deduplicate and label; writes the curated corpus.
    Build(CorpusBuildArgs),
    /// Train the n-gram tutorial classifier.
    TrainClassifier(TrainArgs),
}

#[derive(Args, Debug)]
struct CorpusBuildArgs {
    /// Raw corpus JSONL, optionally prefixed with its source (`wikihow=path`).
    #[arg(long = "input", required = true)]
    inputs: Vec<String>,
    /// Trained classifier (defaults to `paths.classifier`).
    #[arg(long)]
    classifier: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also write each stage's survivors into this directory.
    #[arg(long)]
    stage_dir: Option<PathBuf>,
    /// Fail on the first malformed input line.
    #[arg(long)]
    strict: bool,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    positives: PathBuf,
    #[arg(long)]
    negatives: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum IndexCmd {
    /// Embed a curated corpus into an index file.
    Build(IndexBuildArgs),
    /// Print the top-k tutorials for a query as JSON.
    Query(IndexQueryArgs),
}

#[derive(Args, Debug)]
struct IndexBuildArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct IndexQueryArgs {
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    query: String,
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args, Debug)]
struct GuideArgs {
    #[arg(long)]
    goal: String,
    /// One action per line in the action grammar.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Observation JSON for the current screen.
    #[arg(long)]
    observation: Option<PathBuf>,
    #[arg(long)]
    tutorial: String,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    n: u32,
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
}

#[derive(Args, Debug)]
struct RetrievalArgs {
    #[arg(long)]
    index: Option<PathBuf>,
    /// Curated corpus the index was built from (defaults to `paths.corpus`).
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args, Debug)]
struct RunEpisodeArgs {
    #[arg(long)]
    env: PathBuf,
    #[arg(long)]
    mode: Option<Mode>,
    #[command(flatten)]
    retrieval: RetrievalArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BuildSftArgs {
    #[arg(long)]
    seeds: PathBuf,
    #[command(flatten)]
    retrieval: RetrievalArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BuildRsfArgs {
    #[arg(long)]
    seeds: PathBuf,
    #[command(flatten)]
    retrieval: RetrievalArgs,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    suite: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "baseline,vanilla_rag,guided")]
    arms: Vec<Mode>,
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let args: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match run(cli, &args) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigFailure>().is_some() {
                EXIT_CONFIG
            } else {
                EXIT_INPUT
            }
        }
    }
}

struct Ctx {
    cfg: RunConfig,
    snapshot: serde_json::Value,
    args: Vec<String>,
}

impl Ctx {
    fn chat(&self, name: &str) -> Result<Gateway> {
        let section = self.cfg.gateway.get(name).expect("known gateway section");
        self.chat_from(name, section)
    }

    fn chat_from(&self, name: &str, section: &GatewayConfig) -> Result<Gateway> {
        section.build_chat(&self.cfg.base_dir).map_err(|e| gateway_failure(name, e))
    }

    fn embedder(&self, section: &GatewayConfig) -> Result<std::sync::Arc<dyn EmbeddingClient>> {
        section.build_embedder().map_err(|e| gateway_failure("embedder", e))
    }

    fn manifest(&self, command: &str) -> ManifestBuilder {
        ManifestBuilder::new(command, &self.args, self.snapshot.clone())
    }

    fn corpus_path(&self, flag: &Option<PathBuf>) -> Result<PathBuf> {
        flag.clone()
            .or_else(|| self.cfg.paths.corpus.as_ref().map(|p| self.cfg.resolve(p)))
            .ok_or_else(|| config_err("a corpus is required: pass --corpus or set paths.corpus"))
    }

    fn index_path(&self, flag: &Option<PathBuf>) -> Result<PathBuf> {
        flag.clone()
            .or_else(|| self.cfg.retrieval.index_path.as_ref().map(|p| self.cfg.resolve(p)))
            .ok_or_else(|| config_err("an index is required: pass --index or set retrieval.index_path"))
    }

    fn retriever(&self, args: &RetrievalArgs) -> Result<(Retriever, PathBuf, PathBuf)> {
        let index_path = self.index_path(&args.index)?;
        let corpus_path = self.corpus_path(&args.corpus)?;
        let index = TutorialIndex::load(&index_path).with_context(|| format!("loading {}", index_path.display()))?;
        let docs: Vec<TutorialDoc> = read_jsonl(&corpus_path)?;
        let retriever = Retriever::new(index, self.embedder(&self.cfg.gateway.embedder)?, docs)?;
        Ok((retriever, index_path, corpus_path))
    }
}

fn gateway_failure(name: &str, e: GatewayError) -> anyhow::Error {
    match e {
        GatewayError::Config(m) => config_err(format!("gateway.{name}: {m}")),
        other => anyhow!("gateway.{name}: {other}"),
    }
}

fn run(cli: Cli, args: &[String]) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => load_config(p).map_err(|e| config_err(e.to_string()))?,
        None => RunConfig::default(),
    };
    let snapshot = serde_json::to_value(&cfg).expect("config serializes");
    let ctx = Ctx { cfg, snapshot, args: args.to_vec() };
    match cli.command {
        Command::Corpus(CorpusCmd::Build(a)) => corpus_build(&ctx, a),
        Command::Corpus(CorpusCmd::TrainClassifier(a)) => train(&ctx, a),
        Command::Index(IndexCmd::Build(a)) => index_build(&ctx, a),
        Command::Index(IndexCmd::Query(a)) => index_query(&ctx, a),
        Command::Guide(a) => guide(&ctx, a),
        Command::RunEpisode(a) => episode(&ctx, a),
        Command::BuildSft(a) => sft(&ctx, a),
        Command::BuildRsf(a) => rsf(&ctx, a),
        Command::Bench(a) => bench(&ctx, a),
    }
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("value serializes"));
}

fn parse_input(spec: &str) -> Result<(PathBuf, Source)> {
    if let Some((prefix, path)) = spec.split_once('=') {
        if let Ok(source) = prefix.parse::<Source>() {
            return Ok((PathBuf::from(path), source));
        }
    }
    Ok((PathBuf::from(spec), Source::Custom))
}

fn corpus_build(ctx: &Ctx, a: CorpusBuildArgs) -> Result<()> {
    let inputs = a.inputs.iter().map(|s| parse_input(s)).collect::<Result<Vec<_>>>()?;
    let classifier_path = a
        .classifier
        .clone()
        .or_else(|| ctx.cfg.paths.classifier.as_ref().map(|p| ctx.cfg.resolve(p)))
        .ok_or_else(|| config_err("a classifier is required: pass --classifier or set paths.classifier"))?;
    let classifier = NgramClassifier::load(&classifier_path)?;
    let labeler = ctx.chat("labeler")?;
    let mode = if a.strict { IngestMode::Strict } else { ctx.cfg.corpus.ingest_mode.into() };
    let spec = PipelineSpec {
        inputs: inputs.clone(),
        mode,
        classifier: &classifier,
        dedup: ctx.cfg.dedup(),
        labeler: &labeler,
        label_retries: ctx.cfg.corpus.label_retries,
        output: a.out.clone(),
        stage_dir: a.stage_dir.clone(),
    };
    let run = run_corpus_pipeline(&spec)?;
    let mut m = ctx
        .manifest("corpus build")
        .input(&classifier_path)
        .output(&a.out)
        .count("report", run.report)
        .count("ingest_errors", run.ingest_errors.len())
        .count("degenerate", run.degenerate)
        .count("label_flags", run.label_flags.len());
    for (p, _) in &inputs {
        m = m.input(p);
    }
    if let Some(d) = &a.stage_dir {
        m = m.output(d);
    }
    m.write()?;
    print_json(&run.report);
    Ok(())
}

fn train(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let mode = ctx.cfg.corpus.ingest_mode.into();
    let pos = ingest_corpus(&a.positives, Source::Custom, mode)?.docs;
    let neg = ingest_corpus(&a.negatives, Source::Custom, mode)?.docs;
    let model = train_classifier(&pos, &neg, &ctx.cfg.train_params())?;
    model.save(&a.out)?;
    let correct = pos.iter().filter(|d| model.passes(model.classify_text(&d.text()).score)).count()
        + neg.iter().filter(|d| !model.passes(model.classify_text(&d.text()).score)).count();
    let accuracy = correct as f64 / (pos.len() + neg.len()) as f64;
    ctx.manifest("corpus train-classifier")
        .input(&a.positives)
        .input(&a.negatives)
        .output(&a.out)
        .count("positives", pos.len())
        .count("negatives", neg.len())
        .count("training_accuracy", accuracy)
        .write()?;
    print_json(&serde_json::json!({"positives": pos.len(), "negatives": neg.len(), "training_accuracy": accuracy}));
    Ok(())
}

fn index_build(ctx: &Ctx, a: IndexBuildArgs) -> Result<()> {
    let docs: Vec<TutorialDoc> = read_jsonl(&a.corpus)?;
    let embedder = ctx.embedder(&ctx.cfg.gateway.embedder)?;
    let index = build_index(&docs, embedder.as_ref())?;
    index.save(&a.out)?;
    ctx.manifest("index build")
        .input(&a.corpus)
        .output(&a.out)
        .count("entries", index.len())
        .count("dims", index.dims())
        .count("provider", index.provider_tag())
        .write()?;
    print_json(&serde_json::json!({"entries": index.len(), "dims": index.dims(), "provider": index.provider_tag()}));
    Ok(())
}

fn index_query(ctx: &Ctx, a: IndexQueryArgs) -> Result<()> {
    let path = ctx.index_path(&a.index)?;
    let index = TutorialIndex::load(&path)?;
    let embedder = ctx.embedder(&ctx.cfg.gateway.embedder)?;
    let hits = retrieve_topk(&index, &a.query, a.k.unwrap_or(ctx.cfg.retrieval.k), embedder.as_ref())?;
    print_json(&hits);
    Ok(())
}

fn guide(ctx: &Ctx, a: GuideArgs) -> Result<()> {
    let docs: Vec<TutorialDoc> = read_jsonl(&ctx.corpus_path(&a.corpus)?)?;
    let tutorial =
        docs.into_iter().find(|d| d.id == a.tutorial).ok_or_else(|| anyhow!("tutorial {:?} not in corpus", a.tutorial))?;
    let observation: Observation = match &a.observation {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?).with_context(|| p.display().to_string())?,
        None => Observation::default(),
    };
    let mut task = TaskContext::new(a.goal, observation);
    if let Some(p) = &a.history {
        for (i, line) in std::fs::read_to_string(p)?.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            task.history.push(line.trim().parse().map_err(|e| anyhow!("{}:{}: {e}", p.display(), i + 1))?);
        }
    }
    if !task.is_valid() {
        return Err(anyhow!("goal is empty or element ids repeat"));
    }
    let gw = ctx.chat("guidance_model")?;
    let out = generate_guidance(&gw, &task, &tutorial, a.n, a.temperature)?;
    print_json(&out);
    Ok(())
}

fn pipeline(ctx: &Ctx, mode: Mode, retriever: Option<Retriever>, k: Option<usize>) -> Result<AgentPipeline> {
    let mut p = AgentPipeline::new(mode, ctx.chat("backbone")?);
    p.k = k.unwrap_or(ctx.cfg.retrieval.k);
    p.max_steps = ctx.cfg.agent.max_steps;
    p.max_tutorial_chars = ctx.cfg.agent.max_tutorial_chars;
    if mode == Mode::Guided {
        p.guidance = Some(ctx.chat("guidance_model")?);
    }
    p.retriever = retriever;
    p.validate().map_err(|e| config_err(e.to_string()))?;
    Ok(p)
}

fn episode(ctx: &Ctx, a: RunEpisodeArgs) -> Result<()> {
    let env = ScriptedEnv::from_path(&a.env)?;
    let mode = a.mode.unwrap_or(ctx.cfg.agent.mode);
    let mut m = ctx.manifest("run-episode").input(&a.env);
    let retriever = if mode == Mode::Baseline {
        None
    } else {
        let (r, ip, cp) = ctx.retriever(&a.retrieval)?;
        m = m.input(ip).input(cp);
        Some(r)
    };
    let p = pipeline(ctx, mode, retriever, a.retrieval.k)?;
    let ep = run_episode(&env, &p)?;
    ep.write_trace(&a.out)?;
    m.output(&a.out)
        .output(crate::agent::Episode::sidecar_path(&a.out))
        .count("outcome", ep.outcome())
        .count("steps", ep.steps.len())
        .write()?;
    print_json(&ep.summary);
    Ok(())
}

fn read_seeds(path: &Path) -> Result<Vec<SeedExample>> {
    let seeds: Vec<SeedExample> = read_jsonl(path)?;
    if let Some(s) = seeds.iter().find(|s| !s.context().is_valid()) {
        return Err(anyhow!("seed {:?}: goal is empty or element ids repeat", s.id));
    }
    let mut seen = HashMap::new();
    for s in &seeds {
        if seen.insert(s.id.as_str(), ()).is_some() {
            return Err(anyhow!("duplicate seed id {:?}", s.id));
        }
    }
    Ok(seeds)
}

fn sft(ctx: &Ctx, a: BuildSftArgs) -> Result<()> {
    let seeds = read_seeds(&a.seeds)?;
    let (retriever, ip, cp) = ctx.retriever(&a.retrieval)?;
    let teacher = ctx.chat("teacher")?;
    let k = a.retrieval.k.unwrap_or(ctx.cfg.retrieval.k);
    let stats = build_sft_dataset(&teacher, &seeds, &retriever, k, &a.out)?;
    ctx.manifest("build-sft")
        .input(&a.seeds)
        .input(ip)
        .input(cp)
        .output(&a.out)
        .output(crate::rsf::sft_quarantine_path(&a.out))
        .count("stats", stats)
        .write()?;
    print_json(&stats);
    Ok(())
}

fn rsf(ctx: &Ctx, a: BuildRsfArgs) -> Result<()> {
    let seeds = read_seeds(&a.seeds)?;
    let (retriever, ip, cp) = ctx.retriever(&a.retrieval)?;
    let params = RsfParams {
        k: a.retrieval.k.unwrap_or(ctx.cfg.retrieval.k),
        m: a.m.unwrap_or(ctx.cfg.rsf.m),
        temperature: a.temperature.unwrap_or(ctx.cfg.rsf.temperature),
    };
    if params.m == 0 || params.k == 0 || params.temperature.is_nan() || params.temperature < 0.0 {
        return Err(config_err("k and m must be at least 1 and temperature non-negative"));
    }
    let guidance_model = ctx.chat("guidance_model")?;
    let backbone = ctx.chat("backbone")?;
    let stats = build_rsf_dataset(&guidance_model, &backbone, &seeds, &retriever, params, &a.out, a.report.as_deref())?;
    let mut m = ctx
        .manifest("build-rsf")
        .input(&a.seeds)
        .input(ip)
        .input(cp)
        .output(&a.out)
        .output(crate::rsf::rsf_records_path(&a.out))
        .count("stats", &stats);
    if let Some(r) = &a.report {
        m = m.output(r);
    }
    m.write()?;
    print_json(&stats);
    Ok(())
}

fn bench(ctx: &Ctx, a: BenchArgs) -> Result<()> {
    let suite = load_suite(&a.suite)?;
    let section = |name: &str| -> GatewayConfig {
        suite.gateway(name).unwrap_or_else(|| ctx.cfg.gateway.get(name).expect("known section").clone())
    };
    let mut m = ctx.manifest("bench").input(suite.dir.join("suite.json"));
    let needs_retrieval = a.arms.iter().any(|&arm| arm != Mode::Baseline);
    let retriever = if needs_retrieval {
        let corpus_path = suite
            .corpus_path()
            .or_else(|| ctx.cfg.paths.corpus.as_ref().map(|p| ctx.cfg.resolve(p)))
            .ok_or_else(|| config_err("suite has no corpus and paths.corpus is unset"))?;
        let docs: Vec<TutorialDoc> = read_jsonl(&corpus_path)?;
        let embedder = ctx.embedder(&section("embedder"))?;
        let index = match &a.index {
            Some(p) => {
                m = m.input(p);
                TutorialIndex::load(p)?
            }
            None => build_index(&docs, embedder.as_ref())?,
        };
        m = m.input(corpus_path);
        Some(Retriever::new(index, embedder, docs)?)
    } else {
        None
    };
    let mut p = AgentPipeline::new(a.arms[0], ctx.chat_from("backbone", &section("backbone"))?);
    p.k = a.k.or(suite.spec.k).unwrap_or(ctx.cfg.retrieval.k);
    p.max_steps = suite.spec.max_steps.unwrap_or(ctx.cfg.agent.max_steps);
    p.max_tutorial_chars = ctx.cfg.agent.max_tutorial_chars;
    p.retriever = retriever;
    if a.arms.contains(&Mode::Guided) {
        p.guidance = Some(ctx.chat_from("guidance_model", &section("guidance_model"))?);
    }
    for &arm in &a.arms {
        p.with_mode(arm).validate().map_err(|e| config_err(e.to_string()))?;
    }
    let mut snapshot = ctx.snapshot.clone();
    snapshot["suite"] = serde_json::to_value(&suite.spec).expect("suite serializes");
    let run = run_benchmark(&suite, &a.arms, &p, snapshot)?;
    run.write(&a.out)?;
    let mut counts = serde_json::Map::new();
    for arm in &run.report.arms {
        counts.insert(arm.arm.to_string(), serde_json::to_value(arm.aggregates).expect("aggregates serialize"));
    }
    m.output(&a.out).count("tasks", suite.tasks.len()).count("aggregates", counts).write()?;
    print!("{}", render_table(&run.report));
    Ok(())
}
