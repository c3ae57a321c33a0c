//! The `eyeqa` command line.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::Utc;
use clap::{ArgAction, Args, Parser, Subcommand};
use eyeqa_core::corpus::{chunk_corpus, load_corpus, CorpusKind, LoadOptions, DEFAULT_CHUNK_SIZE, DEFAULT_OVERLAP};
use eyeqa_core::dataprep::{
    apply_exclusions, build_manifest, filter_eye_related, parse_samples, split_train_val, to_instruction_format,
    KeywordSet, RawSample, SampleKind, DEFAULT_BASE_MODEL,
};
use eyeqa_core::evalkit::{load_question_bank, shipped_question_bank, BankMode, EvalRun, Persona};
use eyeqa_core::report::{build_report, ReportInput, ReportOptions};
use eyeqa_core::{Chunk, SplitterConfig};
use eyeqa_engine::batch::{collect_answers, read_answers};
use eyeqa_engine::{Engine, EngineOptions, Gateway, Retriever};

use crate::config::{AppConfig, CONFIG_ENV};
use crate::eval::{open_or_create, summarize, PairwiseSubmission, RatingSubmission};

#[derive(Debug, Parser)]
#[command(
    name = "eyeqa",
    version,
    about = "Ophthalmology question answering: indexing, chat, evaluation"
)]
pub struct Cli {
    /// Config file; mock backends are used when absent.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a corpus and write its chunks as JSON lines.
    Ingest(IngestArgs),
    /// Embed a corpus and write a vector index plus its chunk sidecar.
    Index(IndexArgs),
    /// Talk to one variant in the terminal.
    Chat(ChatArgs),
    /// Answer a question bank with one or more variants; resumable.
    BatchAnswer(BatchArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Fine-tuning data preparation.
    #[command(subcommand)]
    Dataprep(DataprepCommand),
    /// Blind evaluation runs.
    #[command(subcommand)]
    Eval(EvalCommand),
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long, default_value_t = DEFAULT_CHUNK_SIZE)]
    pub chunk_size: usize,
    #[arg(long, default_value_t = DEFAULT_OVERLAP)]
    pub overlap: usize,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// text, database or jsonl.
    #[arg(long, default_value = "text")]
    pub kind: CorpusKind,
    /// Skip unreadable files instead of failing.
    #[arg(long)]
    pub lenient: bool,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(long, required_unless_present = "chunks", conflicts_with = "chunks")]
    pub corpus: Option<PathBuf>,
    /// Chunks written by `ingest`, instead of a corpus.
    #[arg(long)]
    pub chunks: Option<PathBuf>,
    #[arg(long, default_value = "text")]
    pub kind: CorpusKind,
    #[arg(long)]
    pub lenient: bool,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ChatArgs {
    #[arg(long, default_value = "Best-finetune+book")]
    pub variant: String,
    /// patient or medical_student.
    #[arg(long, default_value = "patient", value_parser = parse_persona)]
    pub persona: Persona,
    /// Ask these and exit instead of reading stdin.
    #[arg(long = "question")]
    pub questions: Vec<String>,
    /// Write the conversation as JSON lines on exit.
    #[arg(long)]
    pub export: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    /// Question bank as JSON lines; the shipped bank when absent.
    #[arg(long)]
    pub questions: Option<PathBuf>,
    /// Require the full 12 × 10 bank.
    #[arg(long)]
    pub strict: bool,
    /// Comma-separated variant names; every configured variant when absent.
    #[arg(long, value_delimiter = ',')]
    pub variants: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub bind: Option<String>,
    #[arg(long)]
    pub eval_root: Option<PathBuf>,
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum DataprepCommand {
    /// Keep eye-related samples of one source.
    Filter {
        #[arg(long)]
        input: PathBuf,
        /// Source name stamped on every sample.
        #[arg(long)]
        source: String,
        /// dialogue, mcqa, flashcard or other.
        #[arg(long)]
        kind: SampleKind,
        /// Keyword file, one term per line; the built-in list when absent.
        #[arg(long)]
        keywords: Option<PathBuf>,
        /// Sample ids to drop, one per line.
        #[arg(long)]
        exclude: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert filtered samples to instruction/input/output records.
    Format {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Seeded train/validation split of a JSON-lines file.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        val_count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        val_out: PathBuf,
    },
    /// Write a training manifest for a preset.
    Manifest {
        /// finetune1, finetune2, finetune3 or custom.
        #[arg(long)]
        preset: String,
        #[arg(long, default_value = DEFAULT_BASE_MODEL)]
        base_model: String,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[arg(long)]
        iterations: Option<u32>,
        /// Standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Create a run if needed, then assign a blind round or pairwise set.
    Assign(AssignArgs),
    /// Validate and append ratings from a JSON-lines file. All or nothing.
    ImportRatings {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        file: PathBuf,
        /// Lines are pairwise choices rather than scale ratings.
        #[arg(long)]
        pairwise: bool,
    },
    /// Print the statistics report of a run.
    Report {
        #[arg(long)]
        store: PathBuf,
        /// text or json.
        #[arg(long, default_value = "text")]
        format: String,
        /// ROUND=VARIANT, the comparison baseline of a round.
        #[arg(long, value_parser = parse_baseline)]
        baseline: Vec<(u8, String)>,
    },
}

#[derive(Debug, Args)]
pub struct AssignArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// Needed only when the run is created.
    #[arg(long, value_delimiter = ',')]
    pub raters: Vec<String>,
    #[arg(long)]
    pub washout_days: Option<i64>,
    /// Question bank to record with the run.
    #[arg(long)]
    pub questions: Option<PathBuf>,
    /// Answers to blind, e.g. a `batch-answer` output file.
    #[arg(long, required_unless_present = "source1", conflicts_with_all = ["source1", "source2"])]
    pub answers: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub round: u8,
    /// Restrict `--answers` to these variants.
    #[arg(long, value_delimiter = ',')]
    pub variants: Vec<String>,
    /// First source of a pairwise comparison.
    #[arg(long, requires = "source2")]
    pub source1: Option<PathBuf>,
    #[arg(long, requires = "source1")]
    pub source2: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_persona(s: &str) -> Result<Persona, String> {
    serde_json::from_value(serde_json::Value::String(
        s.replace([' ', '-'], "_").to_ascii_lowercase(),
    ))
    .map_err(|_| format!("persona must be patient or medical_student, got `{s}`"))
}

fn parse_baseline(s: &str) -> Result<(u8, String), String> {
    let (round, variant) = s.split_once('=').ok_or("expected ROUND=VARIANT")?;
    let round = round.trim().parse().map_err(|_| format!("bad round `{round}`"))?;
    Ok((round, variant.trim().to_string()))
}

/// Runs one parsed command line.
pub async fn run(cli: Cli) -> Result<()> {
    let cfg = || AppConfig::resolve(cli.config.as_deref()).context("loading config");
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Index(a) => index(a, &cfg()?).await,
        Command::Chat(a) => chat(a, &cfg()?).await,
        Command::BatchAnswer(a) => batch_answer(a, &cfg()?).await,
        Command::Serve(a) => {
            let mut cfg = cfg()?;
            if let Some(b) = a.bind {
                cfg.server.bind = b;
            }
            if let Some(d) = a.eval_root {
                cfg.server.eval_root = d;
            }
            if let Some(d) = a.ui_dir {
                cfg.server.ui_dir = d;
            }
            crate::api::serve(cfg).await
        }
        Command::Dataprep(c) => dataprep(c),
        Command::Eval(c) => eval(c),
    }
}

fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), i + 1)))
        .collect()
}

fn read_list(path: &Path) -> Result<Vec<String>> {
    Ok(fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

fn load_chunks(corpus: &Path, kind: CorpusKind, lenient: bool, split: &SplitArgs) -> Result<(usize, Vec<Chunk>)> {
    let loaded = load_corpus(corpus, kind, LoadOptions { lenient })?;
    for (path, why) in &loaded.skipped {
        tracing::warn!(path = %path.display(), "skipped: {why}");
    }
    let splitter = SplitterConfig::new(split.chunk_size, split.overlap)?;
    Ok((loaded.documents.len(), chunk_corpus(&loaded.documents, &splitter)))
}

fn ingest(a: IngestArgs) -> Result<()> {
    let (docs, chunks) = load_chunks(&a.corpus, a.kind, a.lenient, &a.split)?;
    write_jsonl(&a.out, &chunks)?;
    println!("{docs} documents, {} chunks -> {}", chunks.len(), a.out.display());
    Ok(())
}

fn embedder(cfg: &AppConfig) -> Result<Gateway> {
    let name = &cfg.registry.chain.embedder;
    let backend = cfg
        .registry
        .backends
        .get(name)
        .with_context(|| format!("embedder backend `{name}` is not configured"))?;
    Ok(Gateway::new(backend.clone())?)
}

async fn index(a: IndexArgs, cfg: &AppConfig) -> Result<()> {
    let chunks: Vec<Chunk> = match (&a.chunks, &a.corpus) {
        (Some(path), _) => read_jsonl(path)?,
        (None, Some(corpus)) => load_chunks(corpus, a.kind, a.lenient, &a.split)?.1,
        (None, None) => bail!("either --corpus or --chunks is required"),
    };
    let retriever = Retriever::build(&chunks, &embedder(cfg)?).await?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    retriever.save(&a.out)?;
    println!(
        "{} chunks, dim {} -> {}",
        retriever.index().len(),
        retriever.index().dim(),
        a.out.display()
    );
    Ok(())
}

fn engine(cfg: &AppConfig) -> Result<Engine> {
    let opts = EngineOptions {
        transcript_dir: cfg.server.transcript_dir.clone(),
        require_indexes: false,
    };
    if let Some(dir) = &opts.transcript_dir {
        fs::create_dir_all(dir)?;
    }
    Ok(Engine::from_registry(cfg.registry.clone(), &opts)?)
}

async fn chat(a: ChatArgs, cfg: &AppConfig) -> Result<()> {
    let engine = engine(cfg)?;
    let mut session = engine.new_session(&a.variant, a.persona)?;
    let mut stdout = std::io::stdout();

    if !a.questions.is_empty() {
        for q in a.questions {
            let answer = engine.answer(&mut session, &q).await?;
            print_answer(&mut stdout, &answer)?;
        }
    } else {
        eprintln!("{} ({}); empty line or ctrl-d to quit", a.variant, a.persona);
        let stdin = std::io::stdin();
        loop {
            eprint!("> ");
            let mut line = String::new();
            if stdin.lock().read_line(&mut line)? == 0 || line.trim().is_empty() {
                break;
            }
            match engine.answer(&mut session, line.trim()).await {
                Ok(answer) => print_answer(&mut stdout, &answer)?,
                Err(e) => eprintln!("error: {e}"),
            }
        }
    }
    if let Some(path) = a.export {
        fs::write(&path, session.export_jsonl()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn print_answer(out: &mut impl Write, a: &eyeqa_engine::Answer) -> Result<()> {
    writeln!(out, "{}", a.text)?;
    if !a.cited_chunks.is_empty() {
        writeln!(out, "\nSources:")?;
        for c in &a.cited_chunks {
            writeln!(out, "  [{}] {} ({:.3})", c.rank, c.chunk_id, c.score)?;
        }
    }
    writeln!(out)?;
    Ok(())
}

async fn batch_answer(a: BatchArgs, cfg: &AppConfig) -> Result<()> {
    let mode = if a.strict { BankMode::Strict } else { BankMode::Lenient };
    let questions = match &a.questions {
        Some(p) => load_question_bank(p, mode)?,
        None => shipped_question_bank(),
    };
    let engine = engine(cfg)?;
    let variants = if a.variants.is_empty() {
        engine
            .registry()
            .variant_names()
            .into_iter()
            .map(String::from)
            .collect()
    } else {
        a.variants
    };
    let s = collect_answers(&engine, &variants, &questions, &a.out).await?;
    println!(
        "answered {}, already present {}, failed {} -> {}",
        s.answered,
        s.skipped,
        s.failed,
        a.out.display()
    );
    if s.failed > 0 {
        bail!("{} answers failed; rerun the same command to retry them", s.failed);
    }
    Ok(())
}

fn dataprep(c: DataprepCommand) -> Result<()> {
    match c {
        DataprepCommand::Filter {
            input,
            source,
            kind,
            keywords,
            exclude,
            out,
        } => {
            let text = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let samples =
                parse_samples(&text, &source, kind).with_context(|| format!("parsing {}", input.display()))?;
            let keywords = match keywords {
                Some(p) => KeywordSet::new(read_list(&p)?)?,
                None => KeywordSet::default_eye(),
            };
            let mut kept = filter_eye_related(&samples, &keywords);
            if let Some(p) = exclude {
                let ids: HashSet<String> = read_list(&p)?.into_iter().collect();
                kept = apply_exclusions(kept, &ids);
            }
            write_jsonl(&out, &kept)?;
            println!("kept {} of {} -> {}", kept.len(), samples.len(), out.display());
        }
        DataprepCommand::Format { input, out } => {
            let samples: Vec<RawSample> = read_jsonl(&input)?;
            let formatted = samples
                .iter()
                .map(to_instruction_format)
                .collect::<Result<Vec<_>, _>>()?;
            write_jsonl(&out, &formatted)?;
            println!("{} samples -> {}", formatted.len(), out.display());
        }
        DataprepCommand::Split {
            input,
            val_count,
            seed,
            train_out,
            val_out,
        } => {
            let rows: Vec<serde_json::Value> = read_jsonl(&input)?;
            let (train, val) = split_train_val(&rows, val_count, seed)?;
            write_jsonl(&train_out, &train)?;
            write_jsonl(&val_out, &val)?;
            println!("train {}, val {}", train.len(), val.len());
        }
        DataprepCommand::Manifest {
            preset,
            base_model,
            train,
            val,
            iterations,
            out,
        } => {
            let toml = build_manifest(&preset, &base_model, train, val, iterations)?.to_toml()?;
            match out {
                Some(p) => fs::write(&p, toml).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{toml}"),
            }
        }
    }
    Ok(())
}

fn eval(c: EvalCommand) -> Result<()> {
    match c {
        EvalCommand::Assign(a) => assign(a),
        EvalCommand::ImportRatings { store, file, pairwise } => import(&store, &file, pairwise),
        EvalCommand::Report {
            store,
            format,
            baseline,
        } => {
            let run = EvalRun::open(&store)?;
            let opts = ReportOptions {
                baselines: baseline.into_iter().collect::<BTreeMap<_, _>>(),
            };
            let report = build_report(&ReportInput::from_run(&run), &opts)?;
            match format.as_str() {
                "text" => print!("{}", report.render_text()),
                "json" => println!("{}", serde_json::to_string_pretty(&report)?),
                other => bail!("unknown format `{other}` (text or json)"),
            }
            Ok(())
        }
    }
}

fn store_name(store: &Path) -> String {
    store
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| store.display().to_string())
}

fn assign(a: AssignArgs) -> Result<()> {
    let (mut run, created) = open_or_create(&a.store, &a.raters, a.washout_days)?;
    if !created && !a.raters.is_empty() && a.raters != run.config().raters {
        bail!(
            "{} already exists with raters {:?}",
            a.store.display(),
            run.config().raters
        );
    }
    if let Some(p) = &a.questions {
        run.set_questions(load_question_bank(p, BankMode::Lenient)?)?;
    }
    if let (Some(s1), Some(s2)) = (&a.source1, &a.source2) {
        run.assign_pairwise(&read_answers(s1)?, &read_answers(s2)?, a.seed)?;
    } else if let Some(p) = &a.answers {
        let mut answers = read_answers(p)?;
        if !a.variants.is_empty() {
            answers.retain(|r| a.variants.contains(&r.variant));
        }
        run.assign_round(&answers, a.round, a.seed)?;
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&summarize(&store_name(&a.store), &run))?
    );
    Ok(())
}

fn import(store: &Path, file: &Path, pairwise: bool) -> Result<()> {
    let mut run = EvalRun::open(store)?;
    let now = Utc::now();
    // dry run on a copy of the ledger so a bad line leaves the store untouched
    let mut probe = run.ledger().clone();
    let n = if pairwise {
        let subs: Vec<PairwiseSubmission> = read_jsonl(file)?;
        let recs: Vec<_> = subs.into_iter().map(|s| s.into_record(now)).collect();
        for (i, r) in recs.iter().enumerate() {
            probe
                .record_pairwise(r.clone())
                .with_context(|| format!("record {}", i + 1))?;
        }
        for r in &recs {
            run.record_pairwise(r.clone())?;
        }
        recs.len()
    } else {
        let subs: Vec<RatingSubmission> = read_jsonl(file)?;
        let recs: Vec<_> = subs.into_iter().map(|s| s.into_record(now)).collect();
        for (i, r) in recs.iter().enumerate() {
            probe
                .record_rating(r.clone())
                .with_context(|| format!("record {}", i + 1))?;
        }
        for r in &recs {
            run.record_rating(r.clone())?;
        }
        recs.len()
    };
    println!(
        "imported {n} {} into {}",
        if pairwise { "pairwise choices" } else { "ratings" },
        store.display()
    );
    Ok(())
}
