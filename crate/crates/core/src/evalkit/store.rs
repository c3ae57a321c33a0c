use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    make_blind_assignment, make_pairwise_assignment, parse_question_bank, render_question_bank, AnswerRecord, BankMode,
    BlindAssignment, EvalError, EvalQuestion, NextItem, PairAssignment, PairItem, PairSealEntry, PairwiseRecord,
    RatingLedger, RatingRecord, SealEntry,
};

/// First line of every seal file.
pub const SEAL_HEADER: &str = "# SEALED: provenance map linking anonymous ids to variants. Never show to raters.";

/// File names inside a run directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunLayout {
    pub root: PathBuf,
}

impl RunLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("run.json")
    }

    pub fn questions(&self) -> PathBuf {
        self.root.join("questions.jsonl")
    }

    pub fn assignment(&self, round: u8) -> PathBuf {
        self.root.join(format!("assignment_round{round}.json"))
    }

    pub fn pairs(&self) -> PathBuf {
        self.root.join("pairs.json")
    }

    pub fn sealed_dir(&self) -> PathBuf {
        self.root.join("sealed")
    }

    pub fn seal(&self, round: u8) -> PathBuf {
        self.sealed_dir().join(format!("independent_round{round}.jsonl"))
    }

    pub fn pair_seal(&self) -> PathBuf {
        self.sealed_dir().join("pairwise.jsonl")
    }

    pub fn ratings(&self) -> PathBuf {
        self.root.join("ratings.jsonl")
    }

    pub fn pairwise(&self) -> PathBuf {
        self.root.join("pairwise.jsonl")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub raters: Vec<String>,
    pub washout_days: i64,
}

/// An evaluation run persisted under one directory. Rating and pairwise
/// stores are append-only JSONL; seals live in their own subdirectory.
#[derive(Debug)]
pub struct EvalRun {
    layout: RunLayout,
    config: RunConfig,
    ledger: RatingLedger,
    seal: Vec<SealEntry>,
    pair_seal: Vec<PairSealEntry>,
    questions: Vec<EvalQuestion>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn malformed(path: &Path, reason: impl ToString) -> EvalError {
    EvalError::Malformed {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

fn write_new(path: &Path, contents: &str) -> Result<(), EvalError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut f = OpenOptions::new()
        .write(true)
        .create_new(true)
        .open(path)
        .map_err(io_err(path))?;
    f.write_all(contents.as_bytes()).map_err(io_err(path))?;
    f.sync_all().map_err(io_err(path))
}

fn append_line<T: Serialize>(path: &Path, record: &T) -> Result<(), EvalError> {
    let mut line = serde_json::to_string(record).map_err(|e| malformed(path, e))?;
    line.push('\n');
    let mut f = OpenOptions::new()
        .append(true)
        .create(true)
        .open(path)
        .map_err(io_err(path))?;
    f.write_all(line.as_bytes()).map_err(io_err(path))?;
    f.sync_data().map_err(io_err(path))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<Option<T>, EvalError> {
    match fs::read_to_string(path) {
        Ok(text) => serde_json::from_str(&text).map(Some).map_err(|e| malformed(path, e)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(io_err(path)(e)),
    }
}

/// JSONL reader that skips blank lines and `#` comment lines.
fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, EvalError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| malformed(path, format!("line {}: {e}", i + 1))))
        .collect()
}

fn render_sealed<T: Serialize>(entries: &[T]) -> String {
    let mut out = format!("{SEAL_HEADER}\n");
    for e in entries {
        out.push_str(&serde_json::to_string(e).expect("seal entries serialise"));
        out.push('\n');
    }
    out
}

impl EvalRun {
    /// Starts a new run directory. Fails if one already exists there.
    pub fn create(root: impl Into<PathBuf>, config: RunConfig) -> Result<Self, EvalError> {
        if config.raters.is_empty() {
            return Err(EvalError::NoRaters);
        }
        let layout = RunLayout::new(root);
        let body = serde_json::to_string_pretty(&config).expect("config serialises") + "\n";
        write_new(&layout.config(), &body)?;
        Ok(Self {
            ledger: RatingLedger::new(Duration::days(config.washout_days)),
            layout,
            config,
            seal: Vec::new(),
            pair_seal: Vec::new(),
            questions: Vec::new(),
        })
    }

    /// Loads a run and replays its stores through the ledger, so a store
    /// that was edited into an invalid state is rejected on open.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, EvalError> {
        let layout = RunLayout::new(root);
        let config: RunConfig = read_json(&layout.config())?
            .ok_or_else(|| malformed(&layout.config(), "not an evaluation run (run.json missing)"))?;
        let mut ledger = RatingLedger::new(Duration::days(config.washout_days));
        let mut seal = Vec::new();
        for round in [1, 2] {
            if let Some(assignment) = read_json::<BlindAssignment>(&layout.assignment(round))? {
                ledger.add_round(assignment)?;
                seal.extend(read_jsonl::<SealEntry>(&layout.seal(round))?);
            }
        }
        if let Some(pairs) = read_json::<PairAssignment>(&layout.pairs())? {
            ledger.set_pairs(pairs, &config.raters);
        }
        let pair_seal = read_jsonl(&layout.pair_seal())?;
        let questions = match fs::read_to_string(layout.questions()) {
            Ok(text) => parse_question_bank(&text, BankMode::Lenient)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(io_err(&layout.questions())(e)),
        };
        let ratings_path = layout.ratings();
        for rec in read_jsonl::<RatingRecord>(&ratings_path)? {
            ledger.record_rating(rec).map_err(|e| malformed(&ratings_path, e))?;
        }
        let pairwise_path = layout.pairwise();
        for rec in read_jsonl::<PairwiseRecord>(&pairwise_path)? {
            ledger.record_pairwise(rec).map_err(|e| malformed(&pairwise_path, e))?;
        }
        Ok(Self {
            layout,
            config,
            ledger,
            seal,
            pair_seal,
            questions,
        })
    }

    pub fn layout(&self) -> &RunLayout {
        &self.layout
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn ledger(&self) -> &RatingLedger {
        &self.ledger
    }

    pub fn seal(&self) -> &[SealEntry] {
        &self.seal
    }

    pub fn pair_seal(&self) -> &[PairSealEntry] {
        &self.pair_seal
    }

    pub fn questions(&self) -> &[EvalQuestion] {
        &self.questions
    }

    /// Copies question metadata into the run for subgroup reporting.
    pub fn set_questions(&mut self, questions: Vec<EvalQuestion>) -> Result<(), EvalError> {
        write_new(&self.layout.questions(), &render_question_bank(&questions))?;
        self.questions = questions;
        Ok(())
    }

    pub fn assign_round(
        &mut self,
        answers: &[AnswerRecord],
        round: u8,
        seed: u64,
    ) -> Result<&BlindAssignment, EvalError> {
        if self.ledger.round(round).is_some() {
            return Err(EvalError::RoundExists(round));
        }
        let (assignment, seal) = make_blind_assignment(answers, &self.config.raters, round, seed)?;
        let public = serde_json::to_string_pretty(&assignment).expect("assignment serialises") + "\n";
        self.ledger.add_round(assignment)?;
        write_new(&self.layout.seal(round), &render_sealed(&seal))?;
        write_new(&self.layout.assignment(round), &public)?;
        self.seal.extend(seal);
        Ok(self.ledger.round(round).expect("just added"))
    }

    pub fn assign_pairwise(
        &mut self,
        source1: &[AnswerRecord],
        source2: &[AnswerRecord],
        seed: u64,
    ) -> Result<&[PairItem], EvalError> {
        if !self.ledger.pairs().is_empty() {
            return Err(EvalError::PairsExist);
        }
        let (pairs, seal) = make_pairwise_assignment(source1, source2, seed)?;
        write_new(&self.layout.pair_seal(), &render_sealed(&seal))?;
        write_new(
            &self.layout.pairs(),
            &(serde_json::to_string_pretty(&pairs).expect("pairs serialise") + "\n"),
        )?;
        self.ledger.set_pairs(pairs, &self.config.raters);
        self.pair_seal = seal;
        Ok(self.ledger.pairs())
    }

    /// Validates, persists, then admits the record. Nothing is written when
    /// validation fails.
    pub fn record_rating(&mut self, rec: RatingRecord) -> Result<(), EvalError> {
        self.ledger.check_rating(&rec)?;
        append_line(&self.layout.ratings(), &rec)?;
        self.ledger.record_rating(rec)
    }

    pub fn record_pairwise(&mut self, rec: PairwiseRecord) -> Result<(), EvalError> {
        self.ledger.check_pairwise(&rec)?;
        append_line(&self.layout.pairwise(), &rec)?;
        self.ledger.record_pairwise(rec)
    }

    pub fn next_item(&self, rater: &str, now: DateTime<Utc>) -> Result<NextItem, EvalError> {
        self.ledger.next_item(rater, now)
    }
}
