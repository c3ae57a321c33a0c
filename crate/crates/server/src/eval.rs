//! Evaluation runs as the service and the CLI see them.
//!
//! Submissions use one schema on both paths. Over HTTP the `session` field
//! names the run and the server clock stamps the record; the CLI import keeps
//! the file's timestamps so ratings collected on printed forms can be transcribed later.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use eyeqa_core::evalkit::{
    AnswerRecord, Choice, Dimension, EvalError, EvalQuestion, EvalRun, PairwiseRecord, RatingRecord, RunConfig,
    RunLayout, Scores, DEFAULT_WASHOUT_DAYS,
};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingSubmission {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
    pub rater_id: String,
    pub anon_id: String,
    pub scores: Scores,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<DateTime<Utc>>,
}

impl RatingSubmission {
    pub fn into_record(self, fallback: DateTime<Utc>) -> RatingRecord {
        RatingRecord {
            rater_id: self.rater_id,
            anon_id: self.anon_id,
            scores: self.scores,
            timestamp: self.timestamp.unwrap_or(fallback),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairwiseSubmission {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
    pub rater_id: String,
    pub pair_id: String,
    pub dimension: Dimension,
    pub choice: Choice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<DateTime<Utc>>,
}

impl PairwiseSubmission {
    pub fn into_record(self, fallback: DateTime<Utc>) -> PairwiseRecord {
        PairwiseRecord {
            rater_id: self.rater_id,
            pair_id: self.pair_id,
            dimension: self.dimension,
            choice: self.choice,
            timestamp: self.timestamp.unwrap_or(fallback),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundRequest {
    pub round: u8,
    #[serde(default)]
    pub seed: u64,
    pub answers: Vec<AnswerRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairRequest {
    #[serde(default)]
    pub seed: u64,
    pub source1: Vec<AnswerRecord>,
    pub source2: Vec<AnswerRecord>,
}

/// Body of `POST /eval/sessions`. Creates the run when it does not exist,
/// then applies whichever assignment steps are present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRunRequest {
    pub id: String,
    #[serde(default)]
    pub raters: Vec<String>,
    #[serde(default)]
    pub washout_days: Option<i64>,
    #[serde(default)]
    pub questions: Option<Vec<EvalQuestion>>,
    #[serde(default)]
    pub assign: Option<RoundRequest>,
    #[serde(default)]
    pub pairwise: Option<PairRequest>,
}

/// What anyone may learn about a run. Carries no variant names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub id: String,
    pub raters: Vec<String>,
    pub washout_days: i64,
    /// Items per rater, by round.
    pub rounds: BTreeMap<u8, BTreeMap<String, usize>>,
    pub pairs: usize,
    pub ratings: usize,
    pub pairwise_records: usize,
}

pub fn summarize(id: &str, run: &EvalRun) -> RunSummary {
    let ledger = run.ledger();
    let rounds = [1u8, 2]
        .into_iter()
        .filter_map(|r| {
            ledger
                .round(r)
                .map(|a| (r, a.raters.iter().map(|(k, v)| (k.clone(), v.len())).collect()))
        })
        .collect();
    RunSummary {
        id: id.to_string(),
        raters: run.config().raters.clone(),
        washout_days: run.config().washout_days,
        rounds,
        pairs: ledger.pairs().len(),
        ratings: ledger.ratings().len(),
        pairwise_records: ledger.pairwise().len(),
    }
}

/// Run ids become directory names, so only a safe alphabet is allowed.
pub fn valid_run_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

/// Opens `root` as an existing run or creates it from `raters`.
pub fn open_or_create(root: &Path, raters: &[String], washout_days: Option<i64>) -> Result<(EvalRun, bool), EvalError> {
    if RunLayout::new(root).config().exists() {
        return Ok((EvalRun::open(root)?, false));
    }
    let cfg = RunConfig {
        raters: raters.to_vec(),
        washout_days: washout_days.unwrap_or(DEFAULT_WASHOUT_DAYS),
    };
    Ok((EvalRun::create(root, cfg)?, true))
}

/// Applies one create-or-extend request to an open run.
pub fn apply_request(run: &mut EvalRun, req: &CreateRunRequest) -> Result<(), ApiError> {
    if !req.raters.is_empty() && req.raters != run.config().raters {
        return Err(ApiError::new(
            axum::http::StatusCode::CONFLICT,
            "run_exists",
            format!("run `{}` exists with a different rater list", req.id),
        ));
    }
    if let Some(q) = &req.questions {
        run.set_questions(q.clone())?;
    }
    if let Some(a) = &req.assign {
        run.assign_round(&a.answers, a.round, a.seed)?;
    }
    if let Some(p) = &req.pairwise {
        run.assign_pairwise(&p.source1, &p.source2, p.seed)?;
    }
    Ok(())
}

/// Open runs, each behind its own lock so writes to one store serialize.
#[derive(Debug)]
pub struct Runs {
    root: PathBuf,
    open: Mutex<HashMap<String, Arc<Mutex<EvalRun>>>>,
}

impl Runs {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            open: Mutex::new(HashMap::new()),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn check_id(id: &str) -> Result<(), ApiError> {
        if valid_run_id(id) {
            Ok(())
        } else {
            Err(ApiError::invalid(
                "invalid_session_id",
                format!("`{id}` is not a valid run id"),
            ))
        }
    }

    pub fn get(&self, id: &str) -> Result<Arc<Mutex<EvalRun>>, ApiError> {
        Self::check_id(id)?;
        let mut open = self.open.lock().expect("run table poisoned");
        if let Some(run) = open.get(id) {
            return Ok(run.clone());
        }
        let dir = self.root.join(id);
        if !RunLayout::new(&dir).config().exists() {
            return Err(ApiError::not_found(
                "eval_session_not_found",
                format!("no evaluation session `{id}`"),
            ));
        }
        let run = Arc::new(Mutex::new(EvalRun::open(&dir)?));
        open.insert(id.to_string(), run.clone());
        Ok(run)
    }

    /// Returns the summary and whether the run was newly created.
    pub fn create(&self, req: &CreateRunRequest) -> Result<(RunSummary, bool), ApiError> {
        Self::check_id(&req.id)?;
        let run = match self.get(&req.id) {
            Ok(run) => run,
            Err(e) if e.status == 404 => {
                let (run, _) = open_or_create(&self.root.join(&req.id), &req.raters, req.washout_days)?;
                let run = Arc::new(Mutex::new(run));
                self.open
                    .lock()
                    .expect("run table poisoned")
                    .insert(req.id.clone(), run.clone());
                let mut guard = run.lock().expect("run poisoned");
                apply_request(&mut guard, req)?;
                return Ok((summarize(&req.id, &guard), true));
            }
            Err(e) => return Err(e),
        };
        let mut guard = run.lock().expect("run poisoned");
        apply_request(&mut guard, req)?;
        Ok((summarize(&req.id, &guard), false))
    }
}
