//! Fine-tuning data preparation: keyword filtering, instruction formatting,
//! train/validation splitting and the LoRA hyperparameter manifest consumed
//! by an external trainer.

use std::collections::HashSet;
use std::path::PathBuf;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MCQA_PREFIX: &str = "Answer the multiple choice question: ";

/// Default eye-related vocabulary. A trailing `-` marks a stem that matches
/// any word starting with it.
pub const DEFAULT_KEYWORDS: [&str; 14] = [
    "eye",
    "ocular",
    "ophthalm-",
    "retina",
    "cornea",
    "glaucoma",
    "cataract",
    "myopia",
    "macula",
    "uvea",
    "vitreous",
    "conjunctiv-",
    "strabismus",
    "lens",
];

#[derive(Debug, Error)]
pub enum DataprepError {
    #[error("keyword list is empty")]
    EmptyKeywordList,
    #[error("sample `{0}` has no answer")]
    MissingAnswer(String),
    #[error("sample `{id}`: {reason}")]
    MalformedOptions { id: String, reason: String },
    #[error("sample `{0}` has an empty question")]
    EmptyQuestion(String),
    #[error("validation count {val} must be below the sample count {total}")]
    ValCountTooLarge { val: usize, total: usize },
    #[error("validation count must be positive")]
    ZeroValCount,
    #[error("unknown preset `{0}` (expected finetune1, finetune2, finetune3 or custom)")]
    UnknownPreset(String),
    #[error("custom preset needs an explicit iteration count")]
    MissingIterations,
    #[error("manifest serialisation failed: {0}")]
    Serialize(#[from] toml::ser::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    Dialogue,
    Mcqa,
    Flashcard,
    Other,
}

impl FromStr for SampleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dialogue" => Ok(Self::Dialogue),
            "mcqa" => Ok(Self::Mcqa),
            "flashcard" => Ok(Self::Flashcard),
            "other" => Ok(Self::Other),
            other => Err(format!("unknown sample kind `{other}`")),
        }
    }
}

/// Correct option, given either as a 0-based index or a letter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CorrectOption {
    Index(usize),
    Letter(String),
}

impl CorrectOption {
    fn index(&self) -> Option<usize> {
        match self {
            Self::Index(i) => Some(*i),
            Self::Letter(l) => {
                let mut chars = l.trim().chars();
                let c = chars.next()?.to_ascii_uppercase();
                (chars.next().is_none() && c.is_ascii_uppercase()).then(|| (c as u8 - b'A') as usize)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSample {
    #[serde(default)]
    pub id: String,
    #[serde(default)]
    pub source: String,
    pub kind: SampleKind,
    #[serde(alias = "instruction")]
    pub question: String,
    #[serde(default)]
    pub input: String,
    #[serde(default, alias = "output")]
    pub answer: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<CorrectOption>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionSample {
    pub instruction: String,
    pub input: String,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Keyword {
    Word(String),
    Stem(String),
    Phrase(Vec<String>),
}

/// Compiled keyword list for [`filter_eye_related`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordSet {
    keywords: Vec<Keyword>,
}

impl KeywordSet {
    pub fn new<I, S>(terms: I) -> Result<Self, DataprepError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let keywords: Vec<Keyword> = terms
            .into_iter()
            .filter_map(|t| {
                let t = t.as_ref().trim().to_lowercase();
                if t.is_empty() {
                    None
                } else if let Some(stem) = t.strip_suffix('-') {
                    Some(Keyword::Stem(stem.to_string()))
                } else if t.contains(char::is_whitespace) {
                    Some(Keyword::Phrase(t.split_whitespace().map(str::to_string).collect()))
                } else {
                    Some(Keyword::Word(t))
                }
            })
            .collect();
        if keywords.is_empty() {
            return Err(DataprepError::EmptyKeywordList);
        }
        Ok(Self { keywords })
    }

    pub fn default_eye() -> Self {
        Self::new(DEFAULT_KEYWORDS).expect("default keywords are non-empty")
    }

    pub fn matches(&self, text: &str) -> bool {
        let words = words(text);
        self.keywords.iter().any(|kw| match kw {
            Keyword::Word(w) => words.iter().any(|x| x == w),
            Keyword::Stem(s) => words.iter().any(|x| x.starts_with(s.as_str())),
            Keyword::Phrase(p) => words.windows(p.len()).any(|w| w == p.as_slice()),
        })
    }
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Keeps samples whose question or answer mentions a keyword, in input order.
pub fn filter_eye_related(samples: &[RawSample], keywords: &KeywordSet) -> Vec<RawSample> {
    samples
        .iter()
        .filter(|s| keywords.matches(&s.question) || keywords.matches(&s.answer))
        .cloned()
        .collect()
}

/// Drops manually rejected samples by id.
pub fn apply_exclusions(samples: Vec<RawSample>, excluded: &HashSet<String>) -> Vec<RawSample> {
    samples.into_iter().filter(|s| !excluded.contains(&s.id)).collect()
}

fn option_letter(i: usize) -> char {
    (b'A' + i as u8) as char
}

pub fn to_instruction_format(sample: &RawSample) -> Result<InstructionSample, DataprepError> {
    let question = sample.question.trim();
    if question.is_empty() {
        return Err(DataprepError::EmptyQuestion(sample.id.clone()));
    }
    match sample.kind {
        SampleKind::Mcqa => {
            if sample.options.len() < 2 {
                return Err(DataprepError::MalformedOptions {
                    id: sample.id.clone(),
                    reason: format!("{} option(s), need at least 2", sample.options.len()),
                });
            }
            if sample.options.len() > 26 {
                return Err(DataprepError::MalformedOptions {
                    id: sample.id.clone(),
                    reason: "more than 26 options".into(),
                });
            }
            let correct = sample
                .correct
                .as_ref()
                .and_then(CorrectOption::index)
                .or_else(|| CorrectOption::Letter(sample.answer.clone()).index())
                .ok_or_else(|| DataprepError::MissingAnswer(sample.id.clone()))?;
            let answer = sample
                .options
                .get(correct)
                .ok_or_else(|| DataprepError::MissingAnswer(sample.id.clone()))?;
            let rendered: Vec<String> = sample
                .options
                .iter()
                .enumerate()
                .map(|(i, o)| format!("{}) {}", option_letter(i), o.trim()))
                .collect();
            Ok(InstructionSample {
                instruction: format!("{MCQA_PREFIX}{question}\n{}", rendered.join(" ")),
                input: sample.input.clone(),
                output: format!("{}) {}", option_letter(correct), answer.trim()),
            })
        }
        SampleKind::Dialogue | SampleKind::Flashcard | SampleKind::Other => {
            if sample.answer.trim().is_empty() {
                return Err(DataprepError::MissingAnswer(sample.id.clone()));
            }
            Ok(InstructionSample {
                instruction: sample.question.clone(),
                input: sample.input.clone(),
                output: sample.answer.clone(),
            })
        }
    }
}

/// Seeded shuffle, then the first `val_count` items become the validation set.
pub fn split_train_val<T: Clone>(
    samples: &[T],
    val_count: usize,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>), DataprepError> {
    if val_count == 0 {
        return Err(DataprepError::ZeroValCount);
    }
    if val_count >= samples.len() {
        return Err(DataprepError::ValCountTooLarge {
            val: val_count,
            total: samples.len(),
        });
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let val = order[..val_count].iter().map(|&i| samples[i].clone()).collect();
    let train = order[val_count..].iter().map(|&i| samples[i].clone()).collect();
    Ok((train, val))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Finetune1,
    Finetune2,
    Finetune3,
    Custom,
}

impl Preset {
    pub fn iterations(self) -> Option<u32> {
        match self {
            Self::Finetune1 => Some(2_000),
            Self::Finetune2 => Some(3_500),
            Self::Finetune3 => Some(10_000),
            Self::Custom => None,
        }
    }
}

impl FromStr for Preset {
    type Err = DataprepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace([' ', '_', '-'], "").as_str() {
            "finetune1" => Ok(Self::Finetune1),
            "finetune2" => Ok(Self::Finetune2),
            "finetune3" | "bestfinetune" => Ok(Self::Finetune3),
            "custom" => Ok(Self::Custom),
            _ => Err(DataprepError::UnknownPreset(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainManifest {
    pub preset: String,
    pub base_model: String,
    pub train_file: PathBuf,
    pub val_file: PathBuf,
    pub iterations: u32,
    pub batch_size: u32,
    pub learning_rate: f64,
    pub max_seq_len: u32,
    pub warmup_ratio: f64,
    pub lora_rank: u32,
    pub lora_alpha: u32,
    pub lora_dropout: f64,
}

pub const DEFAULT_BASE_MODEL: &str = "meta-llama/Llama-2-7b-chat-hf";

pub fn build_manifest(
    preset: &str,
    base_model: &str,
    train_file: PathBuf,
    val_file: PathBuf,
    iterations: Option<u32>,
) -> Result<TrainManifest, DataprepError> {
    let parsed: Preset = preset.parse()?;
    let iterations = match (parsed.iterations(), iterations) {
        (_, Some(n)) if parsed == Preset::Custom => n,
        (Some(n), _) => n,
        (None, _) => return Err(DataprepError::MissingIterations),
    };
    Ok(TrainManifest {
        preset: preset.to_string(),
        base_model: base_model.to_string(),
        train_file,
        val_file,
        iterations,
        batch_size: 24,
        learning_rate: 0.00003,
        max_seq_len: 512,
        warmup_ratio: 0.03,
        lora_rank: 8,
        lora_alpha: 16,
        lora_dropout: 0.05,
    })
}

impl TrainManifest {
    pub fn to_toml(&self) -> Result<String, DataprepError> {
        Ok(toml::to_string(self)?)
    }
}

/// Parses line-delimited samples, stamping the declared source and kind.
pub fn parse_samples(text: &str, source: &str, kind: SampleKind) -> Result<Vec<RawSample>, serde_json::Error> {
    #[derive(Deserialize)]
    struct Loose {
        #[serde(default)]
        id: Option<String>,
        #[serde(alias = "instruction")]
        question: String,
        #[serde(default)]
        input: String,
        #[serde(default, alias = "output")]
        answer: String,
        #[serde(default)]
        options: Vec<String>,
        #[serde(default)]
        correct: Option<CorrectOption>,
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let l: Loose = serde_json::from_str(line)?;
            Ok(RawSample {
                id: l.id.unwrap_or_else(|| format!("{source}:{}", i + 1)),
                source: source.to_string(),
                kind,
                question: l.question,
                input: l.input,
                answer: l.answer,
                options: l.options,
                correct: l.correct,
            })
        })
        .collect()
}
