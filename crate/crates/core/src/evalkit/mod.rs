//! Blind human evaluation: question taxonomy, shuffled assignments with a
//! sealed provenance map, independent 1–5 scoring on four dimensions, and
//! pairwise A/B/tie ranking with the both-raters-agree rule.

mod aggregate;
mod assign;
mod bank;
mod ledger;
mod store;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use aggregate::{
    aggregate_independent, aggregate_pairwise, both_agree, AggregatedResponse, DimensionCounts, PairVerdict,
    PairwiseSummary,
};
pub use assign::{
    make_blind_assignment, make_pairwise_assignment, BlindAssignment, BlindItem, PairAssignment, PairItem,
    PairSealEntry, SealEntry,
};
pub use bank::{load_question_bank, parse_question_bank, render_question_bank, shipped_question_bank, BankMode};
pub use ledger::{NextItem, RatingLedger, DEFAULT_WASHOUT_DAYS};
pub use store::{EvalRun, RunConfig, RunLayout, SEAL_HEADER};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("unknown disease `{0}`")]
    UnknownDisease(String),
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("unknown dimension `{0}`")]
    UnknownDimension(String),
    #[error("unknown persona `{0}`")]
    UnknownPersona(String),
    #[error("question `{id}`: category {given} does not match disease {disease}")]
    CategoryMismatch { id: String, given: String, disease: String },
    #[error("question bank count mismatch: {0}")]
    CountMismatch(String),
    #[error("duplicate question id `{0}`")]
    DuplicateQuestion(String),
    #[error("question `{0}` has empty text")]
    EmptyQuestion(String),
    #[error("line {line}: {reason}")]
    BadRecord { line: usize, reason: String },
    #[error("round must be 1 or 2, got {0}")]
    InvalidRound(u8),
    #[error("round {0} is already assigned")]
    RoundExists(u8),
    #[error("pairwise comparisons are already assigned")]
    PairsExist,
    #[error("item id `{0}` is assigned twice")]
    DuplicateItem(String),
    #[error("no answers to assign")]
    NoAnswers,
    #[error("no raters given")]
    NoRaters,
    #[error("{dimension} score {value} is outside 1..=5")]
    OutOfScale { dimension: Dimension, value: u8 },
    #[error("rater `{rater}` already rated `{item}`")]
    DuplicateRating { rater: String, item: String },
    #[error("unknown item `{0}`")]
    UnknownItem(String),
    #[error("unknown pair `{0}`")]
    UnknownPair(String),
    #[error("unknown rater `{0}`")]
    UnknownRater(String),
    #[error("rater `{rater}` has not finished round 1")]
    Round1Incomplete { rater: String },
    #[error("washout for rater `{rater}` ends at {until}")]
    WashoutNotElapsed {
        rater: String,
        until: chrono::DateTime<chrono::Utc>,
    },
    #[error("item `{0}` does not have exactly two raters")]
    MissingRater(String),
    #[error("source answer sets cover different questions: {0}")]
    QuestionSetMismatch(String),
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("malformed record in {path}: {reason}")]
    Malformed { path: std::path::PathBuf, reason: String },
}

macro_rules! string_enum {
    ($name:ident, $err:ident, { $($variant:ident => $text:literal $(| $alias:literal)*),+ $(,)? }) => {
        impl $name {
            pub fn as_str(self) -> &'static str {
                match self { $(Self::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = EvalError;

            fn from_str(s: &str) -> Result<Self, EvalError> {
                let key = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
                match key.as_str() {
                    $($text $(| $alias)* => Ok(Self::$variant),)+
                    _ => Err(EvalError::$err(s.to_string())),
                }
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

/// Who is asking: the role the user plays in the conversation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Persona {
    Patient,
    MedicalStudent,
}

string_enum!(Persona, UnknownPersona, {
    Patient => "patient" | "patients",
    MedicalStudent => "medical_student" | "student" | "medical_students",
});

impl Persona {
    pub const ALL: [Persona; 2] = [Persona::Patient, Persona::MedicalStudent];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DiseaseCategory {
    Common,
    Specialty,
    Rare,
}

string_enum!(DiseaseCategory, UnknownDisease, {
    Common => "common",
    Specialty => "specialty",
    Rare => "rare",
});

impl DiseaseCategory {
    pub const ALL: [DiseaseCategory; 3] = [Self::Common, Self::Specialty, Self::Rare];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Disease {
    Myopia,
    Glaucoma,
    Cataract,
    DiabeticRetinopathy,
    ChoroidalNeovascularization,
    CentralSerousChorioretinopathy,
    RetinalDetachment,
    RetinalVeinOcclusion,
    BestDisease,
    MorningGlorySyndrome,
    LeberHereditaryOpticNeuropathy,
    SticklerSyndrome,
}

string_enum!(Disease, UnknownDisease, {
    Myopia => "myopia",
    Glaucoma => "glaucoma",
    Cataract => "cataract",
    DiabeticRetinopathy => "diabetic_retinopathy",
    ChoroidalNeovascularization => "choroidal_neovascularization",
    CentralSerousChorioretinopathy => "central_serous_chorioretinopathy",
    RetinalDetachment => "retinal_detachment",
    RetinalVeinOcclusion => "retinal_vein_occlusion",
    BestDisease => "best's_disease" | "best_disease" | "bests_disease",
    MorningGlorySyndrome => "morning_glory_syndrome",
    LeberHereditaryOpticNeuropathy => "leber_hereditary_optic_neuropathy",
    SticklerSyndrome => "stickler_syndrome",
});

impl Disease {
    pub const ALL: [Disease; 12] = [
        Self::Myopia,
        Self::Glaucoma,
        Self::Cataract,
        Self::DiabeticRetinopathy,
        Self::ChoroidalNeovascularization,
        Self::CentralSerousChorioretinopathy,
        Self::RetinalDetachment,
        Self::RetinalVeinOcclusion,
        Self::BestDisease,
        Self::MorningGlorySyndrome,
        Self::LeberHereditaryOpticNeuropathy,
        Self::SticklerSyndrome,
    ];

    pub fn category(self) -> DiseaseCategory {
        use Disease::*;
        match self {
            Myopia | Glaucoma | Cataract | DiabeticRetinopathy | ChoroidalNeovascularization => DiseaseCategory::Common,
            CentralSerousChorioretinopathy | RetinalDetachment | RetinalVeinOcclusion | BestDisease => {
                DiseaseCategory::Specialty
            }
            MorningGlorySyndrome | LeberHereditaryOpticNeuropathy | SticklerSyndrome => DiseaseCategory::Rare,
        }
    }

    /// Human-readable name as used in question text.
    pub fn display_name(self) -> &'static str {
        use Disease::*;
        match self {
            Myopia => "myopia",
            Glaucoma => "glaucoma",
            Cataract => "cataract",
            DiabeticRetinopathy => "diabetic retinopathy",
            ChoroidalNeovascularization => "choroidal neovascularization",
            CentralSerousChorioretinopathy => "central serous chorioretinopathy",
            RetinalDetachment => "retinal detachment",
            RetinalVeinOcclusion => "retinal vein occlusion",
            BestDisease => "Best's disease",
            MorningGlorySyndrome => "morning glory syndrome",
            LeberHereditaryOpticNeuropathy => "Leber hereditary optic neuropathy",
            SticklerSyndrome => "Stickler syndrome",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Domain {
    DiseaseDescription,
    RiskFactors,
    Diagnosis,
    TreatmentAndPrevention,
    Prognosis,
}

string_enum!(Domain, UnknownDomain, {
    DiseaseDescription => "disease_description",
    RiskFactors => "risk_factors",
    Diagnosis => "diagnosis",
    TreatmentAndPrevention => "treatment_and_prevention",
    Prognosis => "prognosis",
});

impl Domain {
    pub const ALL: [Domain; 5] = [
        Self::DiseaseDescription,
        Self::RiskFactors,
        Self::Diagnosis,
        Self::TreatmentAndPrevention,
        Self::Prognosis,
    ];
}

/// Rating dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dimension {
    Accuracy,
    Understandability,
    Trustworthiness,
    Empathy,
}

string_enum!(Dimension, UnknownDimension, {
    Accuracy => "accuracy",
    Understandability => "understandability",
    Trustworthiness => "trustworthiness",
    Empathy => "empathy",
});

impl Dimension {
    pub const ALL: [Dimension; 4] = [
        Self::Accuracy,
        Self::Understandability,
        Self::Trustworthiness,
        Self::Empathy,
    ];

    pub fn title(self) -> &'static str {
        match self {
            Self::Accuracy => "Accuracy",
            Self::Understandability => "Understandability",
            Self::Trustworthiness => "Trustworthiness",
            Self::Empathy => "Empathy",
        }
    }
}

/// Scale anchors shown to raters, 1 through 5.
pub const SCALE_ANCHORS: [&str; 5] = ["Strongly disagree", "Disagree", "Neutral", "Agree", "Strongly agree"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalQuestion {
    pub id: String,
    pub disease: Disease,
    pub disease_category: DiseaseCategory,
    pub persona: Persona,
    pub domain: Domain,
    pub text: String,
}

/// One 1–5 score per dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scores {
    pub accuracy: u8,
    pub understandability: u8,
    pub trustworthiness: u8,
    pub empathy: u8,
}

impl Scores {
    pub fn new(accuracy: u8, understandability: u8, trustworthiness: u8, empathy: u8) -> Self {
        Self {
            accuracy,
            understandability,
            trustworthiness,
            empathy,
        }
    }

    pub fn get(&self, d: Dimension) -> u8 {
        match d {
            Dimension::Accuracy => self.accuracy,
            Dimension::Understandability => self.understandability,
            Dimension::Trustworthiness => self.trustworthiness,
            Dimension::Empathy => self.empathy,
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        for d in Dimension::ALL {
            let value = self.get(d);
            if !(1..=5).contains(&value) {
                return Err(EvalError::OutOfScale { dimension: d, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub rater_id: String,
    pub anon_id: String,
    pub scores: Scores,
    pub timestamp: chrono::DateTime<chrono::Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    A,
    B,
    Tie,
}

impl FromStr for Choice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(Self::A),
            "b" => Ok(Self::B),
            "tie" => Ok(Self::Tie),
            other => Err(format!("choice must be A, B or tie, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseRecord {
    pub rater_id: String,
    pub pair_id: String,
    pub dimension: Dimension,
    pub choice: Choice,
    pub timestamp: chrono::DateTime<chrono::Utc>,
}

/// Which of the two compared sources won a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    Source1,
    Source2,
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitedChunk {
    pub chunk_id: String,
    pub score: f64,
}

/// A generated (or human-written) answer to one evaluation question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub question_id: String,
    pub variant: String,
    pub question: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub citations: Vec<CitedChunk>,
}

fn check_round(round: u8) -> Result<u8, EvalError> {
    if matches!(round, 1 | 2) {
        Ok(round)
    } else {
        Err(EvalError::InvalidRound(round))
    }
}
