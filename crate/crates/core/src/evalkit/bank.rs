use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::Deserialize;

use super::{Disease, DiseaseCategory, Domain, EvalError, EvalQuestion, Persona};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BankMode {
    #[default]
    Lenient,
    /// Additionally require 12 diseases × 10 questions.
    Strict,
}

pub const QUESTIONS_PER_DISEASE: usize = 10;

#[derive(Deserialize)]
struct RawQuestion {
    id: String,
    disease: String,
    #[serde(default)]
    disease_category: Option<String>,
    persona: String,
    domain: String,
    text: String,
}

pub fn parse_question_bank(text: &str, mode: BankMode) -> Result<Vec<EvalQuestion>, EvalError> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawQuestion = serde_json::from_str(line).map_err(|e| EvalError::BadRecord {
            line: i + 1,
            reason: e.to_string(),
        })?;
        let disease: Disease = raw.disease.parse()?;
        if let Some(given) = raw.disease_category {
            let category: DiseaseCategory = given.parse()?;
            if category != disease.category() {
                return Err(EvalError::CategoryMismatch {
                    id: raw.id,
                    given,
                    disease: disease.to_string(),
                });
            }
        }
        if raw.text.trim().is_empty() {
            return Err(EvalError::EmptyQuestion(raw.id));
        }
        if !ids.insert(raw.id.clone()) {
            return Err(EvalError::DuplicateQuestion(raw.id));
        }
        out.push(EvalQuestion {
            id: raw.id,
            disease,
            disease_category: disease.category(),
            persona: raw.persona.parse()?,
            domain: raw.domain.parse()?,
            text: raw.text,
        });
    }

    if mode == BankMode::Strict {
        let mut per_disease: BTreeMap<Disease, usize> = BTreeMap::new();
        for q in &out {
            *per_disease.entry(q.disease).or_default() += 1;
        }
        for d in Disease::ALL {
            let n = per_disease.get(&d).copied().unwrap_or(0);
            if n != QUESTIONS_PER_DISEASE {
                return Err(EvalError::CountMismatch(format!(
                    "{d}: {n} questions, expected {QUESTIONS_PER_DISEASE}"
                )));
            }
        }
    }
    Ok(out)
}

pub fn load_question_bank(path: &Path, mode: BankMode) -> Result<Vec<EvalQuestion>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_question_bank(&text, mode)
}

pub fn render_question_bank(questions: &[EvalQuestion]) -> String {
    let mut out = String::new();
    for q in questions {
        out.push_str(&serde_json::to_string(q).expect("questions serialise"));
        out.push('\n');
    }
    out
}

fn template(persona: Persona, domain: Domain) -> &'static str {
    use Domain::*;
    match (persona, domain) {
        (Persona::Patient, DiseaseDescription) => "I was told I have {d}. What is it and how does it affect my eyes?",
        (Persona::Patient, RiskFactors) => "What makes someone more likely to get {d}? Could I be at risk?",
        (Persona::Patient, Diagnosis) => "Which eye tests will tell me whether I have {d}?",
        (Persona::Patient, TreatmentAndPrevention) => {
            "How is {d} treated, and is there anything I can do to prevent it?"
        }
        (Persona::Patient, Prognosis) => "If I have {d}, will my vision get worse over time?",
        (Persona::MedicalStudent, DiseaseDescription) => {
            "What are the defining clinical features and pathophysiology of {d}?"
        }
        (Persona::MedicalStudent, RiskFactors) => "What are the established risk factors for {d}?",
        (Persona::MedicalStudent, Diagnosis) => "How is {d} diagnosed, and which examinations confirm it?",
        (Persona::MedicalStudent, TreatmentAndPrevention) => {
            "What are the current treatment options and preventive strategies for {d}?"
        }
        (Persona::MedicalStudent, Prognosis) => "What is the typical prognosis of {d} and which factors influence it?",
    }
}

/// The 120-question bank distributed with the crate: for each of the 12
/// diseases, one patient and one medical-student question per domain.
pub fn shipped_question_bank() -> Vec<EvalQuestion> {
    let mut out = Vec::with_capacity(Disease::ALL.len() * QUESTIONS_PER_DISEASE);
    for (di, disease) in Disease::ALL.into_iter().enumerate() {
        let mut n = 0;
        for persona in Persona::ALL {
            for domain in Domain::ALL {
                n += 1;
                out.push(EvalQuestion {
                    id: format!("q{:02}{:02}", di + 1, n),
                    disease,
                    disease_category: disease.category(),
                    persona,
                    domain,
                    text: template(persona, domain).replace("{d}", disease.display_name()),
                });
            }
        }
    }
    out
}
