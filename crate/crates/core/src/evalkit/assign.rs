use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_round, AnswerRecord, EvalError, Winner};

/// What a rater sees: the question and an answer, nothing else.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlindItem {
    pub anon_id: String,
    pub round: u8,
    pub question: String,
    pub answer: String,
}

/// Links an anonymous item back to its provenance. Never shown to raters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SealEntry {
    pub anon_id: String,
    pub round: u8,
    pub variant: String,
    pub question_id: String,
}

/// Per-rater shuffled item lists for one round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlindAssignment {
    pub round: u8,
    pub raters: BTreeMap<String, Vec<BlindItem>>,
}

impl BlindAssignment {
    pub fn contains(&self, anon_id: &str) -> bool {
        self.raters.values().flatten().any(|i| i.anon_id == anon_id)
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn fresh_token(rng: &mut ChaCha8Rng, prefix: &str, taken: &mut HashSet<String>) -> String {
    loop {
        let token = format!("{prefix}{:016x}", rng.random::<u64>());
        if taken.insert(token.clone()) {
            return token;
        }
    }
}

/// Every answer goes to every rater exactly once, in an independent seeded
/// order per rater. Returns the rater-facing assignment and its seal.
pub fn make_blind_assignment(
    answers: &[AnswerRecord],
    raters: &[String],
    round: u8,
    seed: u64,
) -> Result<(BlindAssignment, Vec<SealEntry>), EvalError> {
    let round = check_round(round)?;
    if answers.is_empty() {
        return Err(EvalError::NoAnswers);
    }
    let raters: BTreeSet<&String> = raters.iter().filter(|r| !r.trim().is_empty()).collect();
    if raters.is_empty() {
        return Err(EvalError::NoRaters);
    }

    let mut rng = rng_for(seed, u64::from(round));
    let mut taken = HashSet::new();
    let ids: Vec<String> = answers.iter().map(|_| fresh_token(&mut rng, "i", &mut taken)).collect();
    let seal = answers
        .iter()
        .zip(&ids)
        .map(|(a, id)| SealEntry {
            anon_id: id.clone(),
            round,
            variant: a.variant.clone(),
            question_id: a.question_id.clone(),
        })
        .collect();

    let mut sheets = BTreeMap::new();
    for rater in raters {
        let mut order: Vec<usize> = (0..answers.len()).collect();
        order.shuffle(&mut rng);
        let items = order
            .into_iter()
            .map(|i| BlindItem {
                anon_id: ids[i].clone(),
                round,
                question: answers[i].question.clone(),
                answer: answers[i].answer.clone(),
            })
            .collect();
        sheets.insert(rater.clone(), items);
    }
    Ok((BlindAssignment { round, raters: sheets }, seal))
}

/// Two unlabeled responses to the same question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairItem {
    pub pair_id: String,
    pub question: String,
    pub response_a: String,
    pub response_b: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSealEntry {
    pub pair_id: String,
    pub question_id: String,
    pub source1: String,
    pub source2: String,
    /// Which source is displayed as response A.
    pub a_is: Winner,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairAssignment {
    pub pairs: Vec<PairItem>,
}

/// One pair per question, presented in seeded order with a seeded coin
/// deciding which source is shown as A.
pub fn make_pairwise_assignment(
    source1: &[AnswerRecord],
    source2: &[AnswerRecord],
    seed: u64,
) -> Result<(PairAssignment, Vec<PairSealEntry>), EvalError> {
    let index = |records: &[AnswerRecord]| -> Result<BTreeMap<String, AnswerRecord>, EvalError> {
        let mut map = BTreeMap::new();
        for r in records {
            if map.insert(r.question_id.clone(), r.clone()).is_some() {
                return Err(EvalError::QuestionSetMismatch(format!(
                    "question `{}` appears twice in one source",
                    r.question_id
                )));
            }
        }
        Ok(map)
    };
    let first = index(source1)?;
    let second = index(source2)?;
    if first.is_empty() {
        return Err(EvalError::NoAnswers);
    }
    if first.keys().ne(second.keys()) {
        let only1: Vec<_> = first.keys().filter(|k| !second.contains_key(*k)).collect();
        let only2: Vec<_> = second.keys().filter(|k| !first.contains_key(*k)).collect();
        return Err(EvalError::QuestionSetMismatch(format!(
            "only in source 1: {only1:?}; only in source 2: {only2:?}"
        )));
    }

    let mut rng = rng_for(seed, 3);
    let mut taken = HashSet::new();
    let mut keys: Vec<&String> = first.keys().collect();
    keys.shuffle(&mut rng);

    let mut pairs = Vec::with_capacity(keys.len());
    let mut seal = Vec::with_capacity(keys.len());
    for qid in keys {
        let (one, two) = (&first[qid], &second[qid]);
        let pair_id = fresh_token(&mut rng, "p", &mut taken);
        let a_is = if rng.random_bool(0.5) {
            Winner::Source1
        } else {
            Winner::Source2
        };
        let (a, b) = if a_is == Winner::Source1 {
            (one, two)
        } else {
            (two, one)
        };
        pairs.push(PairItem {
            pair_id: pair_id.clone(),
            question: one.question.clone(),
            response_a: a.answer.clone(),
            response_b: b.answer.clone(),
        });
        seal.push(PairSealEntry {
            pair_id,
            question_id: qid.clone(),
            source1: one.variant.clone(),
            source2: two.variant.clone(),
            a_is,
        });
    }
    Ok((PairAssignment { pairs }, seal))
}
