use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{Choice, Dimension, EvalError, PairSealEntry, PairwiseRecord, RatingRecord, SealEntry, Winner};

/// Two-rater means for one answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedResponse {
    pub anon_id: String,
    pub round: u8,
    pub question_id: String,
    pub variant: String,
    pub accuracy: f64,
    pub understandability: f64,
    pub trustworthiness: f64,
    pub empathy: f64,
    pub total: f64,
    pub hallucination: bool,
}

impl AggregatedResponse {
    pub fn mean(&self, d: Dimension) -> f64 {
        match d {
            Dimension::Accuracy => self.accuracy,
            Dimension::Understandability => self.understandability,
            Dimension::Trustworthiness => self.trustworthiness,
            Dimension::Empathy => self.empathy,
        }
    }
}

/// Accuracy below this mean counts as a hallucination.
pub const HALLUCINATION_THRESHOLD: f64 = 4.0;

/// Averages the two raters' scores for every sealed item, in seal order.
pub fn aggregate_independent(
    ratings: &[RatingRecord],
    seal: &[SealEntry],
) -> Result<Vec<AggregatedResponse>, EvalError> {
    let mut by_item: HashMap<&str, Vec<&RatingRecord>> = HashMap::new();
    for r in ratings {
        by_item.entry(r.anon_id.as_str()).or_default().push(r);
    }
    let sealed: BTreeSet<&str> = seal.iter().map(|s| s.anon_id.as_str()).collect();
    if let Some(stray) = by_item.keys().find(|id| !sealed.contains(*id)) {
        return Err(EvalError::UnknownItem(stray.to_string()));
    }

    let mut out = Vec::with_capacity(seal.len());
    for entry in seal {
        let recs = by_item.get(entry.anon_id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        let raters: BTreeSet<&str> = recs.iter().map(|r| r.rater_id.as_str()).collect();
        if recs.len() != 2 || raters.len() != 2 {
            return Err(EvalError::MissingRater(entry.anon_id.clone()));
        }
        let mean = |d: Dimension| recs.iter().map(|r| f64::from(r.scores.get(d))).sum::<f64>() / 2.0;
        let [accuracy, understandability, trustworthiness, empathy] = Dimension::ALL.map(mean);
        out.push(AggregatedResponse {
            anon_id: entry.anon_id.clone(),
            round: entry.round,
            question_id: entry.question_id.clone(),
            variant: entry.variant.clone(),
            accuracy,
            understandability,
            trustworthiness,
            empathy,
            total: accuracy + understandability + trustworthiness + empathy,
            hallucination: accuracy < HALLUCINATION_THRESHOLD,
        });
    }
    Ok(out)
}

/// A side wins only when both raters picked it; anything else is a tie.
pub fn both_agree(first: Choice, second: Choice, a_is: Winner) -> Winner {
    let b_is = match a_is {
        Winner::Source1 => Winner::Source2,
        Winner::Source2 => Winner::Source1,
        Winner::Tie => return Winner::Tie,
    };
    match (first, second) {
        (Choice::A, Choice::A) => a_is,
        (Choice::B, Choice::B) => b_is,
        _ => Winner::Tie,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionCounts {
    pub source1_wins: usize,
    pub source2_wins: usize,
    pub ties: usize,
}

impl DimensionCounts {
    pub fn total(&self) -> usize {
        self.source1_wins + self.source2_wins + self.ties
    }

    fn add(&mut self, w: Winner) {
        match w {
            Winner::Source1 => self.source1_wins += 1,
            Winner::Source2 => self.source2_wins += 1,
            Winner::Tie => self.ties += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub pair_id: String,
    pub question_id: String,
    pub dimension: Dimension,
    pub winner: Winner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseSummary {
    pub source1: String,
    pub source2: String,
    pub counts: BTreeMap<Dimension, DimensionCounts>,
    pub verdicts: Vec<PairVerdict>,
}

/// Applies the both-agree rule per pair and per rated dimension. Every pair
/// must carry exactly two raters' choices for each dimension that appears
/// anywhere in `records`.
pub fn aggregate_pairwise(records: &[PairwiseRecord], seal: &[PairSealEntry]) -> Result<PairwiseSummary, EvalError> {
    let sealed: HashMap<&str, &PairSealEntry> = seal.iter().map(|s| (s.pair_id.as_str(), s)).collect();
    let mut grouped: HashMap<(&str, Dimension), Vec<&PairwiseRecord>> = HashMap::new();
    let mut dimensions = BTreeSet::new();
    for r in records {
        if !sealed.contains_key(r.pair_id.as_str()) {
            return Err(EvalError::UnknownPair(r.pair_id.clone()));
        }
        dimensions.insert(r.dimension);
        grouped.entry((r.pair_id.as_str(), r.dimension)).or_default().push(r);
    }

    let mut counts: BTreeMap<Dimension, DimensionCounts> = BTreeMap::new();
    let mut verdicts = Vec::new();
    for entry in seal {
        for &d in &dimensions {
            let recs = grouped
                .get(&(entry.pair_id.as_str(), d))
                .map(Vec::as_slice)
                .unwrap_or(&[]);
            let raters: BTreeSet<&str> = recs.iter().map(|r| r.rater_id.as_str()).collect();
            if recs.len() != 2 || raters.len() != 2 {
                return Err(EvalError::MissingRater(entry.pair_id.clone()));
            }
            let winner = both_agree(recs[0].choice, recs[1].choice, entry.a_is);
            counts.entry(d).or_default().add(winner);
            verdicts.push(PairVerdict {
                pair_id: entry.pair_id.clone(),
                question_id: entry.question_id.clone(),
                dimension: d,
                winner,
            });
        }
    }
    let (source1, source2) = seal
        .first()
        .map(|s| (s.source1.clone(), s.source2.clone()))
        .unwrap_or_default();
    Ok(PairwiseSummary {
        source1,
        source2,
        counts,
        verdicts,
    })
}
