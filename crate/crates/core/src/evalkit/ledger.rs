use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use chrono::{DateTime, Duration, Utc};
use serde::Serialize;

use super::{BlindAssignment, BlindItem, Dimension, EvalError, PairAssignment, PairItem, PairwiseRecord, RatingRecord};

pub const DEFAULT_WASHOUT_DAYS: i64 = 30;

/// What a rater should do next.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NextItem {
    Blind {
        item: BlindItem,
        remaining: usize,
    },
    Pair {
        item: PairItem,
        /// Dimensions this rater has not yet judged for the pair.
        dimensions: Vec<Dimension>,
        remaining: usize,
    },
    /// Round 2 is locked until the washout ends.
    Waiting {
        until: DateTime<Utc>,
    },
    Done,
}

/// In-memory validation state for one evaluation run. Every accepted record
/// passed the same checks, whether it arrived over HTTP, from an import file
/// or from replaying the run's own store.
#[derive(Debug, Clone)]
pub struct RatingLedger {
    washout: Duration,
    rounds: BTreeMap<u8, BlindAssignment>,
    /// anon_id → round
    item_round: HashMap<String, u8>,
    pairs: Vec<PairItem>,
    pair_raters: BTreeSet<String>,
    ratings: Vec<RatingRecord>,
    pairwise: Vec<PairwiseRecord>,
    rated: HashSet<(String, String)>,
    pair_rated: HashSet<(String, String, Dimension)>,
    /// Latest round-1 rating time per rater.
    round1_last: HashMap<String, DateTime<Utc>>,
}

impl Default for RatingLedger {
    fn default() -> Self {
        Self::new(Duration::days(DEFAULT_WASHOUT_DAYS))
    }
}

impl RatingLedger {
    pub fn new(washout: Duration) -> Self {
        Self {
            washout,
            rounds: BTreeMap::new(),
            item_round: HashMap::new(),
            pairs: Vec::new(),
            pair_raters: BTreeSet::new(),
            ratings: Vec::new(),
            pairwise: Vec::new(),
            rated: HashSet::new(),
            pair_rated: HashSet::new(),
            round1_last: HashMap::new(),
        }
    }

    pub fn washout(&self) -> Duration {
        self.washout
    }

    /// Registers a round's assignment. A round can only be added once and
    /// anon ids must be unique across rounds.
    pub fn add_round(&mut self, assignment: BlindAssignment) -> Result<(), EvalError> {
        let round = super::check_round(assignment.round)?;
        if self.rounds.contains_key(&round) {
            return Err(EvalError::RoundExists(round));
        }
        let mut ids = HashMap::new();
        for item in assignment.raters.values().flatten() {
            if item.round != round {
                return Err(EvalError::InvalidRound(item.round));
            }
            if self.item_round.contains_key(&item.anon_id) {
                return Err(EvalError::DuplicateItem(item.anon_id.clone()));
            }
            ids.insert(item.anon_id.clone(), round);
        }
        self.item_round.extend(ids);
        self.rounds.insert(round, assignment);
        Ok(())
    }

    pub fn set_pairs(&mut self, assignment: PairAssignment, raters: &[String]) {
        self.pairs = assignment.pairs;
        self.pair_raters = raters.iter().cloned().collect();
    }

    pub fn round(&self, round: u8) -> Option<&BlindAssignment> {
        self.rounds.get(&round)
    }

    pub fn pairs(&self) -> &[PairItem] {
        &self.pairs
    }

    pub fn raters(&self) -> BTreeSet<String> {
        let mut all: BTreeSet<String> = self.rounds.values().flat_map(|a| a.raters.keys().cloned()).collect();
        all.extend(self.pair_raters.iter().cloned());
        all
    }

    pub fn ratings(&self) -> &[RatingRecord] {
        &self.ratings
    }

    pub fn pairwise(&self) -> &[PairwiseRecord] {
        &self.pairwise
    }

    fn sheet(&self, round: u8, rater: &str) -> &[BlindItem] {
        self.rounds
            .get(&round)
            .and_then(|a| a.raters.get(rater))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    fn remaining_in(&self, round: u8, rater: &str) -> usize {
        self.sheet(round, rater)
            .iter()
            .filter(|i| !self.rated.contains(&(rater.to_string(), i.anon_id.clone())))
            .count()
    }

    /// When round 2 opens for `rater`, or the reason it cannot open yet.
    fn round2_opens(&self, rater: &str) -> Result<Option<DateTime<Utc>>, EvalError> {
        if self.sheet(1, rater).is_empty() {
            return Ok(None);
        }
        if self.remaining_in(1, rater) > 0 {
            return Err(EvalError::Round1Incomplete {
                rater: rater.to_string(),
            });
        }
        Ok(self.round1_last.get(rater).map(|t| *t + self.washout))
    }

    /// Checks a record without storing it.
    pub fn check_rating(&self, rec: &RatingRecord) -> Result<(), EvalError> {
        rec.scores.validate()?;
        let round = *self
            .item_round
            .get(&rec.anon_id)
            .ok_or_else(|| EvalError::UnknownItem(rec.anon_id.clone()))?;
        if !self.raters().contains(&rec.rater_id) {
            return Err(EvalError::UnknownRater(rec.rater_id.clone()));
        }
        if !self
            .sheet(round, &rec.rater_id)
            .iter()
            .any(|i| i.anon_id == rec.anon_id)
        {
            return Err(EvalError::UnknownItem(rec.anon_id.clone()));
        }
        if self.rated.contains(&(rec.rater_id.clone(), rec.anon_id.clone())) {
            return Err(EvalError::DuplicateRating {
                rater: rec.rater_id.clone(),
                item: rec.anon_id.clone(),
            });
        }
        if round == 2 {
            if let Some(until) = self.round2_opens(&rec.rater_id)? {
                if rec.timestamp < until {
                    return Err(EvalError::WashoutNotElapsed {
                        rater: rec.rater_id.clone(),
                        until,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn record_rating(&mut self, rec: RatingRecord) -> Result<(), EvalError> {
        self.check_rating(&rec)?;
        if self.item_round[&rec.anon_id] == 1 {
            let last = self.round1_last.entry(rec.rater_id.clone()).or_insert(rec.timestamp);
            *last = (*last).max(rec.timestamp);
        }
        self.rated.insert((rec.rater_id.clone(), rec.anon_id.clone()));
        self.ratings.push(rec);
        Ok(())
    }

    pub fn check_pairwise(&self, rec: &PairwiseRecord) -> Result<(), EvalError> {
        if !self.pairs.iter().any(|p| p.pair_id == rec.pair_id) {
            return Err(EvalError::UnknownPair(rec.pair_id.clone()));
        }
        if !self.pair_raters.contains(&rec.rater_id) {
            return Err(EvalError::UnknownRater(rec.rater_id.clone()));
        }
        if self
            .pair_rated
            .contains(&(rec.rater_id.clone(), rec.pair_id.clone(), rec.dimension))
        {
            return Err(EvalError::DuplicateRating {
                rater: rec.rater_id.clone(),
                item: format!("{}/{}", rec.pair_id, rec.dimension),
            });
        }
        Ok(())
    }

    pub fn record_pairwise(&mut self, rec: PairwiseRecord) -> Result<(), EvalError> {
        self.check_pairwise(&rec)?;
        self.pair_rated
            .insert((rec.rater_id.clone(), rec.pair_id.clone(), rec.dimension));
        self.pairwise.push(rec);
        Ok(())
    }

    /// Round 1 items first, then round 2 once the washout has passed at
    /// `now`, then pairwise comparisons.
    pub fn next_item(&self, rater: &str, now: DateTime<Utc>) -> Result<NextItem, EvalError> {
        if !self.raters().contains(rater) {
            return Err(EvalError::UnknownRater(rater.to_string()));
        }
        let unrated = |round: u8| {
            self.sheet(round, rater)
                .iter()
                .find(|i| !self.rated.contains(&(rater.to_string(), i.anon_id.clone())))
        };
        if let Some(item) = unrated(1) {
            return Ok(NextItem::Blind {
                item: item.clone(),
                remaining: self.remaining_in(1, rater),
            });
        }
        if let Some(item) = unrated(2) {
            if let Some(until) = self.round2_opens(rater)? {
                if now < until {
                    return Ok(NextItem::Waiting { until });
                }
            }
            return Ok(NextItem::Blind {
                item: item.clone(),
                remaining: self.remaining_in(2, rater),
            });
        }
        if self.pair_raters.contains(rater) {
            let missing = |p: &PairItem| -> Vec<Dimension> {
                Dimension::ALL
                    .into_iter()
                    .filter(|d| !self.pair_rated.contains(&(rater.to_string(), p.pair_id.clone(), *d)))
                    .collect()
            };
            let open: Vec<(&PairItem, Vec<Dimension>)> = self
                .pairs
                .iter()
                .map(|p| (p, missing(p)))
                .filter(|(_, m)| !m.is_empty())
                .collect();
            if let Some((item, dimensions)) = open.first() {
                return Ok(NextItem::Pair {
                    item: (*item).clone(),
                    dimensions: dimensions.clone(),
                    remaining: open.len(),
                });
            }
        }
        Ok(NextItem::Done)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalkit::{make_blind_assignment, make_pairwise_assignment, AnswerRecord, Choice, Scores};
    use chrono::TimeZone;

    fn answers(variant: &str, n: usize) -> Vec<AnswerRecord> {
        (0..n)
            .map(|i| AnswerRecord {
                question_id: format!("q{i}"),
                variant: variant.into(),
                question: format!("question {i}"),
                answer: format!("answer {i}"),
                citations: vec![],
            })
            .collect()
    }

    fn t(day: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 1, day, 12, 0, 0).unwrap()
    }

    fn rating(rater: &str, id: &str, acc: u8, at: DateTime<Utc>) -> RatingRecord {
        RatingRecord {
            rater_id: rater.into(),
            anon_id: id.into(),
            scores: Scores::new(acc, 4, 4, 4),
            timestamp: at,
        }
    }

    fn ledger_with_rounds() -> RatingLedger {
        let raters = vec!["r1".to_string(), "r2".to_string()];
        let mut ledger = RatingLedger::default();
        ledger
            .add_round(make_blind_assignment(&answers("A", 2), &raters, 1, 1).unwrap().0)
            .unwrap();
        ledger
            .add_round(make_blind_assignment(&answers("B", 2), &raters, 2, 1).unwrap().0)
            .unwrap();
        ledger
    }

    fn ids(ledger: &RatingLedger, round: u8) -> Vec<String> {
        ledger.round(round).unwrap().raters["r1"]
            .iter()
            .map(|i| i.anon_id.clone())
            .collect()
    }

    #[test]
    fn rating_validation() {
        let mut ledger = ledger_with_rounds();
        let id = ids(&ledger, 1)[0].clone();
        ledger.record_rating(rating("r1", &id, 5, t(1))).unwrap();
        assert!(matches!(
            ledger.record_rating(rating("r1", &id, 5, t(1))),
            Err(EvalError::DuplicateRating { .. })
        ));
        assert!(matches!(
            ledger.record_rating(rating("r2", &id, 6, t(1))),
            Err(EvalError::OutOfScale { .. })
        ));
        assert!(matches!(
            ledger.record_rating(rating("r2", "nope", 5, t(1))),
            Err(EvalError::UnknownItem(_))
        ));
        assert!(matches!(
            ledger.record_rating(rating("r9", &id, 5, t(1))),
            Err(EvalError::UnknownRater(_))
        ));
        assert_eq!(ledger.ratings().len(), 1);
    }

    #[test]
    fn washout_gate() {
        let mut ledger = ledger_with_rounds();
        let r1 = ids(&ledger, 1);
        let r2 = ids(&ledger, 2);
        assert!(matches!(
            ledger.record_rating(rating("r1", &r2[0], 4, t(1))),
            Err(EvalError::Round1Incomplete { .. })
        ));
        ledger.record_rating(rating("r1", &r1[0], 4, t(1))).unwrap();
        ledger.record_rating(rating("r1", &r1[1], 4, t(2))).unwrap();
        let until = t(2) + Duration::days(30);
        assert!(matches!(
            ledger.record_rating(rating("r1", &r2[0], 4, t(20))),
            Err(EvalError::WashoutNotElapsed { until: u, .. }) if u == until
        ));
        assert_eq!(ledger.next_item("r1", t(20)).unwrap(), NextItem::Waiting { until });
        assert!(matches!(ledger.next_item("r1", until).unwrap(), NextItem::Blind { .. }));
        ledger.record_rating(rating("r1", &r2[0], 4, until)).unwrap();
    }

    #[test]
    fn zero_washout_override() {
        let raters = vec!["r1".to_string()];
        let mut ledger = RatingLedger::new(Duration::zero());
        ledger
            .add_round(make_blind_assignment(&answers("A", 1), &raters, 1, 1).unwrap().0)
            .unwrap();
        ledger
            .add_round(make_blind_assignment(&answers("B", 1), &raters, 2, 1).unwrap().0)
            .unwrap();
        let a = ledger.round(1).unwrap().raters["r1"][0].anon_id.clone();
        let b = ledger.round(2).unwrap().raters["r1"][0].anon_id.clone();
        ledger.record_rating(rating("r1", &a, 4, t(1))).unwrap();
        ledger.record_rating(rating("r1", &b, 4, t(1))).unwrap();
        assert_eq!(ledger.next_item("r1", t(1)).unwrap(), NextItem::Done);
    }

    #[test]
    fn pairwise_validation() {
        let mut ledger = RatingLedger::default();
        let (pairs, _) = make_pairwise_assignment(&answers("A", 2), &answers("B", 2), 0).unwrap();
        let pid = pairs.pairs[0].pair_id.clone();
        ledger.set_pairs(pairs, &["r1".to_string()]);
        let rec = |pair: &str, d| PairwiseRecord {
            rater_id: "r1".into(),
            pair_id: pair.into(),
            dimension: d,
            choice: Choice::Tie,
            timestamp: t(1),
        };
        ledger.record_pairwise(rec(&pid, Dimension::Accuracy)).unwrap();
        assert!(matches!(
            ledger.record_pairwise(rec(&pid, Dimension::Accuracy)),
            Err(EvalError::DuplicateRating { .. })
        ));
        assert!(matches!(
            ledger.record_pairwise(rec("p-none", Dimension::Accuracy)),
            Err(EvalError::UnknownPair(_))
        ));
        match ledger.next_item("r1", t(1)).unwrap() {
            NextItem::Pair {
                item,
                dimensions,
                remaining,
            } => {
                assert_eq!(item.pair_id, pid);
                assert_eq!(dimensions.len(), 3);
                assert_eq!(remaining, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
