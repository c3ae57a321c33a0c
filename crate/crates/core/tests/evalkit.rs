use chrono::{DateTime, Duration, TimeZone, Utc};
use eyeqa_core::evalkit::{
    aggregate_independent, aggregate_pairwise, both_agree, make_blind_assignment, make_pairwise_assignment,
    AnswerRecord, Choice, Dimension, EvalError, EvalRun, NextItem, PairSealEntry, PairwiseRecord, RatingLedger,
    RatingRecord, RunConfig, Scores, SealEntry, Winner,
};
use eyeqa_core::stats::chi_square_goodness_of_fit;
use proptest::prelude::*;

const VARIANTS: [&str; 9] = [
    "Original",
    "Role-play",
    "Finetune1",
    "Finetune2",
    "Finetune3",
    "Role-play+database",
    "Role-play+book",
    "Best-finetune+database",
    "Best-finetune+book",
];

fn answers(variant: &str, n: usize) -> Vec<AnswerRecord> {
    (0..n)
        .map(|i| AnswerRecord {
            question_id: format!("q{i:03}"),
            variant: variant.into(),
            question: format!("What helps with symptom number {i}?"),
            answer: format!("Answer text {i}: rest and follow-up."),
            citations: vec![],
        })
        .collect()
}

fn all_variant_answers(n: usize) -> Vec<AnswerRecord> {
    VARIANTS.iter().flat_map(|v| answers(v, n)).collect()
}

fn raters() -> Vec<String> {
    vec!["r1".into(), "r2".into()]
}

fn at(day: i64) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 3, 1, 9, 0, 0).unwrap() + Duration::days(day)
}

fn contains_variant_name(payload: &str) -> Option<&'static str> {
    let lower = payload.to_lowercase();
    [
        "original",
        "role-play",
        "finetune",
        "database",
        "book",
        "doctor",
        "eyegpt",
    ]
    .into_iter()
    .find(|v| lower.contains(v))
}

#[test]
fn blind_payloads_never_name_variants() {
    let (assignment, seal) = make_blind_assignment(&all_variant_answers(5), &raters(), 1, 17).unwrap();
    let payload = serde_json::to_string(&assignment).unwrap();
    assert_eq!(contains_variant_name(&payload), None);
    for items in assignment.raters.values() {
        for item in items {
            let json = serde_json::to_string(item).unwrap();
            assert_eq!(contains_variant_name(&json), None, "{json}");
            assert!(seal.iter().any(|s| s.anon_id == item.anon_id));
        }
    }
    // the seal is the only place provenance lives
    assert!(serde_json::to_string(&seal).unwrap().contains("Best-finetune+book"));

    let (pairs, _) = make_pairwise_assignment(&answers("EyeGPT", 8), &answers("Doctor", 8), 3).unwrap();
    assert_eq!(contains_variant_name(&serde_json::to_string(&pairs).unwrap()), None);
}

#[test]
fn positions_are_uniform_over_seeds() {
    let n = 6;
    let answers = answers("X", n);
    let mut counts = vec![vec![0.0; n]; n];
    for seed in 0..2000 {
        let (assignment, seal) = make_blind_assignment(&answers, &raters(), 1, seed).unwrap();
        for (pos, item) in assignment.raters["r1"].iter().enumerate() {
            let source = seal.iter().position(|s| s.anon_id == item.anon_id).unwrap();
            counts[source][pos] += 1.0;
        }
    }
    let uniform = vec![1.0 / n as f64; n];
    for (source, row) in counts.iter().enumerate() {
        let gof = chi_square_goodness_of_fit(row, &uniform).unwrap();
        let p = gof.p_value.unwrap();
        assert!(
            p > 0.001,
            "answer {source}: chi2 {} p {p} counts {row:?}",
            gof.statistic
        );
    }
}

#[test]
fn pairwise_side_is_a_fair_coin() {
    let mut a_is_first = 0usize;
    let mut total = 0usize;
    for seed in 0..200 {
        let (_, seal) = make_pairwise_assignment(&answers("EyeGPT", 20), &answers("Doctor", 20), seed).unwrap();
        a_is_first += seal.iter().filter(|s| s.a_is == Winner::Source1).count();
        total += seal.len();
    }
    let freq = a_is_first as f64 / total as f64;
    assert!((freq - 0.5).abs() < 0.03, "{freq}");
}

/// Maps a displayed choice back to the source it names.
fn named_source(choice: Choice, a_is: Winner) -> Option<Winner> {
    match (choice, a_is) {
        (Choice::Tie, _) => None,
        (Choice::A, side) => Some(side),
        (Choice::B, Winner::Source1) => Some(Winner::Source2),
        (Choice::B, _) => Some(Winner::Source1),
    }
}

#[test]
fn both_agree_truth_table() {
    let choices = [Choice::A, Choice::B, Choice::Tie];
    let mut cases = 0;
    for a_is in [Winner::Source1, Winner::Source2] {
        for c1 in choices {
            for c2 in choices {
                let want = match (named_source(c1, a_is), named_source(c2, a_is)) {
                    (Some(x), Some(y)) if x == y => x,
                    _ => Winner::Tie,
                };
                assert_eq!(both_agree(c1, c2, a_is), want, "{c1:?} {c2:?} a_is={a_is:?}");
                cases += 1;
            }
        }
    }
    assert_eq!(cases, 18);
}

fn seal_for(n: usize) -> Vec<SealEntry> {
    (0..n)
        .map(|i| SealEntry {
            anon_id: format!("i{i}"),
            round: 1,
            variant: "V".into(),
            question_id: format!("q{i}"),
        })
        .collect()
}

fn rating(rater: &str, id: &str, s: [u8; 4]) -> RatingRecord {
    RatingRecord {
        rater_id: rater.into(),
        anon_id: id.into(),
        scores: Scores::new(s[0], s[1], s[2], s[3]),
        timestamp: at(0),
    }
}

#[test]
fn hallucination_threshold_examples() {
    let rs = [
        rating("r1", "i0", [4, 5, 5, 5]),
        rating("r2", "i0", [3, 5, 5, 5]),
        rating("r1", "i1", [4, 5, 5, 5]),
        rating("r2", "i1", [4, 5, 5, 5]),
    ];
    let agg = aggregate_independent(&rs, &seal_for(2)).unwrap();
    assert!(agg[0].hallucination);
    assert!(!agg[1].hallucination);
}

proptest! {
    #[test]
    fn aggregation_bounds_and_hallucination(
        scores in prop::collection::vec(([1u8..=5, 1u8..=5, 1u8..=5, 1u8..=5], [1u8..=5, 1u8..=5, 1u8..=5, 1u8..=5]), 1..40)
    ) {
        let seal = seal_for(scores.len());
        let mut records = Vec::new();
        for (i, (s1, s2)) in scores.iter().enumerate() {
            records.push(rating("r1", &format!("i{i}"), *s1));
            records.push(rating("r2", &format!("i{i}"), *s2));
        }
        let agg = aggregate_independent(&records, &seal).unwrap();
        prop_assert_eq!(agg.len(), scores.len());
        for (a, (s1, s2)) in agg.iter().zip(&scores) {
            let sum: u32 = s1.iter().chain(s2).map(|&x| u32::from(x)).sum();
            prop_assert!((4.0..=20.0).contains(&a.total));
            prop_assert_eq!(a.total * 2.0, f64::from(sum));
            prop_assert_eq!(a.hallucination, s1[0] + s2[0] < 8);
            for d in Dimension::ALL {
                prop_assert!((1.0..=5.0).contains(&a.mean(d)));
            }
        }
    }

    #[test]
    fn pairwise_counts_conserve(
        picks in prop::collection::vec((0usize..3, 0usize..3, any::<bool>()), 1..60)
    ) {
        let choices = [Choice::A, Choice::B, Choice::Tie];
        let seal: Vec<PairSealEntry> = picks
            .iter()
            .enumerate()
            .map(|(i, p)| PairSealEntry {
                pair_id: format!("p{i}"),
                question_id: format!("q{i}"),
                source1: "EyeGPT".into(),
                source2: "Doctor".into(),
                a_is: if p.2 { Winner::Source1 } else { Winner::Source2 },
            })
            .collect();
        let mut records = Vec::new();
        for (i, p) in picks.iter().enumerate() {
            for d in Dimension::ALL {
                for (rater, c) in [("r1", p.0), ("r2", p.1)] {
                    records.push(PairwiseRecord {
                        rater_id: rater.into(),
                        pair_id: format!("p{i}"),
                        dimension: d,
                        choice: choices[c],
                        timestamp: at(0),
                    });
                }
            }
        }
        let summary = aggregate_pairwise(&records, &seal).unwrap();
        for d in Dimension::ALL {
            prop_assert_eq!(summary.counts[&d].total(), picks.len());
        }
        prop_assert_eq!(summary.verdicts.len(), picks.len() * 4);
    }
}

fn two_round_ledger() -> (RatingLedger, Vec<String>, Vec<String>) {
    let mut ledger = RatingLedger::default();
    let (r1, s1) = make_blind_assignment(&answers("A", 2), &raters(), 1, 1).unwrap();
    let (r2, s2) = make_blind_assignment(&answers("B", 2), &raters(), 2, 1).unwrap();
    ledger.add_round(r1).unwrap();
    ledger.add_round(r2).unwrap();
    let ids = |s: Vec<SealEntry>| s.into_iter().map(|e| e.anon_id).collect();
    (ledger, ids(s1), ids(s2))
}

fn rate(rater: &str, id: &str, day: i64) -> RatingRecord {
    RatingRecord {
        timestamp: at(day),
        ..rating(rater, id, [4, 4, 4, 4])
    }
}

#[test]
fn round_two_waits_for_round_one_and_washout() {
    let (mut ledger, round1, round2) = two_round_ledger();
    assert!(matches!(
        ledger.record_rating(rate("r1", &round2[0], 0)),
        Err(EvalError::Round1Incomplete { .. })
    ));
    ledger.record_rating(rate("r1", &round1[0], 0)).unwrap();
    ledger.record_rating(rate("r1", &round1[1], 2)).unwrap();

    // washout counts from the last round-1 rating (day 2)
    match ledger.record_rating(rate("r1", &round2[0], 31)) {
        Err(EvalError::WashoutNotElapsed { until, .. }) => assert_eq!(until, at(32)),
        other => panic!("expected washout error, got {other:?}"),
    }
    assert_eq!(
        ledger.next_item("r1", at(31)).unwrap(),
        NextItem::Waiting { until: at(32) }
    );
    ledger.record_rating(rate("r1", &round2[0], 32)).unwrap();

    // the other rater is gated independently
    assert!(matches!(
        ledger.record_rating(rate("r2", &round2[0], 40)),
        Err(EvalError::Round1Incomplete { .. })
    ));
}

#[test]
fn duplicate_and_out_of_scale_are_rejected() {
    let (mut ledger, round1, _) = two_round_ledger();
    ledger.record_rating(rate("r1", &round1[0], 0)).unwrap();
    assert!(matches!(
        ledger.record_rating(rate("r1", &round1[0], 1)),
        Err(EvalError::DuplicateRating { .. })
    ));
    assert!(matches!(
        ledger.record_rating(rating("r1", &round1[1], [6, 4, 4, 4])),
        Err(EvalError::OutOfScale {
            dimension: Dimension::Accuracy,
            value: 6
        })
    ));
    assert!(matches!(
        ledger.record_rating(rating("r1", &round1[1], [4, 4, 0, 4])),
        Err(EvalError::OutOfScale {
            dimension: Dimension::Trustworthiness,
            value: 0
        })
    ));
    assert!(matches!(
        ledger.record_rating(rate("r1", "nope", 0)),
        Err(EvalError::UnknownItem(_))
    ));
    assert!(matches!(
        ledger.record_rating(rate("zed", &round1[1], 0)),
        Err(EvalError::UnknownRater(_))
    ));
}

#[test]
fn run_directory_survives_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("run");
    let config = RunConfig {
        raters: raters(),
        washout_days: 30,
    };
    let mut run = EvalRun::create(&root, config).unwrap();
    let items = run.assign_round(&answers("A", 3), 1, 5).unwrap().raters["r1"].clone();
    run.record_rating(rate("r1", &items[0].anon_id, 0)).unwrap();
    let pairs = run
        .assign_pairwise(&answers("EyeGPT", 2), &answers("Doctor", 2), 5)
        .unwrap()
        .to_vec();
    run.record_pairwise(PairwiseRecord {
        rater_id: "r2".into(),
        pair_id: pairs[0].pair_id.clone(),
        dimension: Dimension::Empathy,
        choice: Choice::B,
        timestamp: at(0),
    })
    .unwrap();
    drop(run);

    let mut reopened = EvalRun::open(&root).unwrap();
    assert_eq!(reopened.ledger().ratings().len(), 1);
    assert_eq!(reopened.ledger().pairwise().len(), 1);
    assert_eq!(reopened.seal().len(), 3);
    assert!(matches!(
        reopened.record_rating(rate("r1", &items[0].anon_id, 1)),
        Err(EvalError::DuplicateRating { .. })
    ));
    // the rater-facing assignment file carries no provenance
    let text = std::fs::read_to_string(reopened.layout().assignment(1)).unwrap();
    assert!(!text.contains("\"variant\""));
    assert!(EvalRun::create(
        &root,
        RunConfig {
            raters: raters(),
            washout_days: 30
        }
    )
    .is_err());
}

#[test]
fn shipped_bank_file_matches_builtin() {
    use eyeqa_core::evalkit::{load_question_bank, render_question_bank, shipped_question_bank, BankMode};
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/question_bank.jsonl");
    let builtin = shipped_question_bank();
    if std::env::var_os("EYEQA_UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, render_question_bank(&builtin)).unwrap();
    }
    assert_eq!(load_question_bank(&path, BankMode::Strict).unwrap(), builtin);
}
