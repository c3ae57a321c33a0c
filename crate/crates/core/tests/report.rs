use chrono::{DateTime, Utc};
use eyeqa_core::evalkit::{
    shipped_question_bank, Choice, Dimension, PairSealEntry, PairwiseRecord, RatingRecord, Scores, SealEntry, Winner,
};
use eyeqa_core::report::{build_report, format_count_pct, ReportInput, ReportOptions};
use eyeqa_testkit::fixtures::scores_with_total;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rating(rater: &str, id: &str, s: [u8; 4]) -> RatingRecord {
    RatingRecord {
        rater_id: rater.into(),
        anon_id: id.into(),
        scores: Scores::new(s[0], s[1], s[2], s[3]),
        timestamp: DateTime::<Utc>::UNIX_EPOCH,
    }
}

/// Adds one variant's responses to `input`, one per question id.
fn add_variant(input: &mut ReportInput, round: u8, variant: &str, question_ids: &[String], scores: &[[[u8; 4]; 2]]) {
    for (qid, pair) in question_ids.iter().zip(scores) {
        let id = format!("{variant}-{qid}");
        input.seal.push(SealEntry {
            anon_id: id.clone(),
            round,
            variant: variant.into(),
            question_id: qid.clone(),
        });
        input.ratings.push(rating("rater1", &id, pair[0]));
        input.ratings.push(rating("rater2", &id, pair[1]));
    }
}

fn random_scores(n: usize, lo: u8, seed: u64) -> Vec<[[u8; 4]; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut s = [[0u8; 4]; 2];
            for r in &mut s {
                for d in r.iter_mut() {
                    *d = rng.random_range(lo..=5);
                }
            }
            s
        })
        .collect()
}

#[test]
fn engineered_fixture_renders_target_mean() {
    let questions = shipped_question_bank();
    assert_eq!(questions.len(), 120);
    let ids: Vec<String> = questions.iter().map(|q| q.id.clone()).collect();
    let scores = scores_with_total(120, 3634, 99);

    // independent arithmetic: half-points / 2 / n
    let expected_mean = 3634.0 / 2.0 / 120.0;
    assert_eq!(format!("{expected_mean:.2}"), "15.14");

    let mut input = ReportInput {
        questions,
        ..Default::default()
    };
    add_variant(&mut input, 2, "Finetune3", &ids, &random_scores(120, 2, 5));
    add_variant(&mut input, 2, "Best-finetune+book", &ids, &scores);
    let report = build_report(&input, &ReportOptions::default()).unwrap();
    let row = &report.rounds[0].variants[1];
    assert_eq!(row.variant, "Best-finetune+book");
    assert!((row.total.mean - expected_mean).abs() < 1e-12);
    assert!(row.total.render().starts_with("15.14 ± "));
    assert!(report.render_text().contains("15.14 ± "));
}

#[test]
fn band_percentages_sum_to_hundred() {
    let questions = shipped_question_bank();
    let ids: Vec<String> = questions.iter().map(|q| q.id.clone()).collect();
    let mut input = ReportInput::default();
    add_variant(&mut input, 1, "Original", &ids, &random_scores(120, 1, 8));
    let report = build_report(&input, &ReportOptions::default()).unwrap();
    for table in &report.rounds[0].bands {
        for row in &table.rows {
            let pct: f64 = row
                .counts
                .iter()
                .map(|c| (1000.0 * *c as f64 / table.n as f64).round() / 10.0)
                .sum();
            assert!((pct - 100.0).abs() <= 0.1 + 1e-9, "{pct}");
            assert_eq!(row.counts.iter().sum::<usize>(), table.n);
        }
    }
}

fn pairwise_input(s1: usize, s2: usize, ties: usize) -> ReportInput {
    let mut input = ReportInput::default();
    // each verdict is produced by both raters choosing the same displayed side
    let verdicts = std::iter::repeat_n(Winner::Source1, s1)
        .chain(std::iter::repeat_n(Winner::Source2, s2))
        .chain(std::iter::repeat_n(Winner::Tie, ties));
    for (i, v) in verdicts.enumerate() {
        let pair_id = format!("p{i:03}");
        let a_is = if i % 2 == 0 { Winner::Source1 } else { Winner::Source2 };
        input.pair_seal.push(PairSealEntry {
            pair_id: pair_id.clone(),
            question_id: format!("q{i:03}"),
            source1: "EyeGPT".into(),
            source2: "Doctor".into(),
            a_is,
        });
        let (c1, c2) = match v {
            Winner::Tie => (Choice::A, Choice::Tie),
            w if w == a_is => (Choice::A, Choice::A),
            _ => (Choice::B, Choice::B),
        };
        for d in Dimension::ALL {
            for (rater, c) in [("rater1", c1), ("rater2", c2)] {
                input.pair_records.push(PairwiseRecord {
                    rater_id: rater.into(),
                    pair_id: pair_id.clone(),
                    dimension: d,
                    choice: c,
                    timestamp: DateTime::<Utc>::UNIX_EPOCH,
                });
            }
        }
    }
    input
}

#[test]
fn pairwise_counts_render_as_percentages() {
    let report = build_report(&pairwise_input(3, 85, 32), &ReportOptions::default()).unwrap();
    let p = report.pairwise.as_ref().unwrap();
    for row in &p.rows {
        assert_eq!((row.source1_wins, row.source2_wins, row.ties), (3, 85, 32));
        assert!(row.p_value.unwrap() < 0.001);
    }
    let text = report.render_text();
    for s in ["3 (2.5%)", "85 (70.8%)", "32 (26.7%)", "<0.001"] {
        assert!(text.contains(s), "missing {s}");
    }
    assert_eq!(format_count_pct(3, 120), "3 (2.5%)");
}

#[test]
fn partly_rated_round_is_an_error() {
    let ids: Vec<String> = (0..3).map(|i| format!("q{i}")).collect();
    let mut input = ReportInput::default();
    add_variant(&mut input, 1, "Original", &ids, &random_scores(3, 1, 1));
    input.ratings.pop();
    assert!(build_report(&input, &ReportOptions::default()).is_err());
}

fn golden_input() -> ReportInput {
    let questions: Vec<_> = shipped_question_bank().into_iter().step_by(7).collect();
    let ids: Vec<String> = questions.iter().map(|q| q.id.clone()).collect();
    let mut input = pairwise_input(2, 14, 8);
    input.questions = questions;
    add_variant(&mut input, 1, "Original", &ids, &random_scores(ids.len(), 1, 21));
    add_variant(&mut input, 1, "Role-play", &ids, &random_scores(ids.len(), 2, 22));
    add_variant(&mut input, 1, "Finetune3", &ids, &random_scores(ids.len(), 3, 23));
    input
}

#[test]
fn text_report_matches_golden() {
    let text = build_report(&golden_input(), &ReportOptions::default())
        .unwrap()
        .render_text();
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/report_golden.txt");
    if std::env::var_os("EYEQA_UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &text).unwrap();
    }
    assert_eq!(text, std::fs::read_to_string(&path).unwrap());
    // deterministic across builds
    assert_eq!(
        text,
        build_report(&golden_input(), &ReportOptions::default())
            .unwrap()
            .render_text()
    );
}
