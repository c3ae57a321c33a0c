//! Acceptance suite: one PASS/FAIL line per primary criterion.
//!
//! Runs entirely offline against mock backends. Exits non-zero when any
//! criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use eyeqa_core::corpus::{split_recursive, SplitterConfig};
use eyeqa_core::dataprep::{
    build_manifest, filter_eye_related, to_instruction_format, KeywordSet, RawSample, SampleKind, DEFAULT_KEYWORDS,
    MCQA_PREFIX,
};
use eyeqa_core::evalkit::{
    aggregate_independent, both_agree, make_blind_assignment, make_pairwise_assignment, shipped_question_bank,
    AnswerRecord, Choice, Dimension, PairSealEntry, PairwiseRecord, Persona, RatingRecord, Scores, SealEntry, Winner,
};
use eyeqa_core::index::{ChunkRef, EmbeddingVector, IndexError, VectorIndex};
use eyeqa_core::report::{build_report, ReportInput, ReportOptions};
use eyeqa_core::stats::{
    chi_square, chi_square_goodness_of_fit, cohens_kappa_from_table, kruskal_wallis, mann_whitney_u, KappaBand,
};
use eyeqa_engine::chain::{CONTEXT_HEADER, ROLE_PLAY_PATIENT, ROLE_PLAY_STUDENT};
use eyeqa_engine::gateway::MockScript;
use eyeqa_engine::RetrievalSource;
use eyeqa_testkit::fixtures::{keyword_corpus, scores_with_total};
use eyeqa_testkit::knn::brute_force_topk;
use eyeqa_testkit::mwu::{exact_p, u_statistic};
use eyeqa_testkit::scan::scan;
use eyeqa_testkit::splitter::oracle_split;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn random_vectors(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f32>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect())
        .collect()
}

fn index_of(vectors: &[Vec<f32>]) -> VectorIndex {
    let refs = (0..vectors.len())
        .map(|i| ChunkRef {
            id: format!("c{i}"),
            start: i as u32,
            end: i as u32 + 1,
        })
        .collect();
    let embs: Vec<EmbeddingVector> = vectors.iter().cloned().map(EmbeddingVector).collect();
    VectorIndex::build(vectors[0].len(), refs, &embs).expect("index builds")
}

fn retrieval_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let data = random_vectors(&mut rng, 1000, 16);
    let queries = random_vectors(&mut rng, 100, 16);
    let started = Instant::now();
    let index = index_of(&data);
    for (qi, q) in queries.iter().enumerate() {
        let got: Vec<String> = index
            .search(q, 10)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|h| h.chunk_id)
            .collect();
        let want: Vec<String> = brute_force_topk(&data, q, 10)
            .into_iter()
            .map(|i| format!("c{i}"))
            .collect();
        ensure!(got == want, "query {qi}: {got:?} != {want:?}");
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(())
}

fn splitter_conformance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let alphabet = ['a', 'b', ' ', 'é', '\n'];
    for case in 0..1000 {
        let len = rng.random_range(0..240);
        let text: String = (0..len)
            .map(|_| alphabet[rng.random_range(0..alphabet.len())])
            .collect();
        let size = rng.random_range(1..40);
        let overlap = rng.random_range(0..size);
        let mut seps: Vec<&str> = ["\n\n", "\n", " ", "b"]
            .into_iter()
            .filter(|_| rng.random_bool(0.6))
            .collect();
        seps.shuffle(&mut rng);
        seps.push("");
        let cfg = SplitterConfig::new(size, overlap)
            .and_then(|c| c.with_separators(seps.clone()))
            .map_err(|e| e.to_string())?;

        let chunks = split_recursive("d", &text, &cfg);
        let ours: Vec<String> = chunks.iter().map(|c| c.text.clone()).collect();
        let want = oracle_split(&text, size, overlap, &seps);
        ensure!(
            ours == want,
            "case {case}: size {size} overlap {overlap} seps {seps:?} text {text:?}"
        );

        let chars: Vec<char> = text.chars().collect();
        let mut covered = vec![false; chars.len()];
        for c in &chunks {
            ensure!(
                c.char_len() <= size,
                "case {case}: chunk of {} chars > {size}",
                c.char_len()
            );
            covered[c.start..c.end].iter_mut().for_each(|x| *x = true);
        }
        // separators consumed at a split boundary may fall between chunks
        let sep_chars: String = seps.concat();
        for (i, ch) in chars.iter().enumerate() {
            ensure!(
                covered[i] || ch.is_whitespace() || sep_chars.contains(*ch),
                "case {case}: {ch:?} at {i} not covered"
            );
        }
    }
    Ok(())
}

fn statistics_suite() -> Outcome {
    for na in 1..=6usize {
        for nb in 1..=6usize {
            let n = na + nb;
            for mask in (0u32..1 << n).filter(|m| m.count_ones() as usize == na) {
                let (mut a, mut b) = (Vec::new(), Vec::new());
                for i in 0..n {
                    if mask & (1 << i) != 0 { &mut a } else { &mut b }.push((i + 1) as f64);
                }
                let r = mann_whitney_u(&a, &b).map_err(|e| e.to_string())?;
                let want = exact_p(na, nb, u_statistic(&a, &b));
                ensure!(
                    (r.p_value() - want).abs() < 1e-12,
                    "MWU ({na},{nb}) {a:?}: {} != {want}",
                    r.p_value()
                );
            }
        }
    }
    let p = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0])
        .map_err(|e| e.to_string())?
        .p_value();
    ensure!((p - 1.0 / 3.0).abs() < 1e-12, "MWU [1,2] vs [3,4]: p = {p}");

    let kw =
        kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 9.0]]).map_err(|e| e.to_string())?;
    ensure!(
        (kw.statistic - 7.2).abs() < 1e-9 && kw.df == Some(2),
        "KW: H {} df {:?}",
        kw.statistic,
        kw.df
    );

    let table = [vec![20.0, 5.0], vec![10.0, 15.0]];
    let chi = chi_square(&table).map_err(|e| e.to_string())?;
    ensure!(
        (chi.statistic - 8.333).abs() < 1e-3 && chi.df == Some(1),
        "chi2 {} df {:?}",
        chi.statistic,
        chi.df
    );

    let k = cohens_kappa_from_table(&table).map_err(|e| e.to_string())?;
    ensure!((k.kappa - 0.4).abs() < 1e-9, "kappa {}", k.kappa);
    ensure!(KappaBand::classify(0.872) == KappaBand::AlmostPerfect, "0.872 band");
    ensure!(KappaBand::classify(0.872).label() == "almost perfect", "0.872 label");
    Ok(())
}

fn rating(rater: &str, id: &str, s: [u8; 4]) -> RatingRecord {
    RatingRecord {
        rater_id: rater.into(),
        anon_id: id.into(),
        scores: Scores::new(s[0], s[1], s[2], s[3]),
        timestamp: DateTime::<Utc>::UNIX_EPOCH,
    }
}

fn seal(id: &str, round: u8, variant: &str, qid: &str) -> SealEntry {
    SealEntry {
        anon_id: id.into(),
        round,
        variant: variant.into(),
        question_id: qid.into(),
    }
}

/// Pairwise records whose both-agree verdicts are `s1` source-1 wins,
/// `s2` source-2 wins and `ties` ties on every dimension.
fn pairwise_fixture(s1: usize, s2: usize, ties: usize, input: &mut ReportInput) {
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
            for (rater, c) in [("r1", c1), ("r2", c2)] {
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
}

fn aggregation_semantics() -> Outcome {
    let rs = [
        rating("r1", "i0", [4, 5, 5, 5]),
        rating("r2", "i0", [3, 5, 5, 5]),
        rating("r1", "i1", [4, 5, 5, 5]),
        rating("r2", "i1", [4, 5, 5, 5]),
    ];
    let agg =
        aggregate_independent(&rs, &[seal("i0", 1, "V", "q0"), seal("i1", 1, "V", "q1")]).map_err(|e| e.to_string())?;
    ensure!(agg[0].hallucination, "accuracy (4,3) must be a hallucination");
    ensure!(!agg[1].hallucination, "accuracy (4,4) must not be a hallucination");

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut ratings = Vec::new();
    let mut seals = Vec::new();
    for i in 0..500 {
        let id = format!("x{i}");
        seals.push(seal(&id, 1, "V", &format!("q{i}")));
        for r in ["r1", "r2"] {
            let s = [0; 4].map(|_| rng.random_range(1..=5u8));
            ratings.push(rating(r, &id, s));
        }
    }
    for a in aggregate_independent(&ratings, &seals).map_err(|e| e.to_string())? {
        ensure!((4.0..=20.0).contains(&a.total), "total {} out of range", a.total);
    }

    let questions = shipped_question_bank();
    let mut input = ReportInput {
        questions: questions.clone(),
        ..Default::default()
    };
    for (q, pair) in questions.iter().zip(scores_with_total(120, 3634, 99)) {
        let id = format!("b-{}", q.id);
        input.seal.push(seal(&id, 2, "Best-finetune+book", &q.id));
        input.ratings.push(rating("r1", &id, pair[0]));
        input.ratings.push(rating("r2", &id, pair[1]));
    }
    pairwise_fixture(3, 85, 32, &mut input);
    let text = build_report(&input, &ReportOptions::default())
        .map_err(|e| e.to_string())?
        .render_text();
    ensure!(text.contains("15.14 ± "), "report lacks \"15.14 ± \"");
    for s in ["3 (2.5%)", "85 (70.8%)", "32 (26.7%)"] {
        ensure!(text.contains(s), "report lacks {s:?}");
    }
    Ok(())
}

fn pipeline_end_to_end() -> Outcome {
    let rt = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    rt.block_on(async {
        let engine = common::toy_engine(MockScript::echo()).await;
        let bank = common::toy_bank();
        ensure!(bank.len() == 3, "toy bank has {} questions", bank.len());
        for q in &bank {
            let sentence = match q.persona {
                Persona::Patient => ROLE_PLAY_PATIENT,
                Persona::MedicalStudent => ROLE_PLAY_STUDENT,
            };
            let mut s = engine
                .new_session("Role-play+book", q.persona)
                .map_err(|e| e.to_string())?;
            let a = engine.answer(&mut s, &q.text).await.map_err(|e| e.to_string())?;
            ensure!(
                a.prompt_transcript.contains(sentence),
                "{}: role-play sentence missing",
                q.id
            );
            ensure!(
                a.cited_chunks.len() == engine.k(),
                "{}: {} chunks cited",
                q.id,
                a.cited_chunks.len()
            );
            let direct = engine
                .retriever(RetrievalSource::Book)
                .ok_or("book index missing")?
                .search(
                    &engine.embed_query(&q.text).await.map_err(|e| e.to_string())?,
                    engine.k(),
                )
                .map_err(|e| e.to_string())?;
            ensure!(
                direct == a.cited_chunks,
                "{}: cited chunks differ from direct search",
                q.id
            );
            for c in &a.cited_chunks {
                ensure!(
                    a.prompt_transcript.contains(&c.text),
                    "{}: chunk {} not in prompt",
                    q.id,
                    c.chunk_id
                );
            }

            let mut o = engine.new_session("Original", q.persona).map_err(|e| e.to_string())?;
            let b = engine.answer(&mut o, &q.text).await.map_err(|e| e.to_string())?;
            ensure!(
                !b.prompt_transcript.contains("Suppose you are"),
                "{}: Original has role-play",
                q.id
            );
            ensure!(
                !b.prompt_transcript.contains(CONTEXT_HEADER),
                "{}: Original has context",
                q.id
            );
            for c in &a.cited_chunks {
                ensure!(
                    !b.prompt_transcript.contains(&c.text),
                    "{}: Original prompt has chunk text",
                    q.id
                );
            }
        }
        // one completion per answer: condensation never reached the backend
        let calls = engine.gateway("base").map_err(|e| e.to_string())?.stats().chat_calls;
        ensure!(calls == 6, "expected 6 chat calls, saw {calls}");
        Ok(())
    })
}

fn blinding_and_assignment() -> Outcome {
    let variants = eyeqa_engine::registry::STANDARD_VARIANTS;
    let answers: Vec<AnswerRecord> = variants
        .iter()
        .flat_map(|v| {
            (0..4).map(move |i| AnswerRecord {
                question_id: format!("q{i}"),
                variant: v.to_string(),
                question: format!("Question {i} about the eye?"),
                answer: format!("Answer {i}."),
                citations: vec![],
            })
        })
        .collect();
    let raters = vec!["r1".to_string(), "r2".to_string()];
    let (assignment, _) = make_blind_assignment(&answers, &raters, 1, 5).map_err(|e| e.to_string())?;
    let payload = serde_json::to_string(&assignment).map_err(|e| e.to_string())?;
    for v in variants {
        ensure!(!payload.contains(v), "blind payload contains {v:?}");
    }

    let n = 6;
    let pool: Vec<AnswerRecord> = answers.iter().take(n).cloned().collect();
    let mut counts = vec![vec![0.0; n]; n];
    for s in 0..2000 {
        let (a, seal) = make_blind_assignment(&pool, &raters, 1, s).map_err(|e| e.to_string())?;
        for (pos, item) in a.raters["r1"].iter().enumerate() {
            let src = seal
                .iter()
                .position(|e| e.anon_id == item.anon_id)
                .ok_or("anon id not sealed")?;
            counts[src][pos] += 1.0;
        }
    }
    for (src, row) in counts.iter().enumerate() {
        let p = chi_square_goodness_of_fit(row, &vec![1.0 / n as f64; n])
            .map_err(|e| e.to_string())?
            .p_value
            .unwrap_or(0.0);
        ensure!(p > 0.001, "answer {src} positions not uniform (p = {p})");
    }

    let (pairs, _) = make_pairwise_assignment(&pool[..1], &pool[..1], 1).map_err(|e| e.to_string())?;
    let pair_payload = serde_json::to_string(&pairs).map_err(|e| e.to_string())?;
    ensure!(!pair_payload.contains("Original"), "pairwise payload names a source");

    // both-agree truth table, with the displayed side resolved by hand
    let table = [
        (Choice::A, Choice::A, Winner::Source1, Winner::Source1),
        (Choice::B, Choice::B, Winner::Source1, Winner::Source2),
        (Choice::A, Choice::A, Winner::Source2, Winner::Source2),
        (Choice::B, Choice::B, Winner::Source2, Winner::Source1),
        (Choice::A, Choice::B, Winner::Source1, Winner::Tie),
        (Choice::A, Choice::Tie, Winner::Source1, Winner::Tie),
        (Choice::Tie, Choice::Tie, Winner::Source2, Winner::Tie),
        (Choice::B, Choice::A, Winner::Source2, Winner::Tie),
    ];
    for (c1, c2, a_is, want) in table {
        let got = both_agree(c1, c2, a_is);
        ensure!(
            got == want,
            "both_agree({c1:?}, {c2:?}, A={a_is:?}) = {got:?}, want {want:?}"
        );
    }
    Ok(())
}

fn dataprep() -> Outcome {
    let fixtures = keyword_corpus(500, 42);
    let raw: Vec<RawSample> = fixtures
        .iter()
        .map(|f| serde_json::from_str(&f.to_json()).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let pairs: Vec<(String, String)> = fixtures
        .iter()
        .map(|f| (f.question.clone(), f.answer.clone()))
        .collect();
    let want: Vec<&str> = scan(&pairs, &DEFAULT_KEYWORDS)
        .into_iter()
        .map(|i| fixtures[i].id.as_str())
        .collect();
    let kept = filter_eye_related(&raw, &KeywordSet::default_eye());
    let got: Vec<&str> = kept.iter().map(|s| s.id.as_str()).collect();
    ensure!(got == want, "filter kept {} samples, oracle {}", got.len(), want.len());

    let mut mcqa = 0;
    for s in raw.iter().filter(|s| s.kind == SampleKind::Mcqa) {
        let out = to_instruction_format(s).map_err(|e| e.to_string())?;
        ensure!(
            out.instruction.starts_with(MCQA_PREFIX),
            "{}: {:?}",
            s.id,
            out.instruction
        );
        mcqa += 1;
    }
    ensure!(mcqa > 0, "fixture has no MCQA samples");

    let manifest = build_manifest(
        "finetune3",
        "meta-llama/Llama-2-7b-chat-hf",
        PathBuf::from("out/train.jsonl"),
        PathBuf::from("out/val.jsonl"),
        None,
    )
    .map_err(|e| e.to_string())?;
    let rendered = manifest.to_toml().map_err(|e| e.to_string())?;
    let golden = include_str!("../../core/tests/data/finetune3_manifest.toml");
    ensure!(rendered == golden, "manifest differs from golden file");
    for line in [
        "lora_rank = 8",
        "lora_alpha = 16",
        "lora_dropout = 0.05",
        "learning_rate = 0.00003",
        "batch_size = 24",
        "max_seq_len = 512",
        "warmup_ratio = 0.03",
        "iterations = 10000",
    ] {
        ensure!(golden.lines().any(|l| l == line), "golden lacks {line:?}");
    }
    Ok(())
}

fn persistence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let data = random_vectors(&mut rng, 300, 24);
    let index = index_of(&data);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("idx.eyix");
    index.save(&path).map_err(|e| e.to_string())?;
    let loaded = VectorIndex::load(&path).map_err(|e| e.to_string())?;
    for q in random_vectors(&mut rng, 50, 24) {
        let a = index.search(&q, 10).map_err(|e| e.to_string())?;
        let b = loaded.search(&q, 10).map_err(|e| e.to_string())?;
        ensure!(a == b, "search differs after reload");
    }
    let first = std::fs::read(&path).map_err(|e| e.to_string())?;
    ensure!(
        loaded.to_bytes().map_err(|e| e.to_string())? == first,
        "re-save not byte-identical"
    );
    ensure!(
        index.to_bytes().map_err(|e| e.to_string())? == first,
        "second save not byte-identical"
    );

    let mut bad = first.clone();
    bad[0] = b'X';
    ensure!(
        matches!(VectorIndex::from_bytes(&bad), Err(IndexError::BadMagic)),
        "bad magic not detected"
    );
    for cut in 0..first.len() {
        let r = catch_unwind(AssertUnwindSafe(|| VectorIndex::from_bytes(&first[..cut])))
            .map_err(|_| format!("panic on {cut}-byte prefix"))?;
        ensure!(
            matches!(r, Err(IndexError::TruncatedFile) | Err(IndexError::BadMagic)),
            "{cut}-byte prefix gave {r:?}"
        );
    }
    for _ in 0..2000 {
        let mut corrupt = first.clone();
        let i = rng.random_range(0..corrupt.len());
        corrupt[i] ^= 1 << rng.random_range(0..8);
        catch_unwind(AssertUnwindSafe(|| VectorIndex::from_bytes(&corrupt)))
            .map_err(|_| format!("panic on bit flip at byte {i}"))?
            .ok();
    }
    Ok(())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("retrieval oracle equivalence", retrieval_oracle),
        ("splitter conformance", splitter_conformance),
        ("statistics suite", statistics_suite),
        ("aggregation semantics", aggregation_semantics),
        ("pipeline end-to-end on mock", pipeline_end_to_end),
        ("blinding and assignment", blinding_and_assignment),
        ("dataprep", dataprep),
        ("persistence", persistence),
    ];
    let started = Instant::now();
    let mut failed = 0;
    for (name, check) in criteria {
        let t = Instant::now();
        let outcome = catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(()) => println!("PASS {name} ({} ms)", t.elapsed().as_millis()),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    let total = started.elapsed();
    if total < Duration::from_secs(120) {
        println!("PASS primary suite wall-clock ({:.1} s < 120 s)", total.as_secs_f64());
    } else {
        failed += 1;
        println!("FAIL primary suite wall-clock: {:.1} s", total.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
