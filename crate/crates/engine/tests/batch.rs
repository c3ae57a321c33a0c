mod common;

use common::{toy_bank, toy_engine};
use eyeqa_engine::batch::{collect_answers, read_answers, read_batch_file, BatchLine, BatchSummary};
use eyeqa_engine::gateway::{Fault, MockScript};

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn calls(engine: &eyeqa_engine::Engine) -> u64 {
    ["base", "finetune1", "finetune2", "finetune3"]
        .iter()
        .map(|b| engine.gateway(b).unwrap().stats().chat_calls)
        .sum()
}

#[tokio::test]
async fn two_by_two_gives_four_answers() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("answers.jsonl");
    let engine = toy_engine(MockScript::fixed("an answer")).await;
    let bank = &toy_bank()[..2];
    let s = collect_answers(&engine, &names(&["Original", "Best-finetune+book"]), bank, &out)
        .await
        .unwrap();
    assert_eq!(
        s,
        BatchSummary {
            answered: 4,
            skipped: 0,
            failed: 0
        }
    );
    let answers = read_answers(&out).unwrap();
    assert_eq!(answers.len(), 4);
    assert!(answers.iter().all(|a| a.answer == "an answer"));
    let book: Vec<_> = answers.iter().filter(|a| a.variant == "Best-finetune+book").collect();
    assert!(book.iter().all(|a| a.citations.len() == engine.k()));
    assert!(answers
        .iter()
        .filter(|a| a.variant == "Original")
        .all(|a| a.citations.is_empty()));
}

#[tokio::test]
async fn rerun_makes_no_duplicate_calls() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("answers.jsonl");
    let variants = names(&["Role-play", "Finetune1"]);
    let bank = toy_bank();

    let first = toy_engine(MockScript::echo()).await;
    collect_answers(&first, &variants, &bank, &out).await.unwrap();
    assert_eq!(calls(&first), 6);

    // a fresh process resumes from the file alone
    let second = toy_engine(MockScript::echo()).await;
    let s = collect_answers(&second, &variants, &bank, &out).await.unwrap();
    assert_eq!((s.answered, s.skipped), (0, 6));
    assert_eq!(calls(&second), 0);
    assert_eq!(read_batch_file(&out).unwrap().len(), 6);
}

#[tokio::test]
async fn torn_final_line_is_redone() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("answers.jsonl");
    let variants = names(&["Original"]);
    let bank = toy_bank();
    collect_answers(&toy_engine(MockScript::echo()).await, &variants, &bank, &out)
        .await
        .unwrap();

    // simulate a kill halfway through writing the last record
    let text = std::fs::read_to_string(&out).unwrap();
    let cut = text.trim_end().rfind('\n').unwrap() + 20;
    std::fs::write(&out, &text[..cut]).unwrap();

    let engine = toy_engine(MockScript::echo()).await;
    let s = collect_answers(&engine, &variants, &bank, &out).await.unwrap();
    assert_eq!((s.answered, s.skipped), (1, 2));
    assert_eq!(calls(&engine), 1);
    assert_eq!(read_answers(&out).unwrap().len(), 3);
}

#[tokio::test(start_paused = true)]
async fn failed_item_is_recorded_and_retried_later() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("answers.jsonl");
    // both variants share the `base` backend; attempts 2..=5 cover the
    // second question's call and its three retries
    let mut script = MockScript::fixed("ok");
    for ordinal in 2..=5 {
        script = script.fault(
            ordinal,
            Fault {
                latency_ms: 600_000,
                ..Fault::default()
            },
        );
    }
    let engine = toy_engine(script).await;
    let variants = names(&["Original", "Role-play"]);
    let bank = &toy_bank()[..2];
    let s = collect_answers(&engine, &variants, bank, &out).await.unwrap();
    assert_eq!((s.answered, s.failed), (3, 1));

    let lines = read_batch_file(&out).unwrap();
    let failures: Vec<_> = lines
        .iter()
        .filter_map(|l| match l {
            BatchLine::Failure(f) => Some(f),
            BatchLine::Answer(_) => None,
        })
        .collect();
    assert_eq!(failures.len(), 1);
    assert_eq!(
        (failures[0].question_id.as_str(), failures[0].variant.as_str()),
        ("t2", "Original")
    );
    assert!(failures[0].error.contains("timed out"));

    let before = engine.gateway("base").unwrap().stats().chat_calls;
    let s = collect_answers(&engine, &variants, bank, &out).await.unwrap();
    assert_eq!((s.answered, s.skipped, s.failed), (1, 3, 0));
    assert_eq!(engine.gateway("base").unwrap().stats().chat_calls, before + 1);
    assert_eq!(read_answers(&out).unwrap().len(), 4);
}

#[tokio::test]
async fn unknown_variant_fails_before_any_call() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("answers.jsonl");
    let engine = toy_engine(MockScript::echo()).await;
    assert!(
        collect_answers(&engine, &names(&["Original", "Nope"]), &toy_bank(), &out)
            .await
            .is_err()
    );
    assert_eq!(calls(&engine), 0);
    assert!(!out.exists());
}
