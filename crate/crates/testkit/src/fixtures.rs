//! Deterministic fixture generators.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One raw dataset sample, independent of the crate under test.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSample {
    pub id: String,
    pub kind: &'static str,
    pub question: String,
    pub answer: String,
    pub options: Vec<String>,
    pub correct: Option<usize>,
}

impl FixtureSample {
    pub fn to_json(&self) -> String {
        let mut v = serde_json::json!({
            "id": self.id,
            "source": "fixture",
            "kind": self.kind,
            "question": self.question,
            "answer": self.answer,
        });
        if !self.options.is_empty() {
            v["options"] = serde_json::json!(self.options);
        }
        if let Some(c) = self.correct {
            v["correct"] = serde_json::json!(c);
        }
        v.to_string()
    }
}

const FILLER: &[&str] = &[
    "the",
    "patient",
    "reports",
    "pain",
    "after",
    "surgery",
    "with",
    "fever",
    "and",
    "mild",
    "swelling",
    "knee",
    "hip",
    "fracture",
    "blood",
    "pressure",
    "is",
    "high",
    "treatment",
    "options",
    "include",
    "rest",
    "daily",
    "dose",
    "heart",
    "lung",
    "skin",
    "rash",
    "kidney",
    "liver",
    "test",
    "result",
];

/// Matching words, near misses and casing variants of the default keywords.
const TRICKY: &[&str] = &[
    "eye",
    "Eye",
    "EYE",
    "eyes",
    "eyebrow",
    "red-eye",
    "eye_drops",
    "ocular",
    "intraocular",
    "Ocular.",
    "ophthalmology",
    "Ophthalmic",
    "ophthalm",
    "ophthalmologist's",
    "retina",
    "retinal",
    "retina's",
    "cornea",
    "corneal",
    "glaucoma,",
    "cataract",
    "cataracts",
    "myopia",
    "myopic",
    "macula",
    "maculae",
    "uvea",
    "uveal",
    "vitreous",
    "conjunctivitis",
    "Conjunctival",
    "strabismus",
    "lens",
    "lenses",
    "lens-",
    "(lens)",
];

fn sentence(rng: &mut ChaCha8Rng, tricky_rate: f64) -> String {
    let len = rng.random_range(4..14);
    let mut words = Vec::with_capacity(len);
    for _ in 0..len {
        let pool = if rng.random_bool(tricky_rate) { TRICKY } else { FILLER };
        words.push(*pool.choose(rng).expect("non-empty pool"));
    }
    let mut s = words.join(" ");
    s.push(if rng.random_bool(0.3) { '?' } else { '.' });
    s
}

/// `n` mixed dialogue, flashcard and multiple-choice samples.
pub fn keyword_corpus(n: usize, seed: u64) -> Vec<FixtureSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let roll = rng.random_range(0..10);
            let question = sentence(&mut rng, 0.05);
            let answer = sentence(&mut rng, 0.05);
            if roll < 3 {
                let k = rng.random_range(2..6);
                let options: Vec<String> = (0..k).map(|_| sentence(&mut rng, 0.05)).collect();
                let correct = rng.random_range(0..k);
                FixtureSample {
                    id: format!("s{i:04}"),
                    kind: "mcqa",
                    question,
                    answer: String::new(),
                    options,
                    correct: Some(correct),
                }
            } else {
                FixtureSample {
                    id: format!("s{i:04}"),
                    kind: if roll < 8 { "dialogue" } else { "flashcard" },
                    question,
                    answer,
                    options: Vec::new(),
                    correct: None,
                }
            }
        })
        .collect()
}

/// Two raters' four-dimension scores for `n` responses, with the sum of
/// all per-response totals (two-rater means, summed over dimensions) equal
/// to `target_half_points / 2`.
pub fn scores_with_total(n: usize, target_half_points: u32, seed: u64) -> Vec<[[u8; 4]; 2]> {
    assert!(target_half_points as usize >= 8 * n && target_half_points as usize <= 40 * n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<[[u8; 4]; 2]> = (0..n)
        .map(|_| {
            let mut s = [[0u8; 4]; 2];
            for rater in &mut s {
                for d in rater.iter_mut() {
                    *d = rng.random_range(1..=5);
                }
            }
            s
        })
        .collect();
    let sum = |o: &Vec<[[u8; 4]; 2]>| o.iter().flatten().flatten().map(|&x| x as u32).sum::<u32>();
    let mut current = sum(&out);
    while current != target_half_points {
        let (i, r, d) = (rng.random_range(0..n), rng.random_range(0..2), rng.random_range(0..4));
        let cell = &mut out[i][r][d];
        if current < target_half_points && *cell < 5 {
            *cell += 1;
            current += 1;
        } else if current > target_half_points && *cell > 1 {
            *cell -= 1;
            current -= 1;
        }
    }
    out
}
