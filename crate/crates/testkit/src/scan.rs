//! Keyword matching by one regular expression per sample.
//!
//! Terms ending in `-` match any word that starts with the stem; terms with
//! spaces match the words in sequence; everything else matches whole words.
//! Matching is case-insensitive.

use regex::Regex;

pub fn keyword_regex(keywords: &[&str]) -> Regex {
    let alternatives: Vec<String> = keywords
        .iter()
        .map(|k| k.trim().to_lowercase())
        .filter(|k| !k.is_empty())
        .map(|k| {
            if let Some(stem) = k.strip_suffix('-') {
                format!(r"{}\w*", regex::escape(stem))
            } else {
                k.split_whitespace()
                    .map(regex::escape)
                    .collect::<Vec<_>>()
                    .join(r"[^\w]+")
            }
        })
        .collect();
    Regex::new(&format!(r"(?i)(?:^|[^\w])(?:{})(?:$|[^\w])", alternatives.join("|"))).expect("valid pattern")
}

/// Indices of samples where either text matches.
pub fn scan(samples: &[(String, String)], keywords: &[&str]) -> Vec<usize> {
    let re = keyword_regex(keywords);
    samples
        .iter()
        .enumerate()
        .filter(|(_, (q, a))| re.is_match(q) || re.is_match(a))
        .map(|(i, _)| i)
        .collect()
}
