//! Recursive character text splitting.
//!
//! The splitter tries each separator in order. Text is cut on the first
//! separator that occurs in it; pieces shorter than `chunk_size` are greedily
//! merged back together (re-joined by that separator) with up to `overlap`
//! characters carried between neighbouring chunks, and pieces that are still
//! too long are split again with the remaining separators. The final
//! separator is always the empty string, which splits into single characters.
//!
//! Two details differ from the usual string-joining formulation, and both
//! keep each chunk a verbatim slice of its source:
//!
//! * empty pieces between consecutive separators are kept, so joining a run
//!   of pieces reproduces the source text exactly;
//! * when trimming the merge window, zero-length pieces are dropped as well
//!   (the window shrinks while it is non-empty rather than while its length is
//!   positive).
//!
//! Chunks made only of whitespace are discarded. All lengths and offsets are
//! counted in Unicode scalar values, not bytes.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_CHUNK_SIZE: usize = 500;
pub const DEFAULT_OVERLAP: usize = 50;
pub const DEFAULT_SEPARATORS: [&str; 4] = ["\n\n", "\n", " ", ""];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SplitterError {
    #[error("chunk_size must be positive")]
    ZeroChunkSize,
    #[error("overlap {overlap} must be smaller than chunk_size {chunk_size}")]
    OverlapTooLarge { overlap: usize, chunk_size: usize },
    #[error("separator list must end with the empty separator")]
    MissingCharacterFallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitterConfig {
    pub chunk_size: usize,
    pub overlap: usize,
    pub separators: Vec<String>,
}

impl Default for SplitterConfig {
    fn default() -> Self {
        Self {
            chunk_size: DEFAULT_CHUNK_SIZE,
            overlap: DEFAULT_OVERLAP,
            separators: DEFAULT_SEPARATORS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl SplitterConfig {
    /// Config with the default paragraph, line, word, character cascade.
    pub fn new(chunk_size: usize, overlap: usize) -> Result<Self, SplitterError> {
        let cfg = Self {
            chunk_size,
            overlap,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_separators<I, S>(mut self, separators: I) -> Result<Self, SplitterError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.separators = separators.into_iter().map(Into::into).collect();
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), SplitterError> {
        if self.chunk_size == 0 {
            return Err(SplitterError::ZeroChunkSize);
        }
        if self.overlap >= self.chunk_size {
            return Err(SplitterError::OverlapTooLarge {
                overlap: self.overlap,
                chunk_size: self.chunk_size,
            });
        }
        match self.separators.last() {
            Some(last) if last.is_empty() => Ok(()),
            _ => Err(SplitterError::MissingCharacterFallback),
        }
    }
}

/// A contiguous slice of one document; the unit of retrieval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: String,
    pub ordinal: usize,
    /// Character offset (inclusive) into the source text.
    pub start: usize,
    /// Character offset (exclusive) into the source text.
    pub end: usize,
    pub text: String,
}

impl Chunk {
    /// Stable identifier used by the index and in citations.
    pub fn id(&self) -> String {
        format!("{}#{}", self.doc_id, self.ordinal)
    }

    pub fn char_len(&self) -> usize {
        self.end - self.start
    }
}

/// Splits `text` into chunks tagged with `doc_id`. An empty text yields no chunks.
///
/// `cfg` is assumed valid; see [`SplitterConfig::validate`].
pub fn split_recursive(doc_id: &str, text: &str, cfg: &SplitterConfig) -> Vec<Chunk> {
    let chars: Vec<char> = text.chars().collect();
    split_spans(&chars, cfg)
        .into_iter()
        .enumerate()
        .map(|(ordinal, (start, end))| Chunk {
            doc_id: doc_id.to_string(),
            ordinal,
            start,
            end,
            text: chars[start..end].iter().collect(),
        })
        .collect()
}

/// Chunk boundaries as `(start, end)` character offsets.
pub fn split_spans(chars: &[char], cfg: &SplitterConfig) -> Vec<(usize, usize)> {
    if chars.is_empty() {
        return Vec::new();
    }
    let separators: Vec<Vec<char>> = cfg.separators.iter().map(|s| s.chars().collect()).collect();
    let mut out = Vec::new();
    split_range(chars, 0, chars.len(), &separators, cfg, &mut out);
    out.retain(|&(s, e)| chars[s..e].iter().any(|c| !c.is_whitespace()));
    out
}

fn split_range(
    chars: &[char],
    lo: usize,
    hi: usize,
    separators: &[Vec<char>],
    cfg: &SplitterConfig,
    out: &mut Vec<(usize, usize)>,
) {
    let window = &chars[lo..hi];
    let mut chosen = separators.len().saturating_sub(1);
    let mut rest: &[Vec<char>] = &[];
    for (i, sep) in separators.iter().enumerate() {
        if sep.is_empty() {
            chosen = i;
            break;
        }
        if find(window, sep, 0).is_some() {
            chosen = i;
            rest = &separators[i + 1..];
            break;
        }
    }
    let sep: &[char] = separators.get(chosen).map(Vec::as_slice).unwrap_or(&[]);

    let mut good: Vec<(usize, usize)> = Vec::new();
    for piece in pieces(window, sep) {
        let piece = (piece.0 + lo, piece.1 + lo);
        if piece.1 - piece.0 < cfg.chunk_size {
            good.push(piece);
            continue;
        }
        if !good.is_empty() {
            merge(&good, sep.len(), cfg, out);
            good.clear();
        }
        if rest.is_empty() {
            out.push(piece);
        } else {
            split_range(chars, piece.0, piece.1, rest, cfg, out);
        }
    }
    if !good.is_empty() {
        merge(&good, sep.len(), cfg, out);
    }
}

/// Pieces between non-overlapping, left-to-right occurrences of `sep`,
/// including empty ones. An empty separator yields single characters.
fn pieces(window: &[char], sep: &[char]) -> Vec<(usize, usize)> {
    if sep.is_empty() {
        return (0..window.len()).map(|i| (i, i + 1)).collect();
    }
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(at) = find(window, sep, from) {
        out.push((from, at));
        from = at + sep.len();
    }
    out.push((from, window.len()));
    out
}

fn find(hay: &[char], needle: &[char], from: usize) -> Option<usize> {
    if needle.len() > hay.len() {
        return None;
    }
    (from..=hay.len() - needle.len()).find(|&i| hay[i..i + needle.len()] == *needle)
}

/// Greedy merge of consecutive pieces into windows of at most `chunk_size`
/// characters, keeping up to `overlap` characters between windows.
fn merge(pieces: &[(usize, usize)], sep_len: usize, cfg: &SplitterConfig, out: &mut Vec<(usize, usize)>) {
    let mut window: VecDeque<(usize, usize)> = VecDeque::new();
    let mut total = 0usize;
    for &piece in pieces {
        let len = piece.1 - piece.0;
        let joiner = |w: &VecDeque<(usize, usize)>| if w.is_empty() { 0 } else { sep_len };
        if total + len + joiner(&window) > cfg.chunk_size && !window.is_empty() {
            out.push((window[0].0, window[window.len() - 1].1));
            while !window.is_empty() && (total > cfg.overlap || total + len + joiner(&window) > cfg.chunk_size) {
                let (s, e) = window.pop_front().expect("non-empty window");
                total -= (e - s) + joiner(&window);
            }
        }
        total += len + joiner(&window);
        window.push_back(piece);
    }
    if !window.is_empty() {
        out.push((window[0].0, window[window.len() - 1].1));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(text: &str, cfg: &SplitterConfig) -> Vec<String> {
        split_recursive("d", text, cfg).into_iter().map(|c| c.text).collect()
    }

    #[test]
    fn empty_text_has_no_chunks() {
        assert!(split_recursive("d", "", &SplitterConfig::default()).is_empty());
    }

    #[test]
    fn short_text_is_one_chunk() {
        let cfg = SplitterConfig::new(100, 0).unwrap();
        let chunks = split_recursive("d", "short", &cfg);
        assert_eq!(chunks.len(), 1);
        assert_eq!((chunks[0].start, chunks[0].end), (0, 5));
        assert_eq!(chunks[0].id(), "d#0");
    }

    #[test]
    fn character_level_overlap() {
        let cfg = SplitterConfig::new(4, 2).unwrap().with_separators([""]).unwrap();
        assert_eq!(texts("abcdefgh", &cfg), ["abcd", "cdef", "efgh"]);
    }

    #[test]
    fn paragraphs_stay_whole() {
        let cfg = SplitterConfig::new(6, 0).unwrap();
        assert_eq!(texts("para1\n\npara2", &cfg), ["para1", "para2"]);
    }

    #[test]
    fn offsets_are_in_characters() {
        let cfg = SplitterConfig::new(3, 0).unwrap();
        let text = "ééé ààà";
        for c in split_recursive("d", text, &cfg) {
            let slice: String = text.chars().skip(c.start).take(c.end - c.start).collect();
            assert_eq!(slice, c.text);
            assert!(c.char_len() <= 3);
        }
    }

    #[test]
    fn whitespace_only_text_yields_nothing() {
        let cfg = SplitterConfig::new(2, 0).unwrap();
        assert!(split_recursive("d", " \n\n \n", &cfg).is_empty());
    }

    #[test]
    fn config_validation() {
        assert_eq!(SplitterConfig::new(0, 0), Err(SplitterError::ZeroChunkSize));
        assert!(matches!(
            SplitterConfig::new(4, 4),
            Err(SplitterError::OverlapTooLarge { .. })
        ));
        assert_eq!(
            SplitterConfig::default().with_separators(["\n"]),
            Err(SplitterError::MissingCharacterFallback)
        );
    }
}
