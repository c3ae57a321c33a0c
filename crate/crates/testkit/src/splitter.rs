//! String-level transcription of the recursive character splitting
//! procedure: choose a separator, split, merge short pieces with overlap,
//! recurse into long ones.
//!
//! Two adjustments relative to the common formulation are mirrored here:
//! empty pieces are kept when splitting on a separator, and the window trim
//! loop runs while the window is non-empty. Whitespace-only chunks are
//! dropped, as the common formulation's strip-and-discard step does.

fn char_len(s: &str) -> usize {
    s.chars().count()
}

fn join_chunk(parts: &[String], sep: &str, out: &mut Vec<String>) {
    let text = parts.join(sep);
    if !text.trim().is_empty() {
        out.push(text);
    }
}

fn merge_splits(splits: &[String], sep: &str, chunk_size: usize, overlap: usize) -> Vec<String> {
    let sep_len = char_len(sep);
    let mut docs = Vec::new();
    let mut current: Vec<String> = Vec::new();
    let mut total = 0usize;
    for d in splits {
        let len = char_len(d);
        let extra = if current.is_empty() { 0 } else { sep_len };
        if total + len + extra > chunk_size && !current.is_empty() {
            join_chunk(&current, sep, &mut docs);
            loop {
                if current.is_empty() {
                    break;
                }
                let extra = if current.is_empty() { 0 } else { sep_len };
                if !(total > overlap || total + len + extra > chunk_size) {
                    break;
                }
                let first_len = char_len(&current[0]);
                let joiner = if current.len() > 1 { sep_len } else { 0 };
                total -= first_len + joiner;
                current.remove(0);
            }
        }
        current.push(d.clone());
        total += len + if current.len() > 1 { sep_len } else { 0 };
    }
    if !current.is_empty() {
        join_chunk(&current, sep, &mut docs);
    }
    docs
}

fn split_text(text: &str, separators: &[String], chunk_size: usize, overlap: usize) -> Vec<String> {
    let mut separator = separators.last().cloned().unwrap_or_default();
    let mut next: &[String] = &[];
    for (i, s) in separators.iter().enumerate() {
        if s.is_empty() {
            separator = String::new();
            break;
        }
        if text.contains(s.as_str()) {
            separator = s.clone();
            next = &separators[i + 1..];
            break;
        }
    }
    let splits: Vec<String> = if separator.is_empty() {
        text.chars().map(String::from).collect()
    } else {
        text.split(separator.as_str()).map(String::from).collect()
    };

    let mut out = Vec::new();
    let mut good: Vec<String> = Vec::new();
    for s in splits {
        if char_len(&s) < chunk_size {
            good.push(s);
            continue;
        }
        if !good.is_empty() {
            out.extend(merge_splits(&good, &separator, chunk_size, overlap));
            good.clear();
        }
        if next.is_empty() {
            if !s.trim().is_empty() {
                out.push(s);
            }
        } else {
            out.extend(split_text(&s, next, chunk_size, overlap));
        }
    }
    if !good.is_empty() {
        out.extend(merge_splits(&good, &separator, chunk_size, overlap));
    }
    out
}

/// Chunk texts for `text`.
pub fn oracle_split(text: &str, chunk_size: usize, overlap: usize, separators: &[&str]) -> Vec<String> {
    if text.is_empty() {
        return Vec::new();
    }
    let seps: Vec<String> = separators.iter().map(|s| s.to_string()).collect();
    split_text(text, &seps, chunk_size, overlap)
}
