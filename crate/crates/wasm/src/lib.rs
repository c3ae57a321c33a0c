//! WebAssembly bindings for the demo page in `www/`.
//!
//! Every export takes plain numbers or JSON text and returns JSON text, so
//! the page needs no bundler. The `*_json` functions hold the logic and are
//! what native tests call; the exported wrappers only convert errors.

use eyeqa_core::corpus::{split_spans, SplitterConfig};
use eyeqa_core::stats::{cohens_kappa_from_table, kruskal_wallis, mann_whitney_u};
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct Piece {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

/// Chunks `text` with the recursive splitter. Offsets count characters.
pub fn split_text_json(text: &str, chunk_size: usize, overlap: usize) -> Result<String, String> {
    let cfg = SplitterConfig::new(chunk_size, overlap).map_err(|e| e.to_string())?;
    let chars: Vec<char> = text.chars().collect();
    let pieces: Vec<Piece> = split_spans(&chars, &cfg)
        .into_iter()
        .map(|(start, end)| Piece {
            start,
            end,
            text: chars[start..end].iter().collect(),
        })
        .collect();
    serde_json::to_string(&pieces).map_err(|e| e.to_string())
}

pub fn mwu_json(a: &[f64], b: &[f64]) -> Result<String, String> {
    let r = mann_whitney_u(a, b).map_err(|e| e.to_string())?;
    Ok(json!({
        "u_a": r.u_a,
        "u_b": r.u_b,
        "z": r.z,
        "exact": r.exact,
        "p_value": r.result.p_value,
        "method": r.result.method,
    })
    .to_string())
}

/// `groups` is a JSON array of number arrays.
pub fn kw_json(groups: &str) -> Result<String, String> {
    let groups: Vec<Vec<f64>> = serde_json::from_str(groups).map_err(|e| format!("groups: {e}"))?;
    let r = kruskal_wallis(&groups).map_err(|e| e.to_string())?;
    serde_json::to_string(&r).map_err(|e| e.to_string())
}

/// `table` is a square JSON matrix of counts, rows for rater 1.
pub fn kappa_json(table: &str) -> Result<String, String> {
    let table: Vec<Vec<f64>> = serde_json::from_str(table).map_err(|e| format!("table: {e}"))?;
    let k = cohens_kappa_from_table(&table).map_err(|e| e.to_string())?;
    Ok(json!({
        "kappa": k.kappa,
        "band": k.band.label(),
        "observed_agreement": k.observed_agreement,
        "expected_agreement": k.expected_agreement,
        "p_value": k.result.p_value,
    })
    .to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn split_text(text: &str, chunk_size: usize, overlap: usize) -> Result<String, JsError> {
    js(split_text_json(text, chunk_size, overlap))
}

#[wasm_bindgen]
pub fn mwu(a: &[f64], b: &[f64]) -> Result<String, JsError> {
    js(mwu_json(a, b))
}

#[wasm_bindgen]
pub fn kw(groups: &str) -> Result<String, JsError> {
    js(kw_json(groups))
}

#[wasm_bindgen]
pub fn kappa(table: &str) -> Result<String, JsError> {
    js(kappa_json(table))
}
